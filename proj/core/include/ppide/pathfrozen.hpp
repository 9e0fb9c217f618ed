#pragma once

#include "ppide/bsde.hpp"
#include "ppide/operators.hpp"
#include "ppide/path.hpp"
#include "ppide/simulate.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace ppide {

// Anchor point plus the recorded hitting pairs (s_0, y_0), (s_1, y_1), ...
// The anchor path matters strictly before anchorTime; from there on the path
// is frozen at the recorded levels.
struct FrozenSkeleton {
    double anchorTime = 0.0;
    CadlagPath anchorPath;
    std::vector<std::pair<double, Eigen::VectorXd>> pairs;

    FrozenSkeleton extended(double t, const Eigen::VectorXd& x) const {
        FrozenSkeleton out = *this;
        out.pairs.emplace_back(t, x);
        return out;
    }
    FrozenSkeleton parent() const {
        FrozenSkeleton out = *this;
        out.pairs.pop_back();
        return out;
    }
};

// The frozen data path: anchor path before anchorTime, then the skeleton
// levels (recorded pairs followed by `extra`), and `terminal` at the horizon.
CadlagPath frozen_data(const FrozenSkeleton& skel,
                       const std::vector<std::pair<double, Eigen::VectorXd>>& extra,
                       const Eigen::VectorXd& terminal);

// Monte Carlo parameters shared by the skeleton value functions.
struct ThetaParams {
    double eps = 0.25;
    int n_paths = 4000;
    double h = 1.0 / 128.0;
    std::uint64_t seed = 1;
    RegressionBasis basis{2, false, false};
};

// Skeleton value: start the driving process at (t, 0), shift it by x, record
// its hitting pairs relative to the last skeleton level, and solve the
// backward equation whose terminal datum and driver read the frozen data path.
ValueEstimate theta(const Characteristics& chi, const Driver& driver,
                    const std::function<double(const CadlagPath&)>& xi,
                    const FrozenSkeleton& skel, double t, const Eigen::VectorXd& x,
                    const ThetaParams& params);

// Exterior data for the next cylinder: theta of the skeleton extended by the
// (time-clamped) query point itself.
ValueEstimate h_eps(const Characteristics& chi, const Driver& driver,
                    const std::function<double(const CadlagPath&)>& xi,
                    const FrozenSkeleton& skel, double t, const Eigen::VectorXd& x,
                    const ThetaParams& params);

// Rectangle [t0, t1] x [x0, x1].
struct Box2 {
    double t0 = 0.0, t1 = 1.0, x0 = 0.0, x1 = 1.0;
};

// Tensor Bernstein polynomial on a box, with coefficients given by function
// samples on the uniform lattice.
class BernsteinFit {
public:
    BernsteinFit() = default;
    BernsteinFit(Box2 box, Eigen::MatrixXd coeff) : box_(box), coeff_(std::move(coeff)) {}

    double operator()(double t, double x) const;
    const Box2& box() const { return box_; }
    int degreeT() const { return static_cast<int>(coeff_.rows()) - 1; }
    int degreeX() const { return static_cast<int>(coeff_.cols()) - 1; }
    double certifiedError() const { return certifiedError_; }
    void setCertifiedError(double e) { certifiedError_ = e; }

private:
    Box2 box_;
    Eigen::MatrixXd coeff_; // (degT+1) x (degX+1)
    double certifiedError_ = 0.0;
};

// Fit f on the box with the given degrees.  If `requested` > 0 the sup-error
// is audited on a refined lattice and an ApproximationError reporting the
// achieved error is thrown when it exceeds the request.
BernsteinFit bernstein_fit(const std::function<double(double, double)>& f,
                           const Box2& box, int degT, int degX,
                           double requested = -1.0, int auditFactor = 4);

// Space-time cylinder for the localized grid solve (scalar state).
struct CylinderGrid {
    double center = 0.0; // y
    double eps = 0.25;   // inner radius: the PDE lives on (y - eps, y + eps)
    double t0 = 0.0;
    double t1 = 1.0;
    int nx = 64; // interior space intervals
    int nt = 64; // time steps
};

// Local semilinear driver fhat(t, x, w, dw/dx, p).
using LocalDriver = std::function<double(double, double, double, double, double)>;

// Grid solution with bilinear evaluation.
class GridSolution {
public:
    std::vector<double> times;
    std::vector<double> xs;
    Eigen::MatrixXd w; // (nt+1) x (nx+1)

    double eval(double t, double x) const;
};

// Backward grid solve of the localized equation on the cylinder.  The state
// reached by a jump is always read from the exterior data `h`, which also
// provides the lateral and terminal values; the diffusion part is implicit
// and the semilinear term is resolved by damped Picard iteration (damping
// 0.5, relative tolerance 1e-10, at most 50 sweeps).
GridSolution solve_frozen_pide(const Characteristics& chi,
                               const std::function<double(double)>& etaBar,
                               const LocalDriver& fhat,
                               const std::function<double(double, double)>& exterior,
                               const CylinderGrid& grid);

// Parameters of the patched global approximation.
struct PsiParams {
    double eps = 0.25;
    int depth = 3;            // maximal number of recorded hitting pairs
    int degT = 2, degX = 3;   // Bernstein degrees of the exterior data
    int nx = 48, nt = 48;     // cylinder grid
    ThetaParams mc;           // nested Monte Carlo parameters
};

// The recursive patched approximation built from cylinder solves.  Level j
// uses the tolerance delta_j = eps / 2^(j+2); level values are pinned so that
// the approximation exceeds the skeleton value by eps/2 plus the delta tail.
class Psi {
public:
    Psi(Characteristics chi, Driver driver,
        std::function<double(const CadlagPath&)> xi, double sStar,
        CadlagPath omegaStar, PsiParams params);

    // Evaluate at (t, omega) with t >= anchor time; throws SolverError when
    // the path records more hitting pairs than `depth` before t.
    double value(double t, const CadlagPath& omega);

    struct Audit {
        double theta1 = 0.0;   // skeleton value at the anchor
        double theta1se = 0.0;
        double psiAnchor = 0.0;
        double eps = 0.0;
        std::vector<double> deltas;
    };
    Audit audit();

    double delta(int j) const; // eps / 2^(j+2)
    double anchorTime() const { return sStar_; }

private:
    struct Level {
        FrozenSkeleton skel;
        BernsteinFit hbar;     // smoothed exterior data, already shifted by delta_j
        GridSolution grid;
        double wAnchor = 0.0;  // grid value at (s_{j-1}, y_{j-1})
    };

    Level& level(const FrozenSkeleton& skel, int j);
    double levelValue(const FrozenSkeleton& skel, int j, double t, double x);
    static std::string cacheKey(const FrozenSkeleton& skel);

    Characteristics chi_;
    Driver driver_;
    std::function<double(const CadlagPath&)> xi_;
    double sStar_;
    CadlagPath omegaStar_;
    PsiParams params_;
    FrozenSkeleton root_;
    double theta1_ = 0.0, theta1se_ = 0.0;
    bool haveTheta1_ = false;
    std::map<std::string, Level> cache_;
};

Psi build_psi(const Characteristics& chi, const Driver& driver,
              const std::function<double(const CadlagPath&)>& xi,
              double sStar, const CadlagPath& omegaStar, const PsiParams& params);

// Pointwise one-sided comparison of the backward Monte Carlo value against
// the patched approximation at the given probe points.
struct ComparisonRow {
    double t = 0.0;
    double u0 = 0.0;
    double u0se = 0.0;
    double psi = 0.0;
    bool ok = false;
};
std::vector<ComparisonRow> partial_comparison_check(
    const Characteristics& chi, const Driver& driver,
    const std::function<double(const CadlagPath&)>& xi, Psi& psi,
    const std::vector<TimePoint>& points, int n_paths, double h,
    std::uint64_t seed, double slack);

} // namespace ppide
