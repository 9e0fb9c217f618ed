#pragma once

#include "ppide/operators.hpp"
#include "ppide/path.hpp"
#include "ppide/simulate.hpp"

#include <functional>
#include <vector>

namespace ppide {

// Global polynomial regression basis for the least-squares conditional
// expectations: all monomials of total degree <= degree in the selected
// features (the current state, optionally the running maximum of |X| and the
// time of the last jump).  Features are standardized per time step; columns
// that are constant across the ensemble are absorbed into the intercept.
struct RegressionBasis {
    int degree = 2;
    bool useRunningMax = false;
    bool useLastJump = false;
};

// Driver seen by the backward induction: everything is indexed by the sample
// path, so callers can attach whatever pathwise context they need.  `uAtoms`
// holds the regressed jump increments U(z_i), one per atom of the jump
// measure.  The driver must be non-anticipating: it may only read information
// up to time t.
using PathDriver = std::function<double(
    int path, double t, double y, const Eigen::VectorXd& z, const Eigen::VectorXd& uAtoms)>;

// Stopping rule: maps a path to a stopping time in [start, horizon].  It must
// be of hitting type (determined by the path up to the returned time).
using StoppingRule = std::function<double(const CadlagPath&)>;

struct ValueEstimate {
    double value = 0.0;
    double se = 0.0;
};

// Backward solution: value process, the regressed Z (one N x d block per
// step) and per-atom jump increments U (one N x n_atoms block per step).
struct BsdeSolution {
    std::vector<double> grid;
    Eigen::MatrixXd y;                   // (m+1) x N
    std::vector<Eigen::MatrixXd> z;      // m blocks, N x d
    std::vector<Eigen::MatrixXd> uAtoms; // m blocks, N x n_atoms
    double rootValue = 0.0;
    double rootSe = 0.0;
    int basisSize = 0;
};

// Least-squares Monte Carlo backward induction on a simulated ensemble with
// the given terminal values (one per path).
BsdeSolution solve_bsde(const Ensemble& ens, const Characteristics& chi,
                        const std::vector<double>& terminal, const PathDriver& driver,
                        const RegressionBasis& basis = {});

// Convenience overload: terminal functional and semilinear driver f(t, w, y,
// z, p) with p = sum_i weight_i eta(t, w, z_i) U_i.
BsdeSolution solve_bsde(const Ensemble& ens, const Characteristics& chi,
                        const std::function<double(const CadlagPath&)>& xi,
                        const Driver& driver, const RegressionBasis& basis = {});

// Value u0(t, omega): simulate from the stopped path, solve backward, return
// the root value with a pathwise standard-error proxy.
ValueEstimate u0(const Characteristics& chi, const Driver& driver,
                 const std::function<double(const CadlagPath&)>& xi,
                 double t, const CadlagPath& w, int n_paths, double h,
                 std::uint64_t seed, const RegressionBasis& basis = {});

// Penalized nonlinear expectation with penalty level L of xi stopped at tau:
// driver +L(|z|_1 + int U^+ eta dK) on the Brownian loading z for the upper
// value, and the mirrored -L(... U^- ...) for the lower one.  `eta` defaults to 1 ^ |z|.
ValueEstimate nonlinear_expectation(
    const Characteristics& chi, double L, double s, const CadlagPath& w,
    const StoppingRule& tau, const std::function<double(const CadlagPath&)>& xi,
    bool upper, int n_paths, double h, std::uint64_t seed,
    const RegressionBasis& basis = {},
    const std::function<double(double, const CadlagPath&, const Eigen::VectorXd&)>& eta = {});

// Admissible control of the change-of-measure density: the continuous-part
// load H (with |sigma^T H| bounded by the penalty level) and the jump load
// W(t, w, z) in [0, L eta(z)].
struct ControlPair {
    std::function<Eigen::VectorXd(double, const CadlagPath&)> H;
    std::function<double(double, const CadlagPath&, const Eigen::VectorXd&)> W;
};

// Forward estimate E[Gamma_T  xi(X)] where Gamma is the stochastic exponential
// driven by (H, W): dGamma = Gamma_- (H . dX^c + W d(mu - nu)).  Throws
// SolverError if a discrete factor makes Gamma non-positive.
ValueEstimate gamma_expectation(const Characteristics& chi, const ControlPair& ctrl,
                                double s, const CadlagPath& w,
                                const std::function<double(const CadlagPath&)>& xi,
                                int n_paths, double h, std::uint64_t seed);

// Reflected backward solution with lower barrier R: on top of the penalized
// driver, Ybar is pushed up to the barrier by the minimal nondecreasing K.
struct RbsdeSolution {
    std::vector<double> grid;
    Eigen::MatrixXd y;            // (m+1) x N, reflected value
    Eigen::MatrixXd kbar;         // (m+1) x N, cumulative reflection
    std::vector<double> tauStar;  // per path: first time Ybar touches R
    double rootValue = 0.0;
    double rootSe = 0.0;
};

// barrier(t, w) reads w only up to t.  `horizonStop` (optional) truncates the
// problem at a hitting time; past it the value is frozen at the barrier.
RbsdeSolution solve_rbsde(
    const Ensemble& ens, const Characteristics& chi,
    const std::function<double(double, const CadlagPath&)>& barrier, double L,
    const RegressionBasis& basis = {},
    const std::function<double(double, const CadlagPath&, const Eigen::VectorXd&)>& eta = {},
    const StoppingRule& horizonStop = {});

// Special semimartingale S = s0 + beta dt + H . dX^c + W d(mu - nu).
struct SemimartingaleSpec {
    double s0 = 0.0;
    std::function<double(double, const CadlagPath&)> beta;
    std::function<Eigen::VectorXd(double, const CadlagPath&)> H;
    std::function<double(double, const CadlagPath&, const Eigen::VectorXd&)> W;
};

// Integration-by-parts diagnostic: compares E[S^1_T S^2_T] against the drift
// expansion s0^1 s0^2 + E[int (S^2 beta^1 + S^1 beta^2 + H^1 . c H^2 +
// int W^1 W^2 dK) dt].
struct IbpReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double se = 0.0;
};
IbpReport ibp_check(const Characteristics& chi, const SemimartingaleSpec& s1,
                    const SemimartingaleSpec& s2, double s, const CadlagPath& w,
                    int n_paths, double h, std::uint64_t seed);

} // namespace ppide
