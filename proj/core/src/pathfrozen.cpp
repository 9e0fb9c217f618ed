#include "ppide/pathfrozen.hpp"

#include "ppide/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ppide {

CadlagPath frozen_data(const FrozenSkeleton& skel,
                       const std::vector<std::pair<double, Eigen::VectorXd>>& extra,
                       const Eigen::VectorXd& terminal) {
    std::vector<std::pair<double, Eigen::VectorXd>> levels = skel.pairs;
    levels.insert(levels.end(), extra.begin(), extra.end());
    return concat(skel.anchorPath, skel.anchorTime, levels, terminal);
}

ValueEstimate theta(const Characteristics& chi, const Driver& driver,
                    const std::function<double(const CadlagPath&)>& xi,
                    const FrozenSkeleton& skel, double t, const Eigen::VectorXd& x,
                    const ThetaParams& params) {
    if (skel.pairs.empty()) throw InputError("theta: skeleton needs at least one pair");
    const double T = chi.horizon;
    const Eigen::VectorXd y = skel.pairs.back().second;
    t = std::clamp(t, skel.anchorTime, T);

    if (t >= T - 1e-9) {
        // Nothing left to simulate: the terminal level is x itself.
        return {xi(frozen_data(skel, {}, x)), 0.0};
    }

    const Ensemble ens =
        simulate(chi, t, CadlagPath::zero(T, chi.dim), params.n_paths, params.h, params.seed);

    std::vector<double> terminal(ens.size());
    std::vector<CadlagPath> frozen;
    frozen.reserve(ens.size());
    for (int p = 0; p < ens.size(); ++p) {
        const CadlagPath& X = ens.paths[p];
        // Hitting pairs of x + X, the first one measured from the last level.
        const auto hits = hitting_skeleton(X, t, params.eps, y - x);
        std::vector<std::pair<double, Eigen::VectorXd>> ext;
        ext.reserve(hits.size());
        for (const auto& hp : hits) ext.emplace_back(hp.first, x + hp.second);
        frozen.push_back(frozen_data(skel, ext, x + X.value(T)));
        terminal[p] = xi(frozen.back());
    }

    const double sStar = skel.anchorTime;
    PathDriver pd = [&chi, &driver, &frozen, sStar, T](int p, double r, double yv,
                                                       const Eigen::VectorXd& z,
                                                       const Eigen::VectorXd& uAtoms) {
        const double tc = std::clamp(r, sStar, T);
        const CadlagPath& w = frozen[p];
        double pv = 0.0;
        for (std::size_t a = 0; a < chi.jumps.atoms.size(); ++a) {
            const Eigen::VectorXd zz = chi.jumpSize(tc, w, chi.jumps.atoms[a].z);
            const double et = driver.eta ? driver.eta(tc, w, zz) : std::min(1.0, zz.norm());
            pv += chi.jumps.atoms[a].weight * et * uAtoms(a);
        }
        return driver.f(tc, w, yv, z, pv);
    };

    const BsdeSolution sol = solve_bsde(ens, chi, terminal, pd, params.basis);
    return {sol.rootValue, sol.rootSe};
}

ValueEstimate h_eps(const Characteristics& chi, const Driver& driver,
                    const std::function<double(const CadlagPath&)>& xi,
                    const FrozenSkeleton& skel, double t, const Eigen::VectorXd& x,
                    const ThetaParams& params) {
    if (skel.pairs.empty()) throw InputError("h_eps: skeleton needs at least one pair");
    const double tq = std::clamp(t, skel.pairs.back().first, chi.horizon);
    return theta(chi, driver, xi, skel.extended(tq, x), tq, x, params);
}

// --- Bernstein fits ----------------------------------------------------------

namespace {

double bernsteinBasis(int n, int k, double u) {
    // C(n,k) u^k (1-u)^(n-k), computed stably for the small degrees used here.
    double c = 1.0;
    for (int i = 0; i < k; ++i) c *= static_cast<double>(n - i) / (k - i);
    return c * std::pow(u, k) * std::pow(1.0 - u, n - k);
}

} // namespace

double BernsteinFit::operator()(double t, double x) const {
    const int n = degreeT(), m = degreeX();
    const double u = (box_.t1 > box_.t0) ? std::clamp((t - box_.t0) / (box_.t1 - box_.t0), 0.0, 1.0) : 0.0;
    const double v = (box_.x1 > box_.x0) ? std::clamp((x - box_.x0) / (box_.x1 - box_.x0), 0.0, 1.0) : 0.0;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double bi = bernsteinBasis(n, i, u);
        if (bi == 0.0) continue;
        for (int j = 0; j <= m; ++j) acc += coeff_(i, j) * bi * bernsteinBasis(m, j, v);
    }
    return acc;
}

BernsteinFit bernstein_fit(const std::function<double(double, double)>& f,
                           const Box2& box, int degT, int degX,
                           double requested, int auditFactor) {
    if (degT < 0 || degX < 0) throw InputError("bernstein_fit: degrees must be >= 0");
    Eigen::MatrixXd coeff(degT + 1, degX + 1);
    for (int i = 0; i <= degT; ++i) {
        const double t = box.t0 + (box.t1 - box.t0) * (degT == 0 ? 0.0 : double(i) / degT);
        for (int j = 0; j <= degX; ++j) {
            const double x = box.x0 + (box.x1 - box.x0) * (degX == 0 ? 0.0 : double(j) / degX);
            coeff(i, j) = f(t, x);
        }
    }
    BernsteinFit fit(box, std::move(coeff));
    if (requested > 0) {
        const int na = std::max(2, auditFactor * (degT + 1));
        const int ma = std::max(2, auditFactor * (degX + 1));
        double worst = 0.0;
        for (int i = 0; i <= na; ++i) {
            const double t = box.t0 + (box.t1 - box.t0) * double(i) / na;
            for (int j = 0; j <= ma; ++j) {
                const double x = box.x0 + (box.x1 - box.x0) * double(j) / ma;
                worst = std::max(worst, std::abs(fit(t, x) - f(t, x)));
            }
        }
        fit.setCertifiedError(worst);
        if (worst > requested) {
            std::ostringstream os;
            os << "bernstein_fit: achieved sup-error " << worst
               << " exceeds the requested tolerance " << requested
               << "; increase the degrees";
            throw ApproximationError(os.str());
        }
    }
    return fit;
}

// --- localized grid solve ----------------------------------------------------

double GridSolution::eval(double t, double x) const {
    const double tc = std::clamp(t, times.front(), times.back());
    const double xc = std::clamp(x, xs.front(), xs.back());
    const int nt = static_cast<int>(times.size()) - 1;
    const int nx = static_cast<int>(xs.size()) - 1;
    const double dt = (times.back() - times.front()) / nt;
    const double dx = (xs.back() - xs.front()) / nx;
    int i = std::min(nt - 1, static_cast<int>((tc - times.front()) / dt));
    int j = std::min(nx - 1, static_cast<int>((xc - xs.front()) / dx));
    i = std::max(0, i);
    j = std::max(0, j);
    const double a = (tc - times[i]) / dt;
    const double b = (xc - xs[j]) / dx;
    return (1 - a) * ((1 - b) * w(i, j) + b * w(i, j + 1)) +
           a * ((1 - b) * w(i + 1, j) + b * w(i + 1, j + 1));
}

GridSolution solve_frozen_pide(const Characteristics& chi,
                               const std::function<double(double)>& etaBar,
                               const LocalDriver& fhat,
                               const std::function<double(double, double)>& exterior,
                               const CylinderGrid& grid) {
    if (chi.dim != 1) throw InputError("solve_frozen_pide: scalar state only");
    if (grid.nx < 3 || grid.nt < 1) throw InputError("solve_frozen_pide: grid too coarse");
    if (grid.eps <= 0 || grid.t1 <= grid.t0)
        throw InputError("solve_frozen_pide: empty cylinder");

    // Constant coefficients, read once at the cylinder anchor.
    const CadlagPath flat(chi.horizon, Eigen::VectorXd::Constant(1, grid.center));
    const double b = chi.drift(grid.t0, flat)(0);
    const double sg = chi.dispersion(grid.t0, flat)(0, 0);
    const double c = sg * sg;
    double m1 = 0.0, lambda = 0.0;
    for (const auto& atom : chi.jumps.atoms) {
        m1 += atom.weight * atom.z(0);
        lambda += atom.weight;
    }
    const double btilde = b - m1; // compensated drift

    GridSolution sol;
    const int nx = grid.nx, nt = grid.nt;
    sol.times.resize(nt + 1);
    sol.xs.resize(nx + 1);
    const double dt = (grid.t1 - grid.t0) / nt;
    const double dx = 2.0 * grid.eps / nx;
    for (int i = 0; i <= nt; ++i) sol.times[i] = grid.t0 + dt * i;
    for (int j = 0; j <= nx; ++j) sol.xs[j] = grid.center - grid.eps + dx * j;
    sol.w.resize(nt + 1, nx + 1);

    for (int j = 0; j <= nx; ++j) sol.w(nt, j) = exterior(grid.t1, sol.xs[j]);

    // Upwinded implicit operator: M-matrix, so the scheme is monotone in the
    // data.  Interior unknowns are j = 1 .. nx-1; the lateral nodes are
    // Dirichlet from the exterior data.
    const double lower0 = -0.5 * c / (dx * dx) - std::max(-btilde, 0.0) / dx;
    const double upper0 = -0.5 * c / (dx * dx) - std::max(btilde, 0.0) / dx;
    const double diag0 = 1.0 / dt + c / (dx * dx) + std::abs(btilde) / dx + lambda;

    std::vector<double> sh(nx + 1), wcur(nx + 1), wnew(nx + 1);
    std::vector<double> cp(nx + 1), dp(nx + 1); // Thomas sweeps

    for (int n = nt - 1; n >= 0; --n) {
        const double t = sol.times[n];
        const double bl = exterior(t, sol.xs[0]);
        const double br = exterior(t, sol.xs[nx]);
        // Nonlocal source: every jump lands on the exterior data.
        for (int j = 1; j < nx; ++j) {
            double acc = 0.0;
            for (const auto& atom : chi.jumps.atoms)
                acc += atom.weight * exterior(t, sol.xs[j] + atom.z(0));
            sh[j] = acc;
        }
        const double eb = etaBar ? etaBar(t) : 0.0;

        for (int j = 0; j <= nx; ++j) wcur[j] = sol.w(n + 1, j);
        wcur[0] = bl;
        wcur[nx] = br;

        bool converged = false;
        for (int sweep = 0; sweep < 50; ++sweep) {
            // Assemble rhs with the current Picard iterate in the nonlinearity.
            // Forward elimination of the constant tridiagonal system.
            double worst = 0.0, scale = 1.0;
            for (int j = 1; j < nx; ++j) {
                const double dwx = (wcur[j + 1] - wcur[j - 1]) / (2.0 * dx);
                const double iw = eb * (sh[j] - lambda * wcur[j]);
                double rhs = sol.w(n + 1, j) / dt + sh[j] +
                             fhat(t, sol.xs[j], wcur[j], dwx, iw);
                if (j == 1) rhs -= lower0 * bl;
                if (j == nx - 1) rhs -= upper0 * br;
                if (j == 1) {
                    cp[j] = upper0 / diag0;
                    dp[j] = rhs / diag0;
                } else {
                    const double m = diag0 - lower0 * cp[j - 1];
                    cp[j] = upper0 / m;
                    dp[j] = (rhs - lower0 * dp[j - 1]) / m;
                }
            }
            wnew[nx - 1] = dp[nx - 1];
            for (int j = nx - 2; j >= 1; --j) wnew[j] = dp[j] - cp[j] * wnew[j + 1];

            for (int j = 1; j < nx; ++j) {
                const double upd = 0.5 * (wnew[j] - wcur[j]); // damped Picard
                worst = std::max(worst, std::abs(wnew[j] - wcur[j]));
                scale = std::max(scale, std::abs(wcur[j]));
                wcur[j] += upd;
            }
            if (worst <= 1e-10 * scale) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw SolverError("solve_frozen_pide: Picard iteration failed to converge at "
                              "time step " + std::to_string(n));
        for (int j = 0; j <= nx; ++j) sol.w(n, j) = wcur[j];
        sol.w(n, 0) = bl;
        sol.w(n, nx) = br;
    }
    return sol;
}

// --- patched global approximation -------------------------------------------

Psi::Psi(Characteristics chi, Driver driver,
         std::function<double(const CadlagPath&)> xi, double sStar,
         CadlagPath omegaStar, PsiParams params)
    : chi_(std::move(chi)), driver_(std::move(driver)), xi_(std::move(xi)),
      sStar_(sStar), omegaStar_(std::move(omegaStar)), params_(std::move(params)) {
    if (chi_.dim != 1) throw InputError("Psi: scalar state only");
    if (params_.eps <= 0) throw InputError("Psi: eps must be positive");
    if (chi_.minJumpSize > 0 && params_.eps >= chi_.minJumpSize)
        throw InputError("Psi: eps must be smaller than the minimal jump size");
    params_.mc.eps = params_.eps;
    root_.anchorTime = sStar_;
    root_.anchorPath = omegaStar_;
    root_.pairs = {{sStar_, omegaStar_.value(sStar_)}};
}

double Psi::delta(int j) const { return params_.eps * std::pow(2.0, -(j + 2)); }

std::string Psi::cacheKey(const FrozenSkeleton& skel) {
    std::ostringstream os;
    for (const auto& p : skel.pairs) {
        os << llround(p.first * 1e9) << ":";
        for (int i = 0; i < p.second.size(); ++i) os << llround(p.second(i) * 1e9) << ",";
        os << ";";
    }
    return os.str();
}

Psi::Level& Psi::level(const FrozenSkeleton& skel, int j) {
    const std::string key = cacheKey(skel);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    const double sPrev = skel.pairs.back().first;
    const double y = skel.pairs.back().second(0);
    const double T = chi_.horizon;

    // Exterior data: smoothed skeleton value of the next level, lifted by the
    // level tolerance so that it dominates the rough data.
    const double lift = delta(j);
    const Box2 box{sPrev, T, y - 4.0 * chi_.bound, y + 4.0 * chi_.bound};
    auto hFn = [this, &skel, lift](double t, double x) {
        return h_eps(chi_, driver_, xi_, skel, t, Eigen::VectorXd::Constant(1, x),
                     params_.mc).value + lift;
    };
    Level lv;
    lv.skel = skel;
    lv.hbar = bernstein_fit(hFn, box, params_.degT, params_.degX);

    // The driver of the cylinder equation reads the path frozen at this level.
    const CadlagPath levelPath = frozen_data(skel, {}, skel.pairs.back().second);
    const double sStar = sStar_;
    auto clampT = [sStar, T](double t) { return std::clamp(t, sStar, T); };
    auto fhat = [this, levelPath, clampT](double t, double, double w, double dwx, double p) {
        return driver_.f(clampT(t), levelPath, w, Eigen::VectorXd::Constant(1, dwx), p);
    };
    std::function<double(double)> etaBar;
    if (!chi_.jumps.atoms.empty()) {
        const Eigen::VectorXd z0 = chi_.jumps.atoms.front().z;
        etaBar = [this, levelPath, clampT, z0](double t) {
            return driver_.eta ? driver_.eta(clampT(t), levelPath, z0)
                               : std::min(1.0, z0.norm());
        };
    }
    const BernsteinFit hbar = lv.hbar;
    auto exterior = [hbar](double t, double x) { return hbar(t, x); };

    CylinderGrid grid;
    grid.center = y;
    grid.eps = params_.eps;
    grid.t0 = sPrev;
    grid.t1 = T;
    grid.nx = params_.nx;
    grid.nt = params_.nt;
    lv.grid = solve_frozen_pide(chi_, etaBar, fhat, exterior, grid);
    lv.wAnchor = lv.grid.eval(sPrev, y);

    return cache_.emplace(key, std::move(lv)).first->second;
}

double Psi::levelValue(const FrozenSkeleton& skel, int j, double t, double x) {
    Level& lv = level(skel, j);
    const double sPrev = skel.pairs.back().first;
    const double y = skel.pairs.back().second(0);

    double base;
    if (j == 1) {
        if (!haveTheta1_) {
            const ValueEstimate th =
                theta(chi_, driver_, xi_, root_, sStar_, root_.pairs.front().second, params_.mc);
            theta1_ = th.value;
            theta1se_ = th.se;
            haveTheta1_ = true;
        }
        base = theta1_ + 0.5 * params_.eps;
    } else {
        base = levelValue(skel.parent(), j - 1, sPrev, y) + delta(j - 1);
    }

    const double tc = std::clamp(t, sPrev, chi_.horizon);
    const double wval = (std::abs(x - y) <= params_.eps + 1e-12)
                            ? lv.grid.eval(tc, x)
                            : lv.hbar(tc, x);
    return base + (wval - lv.wAnchor);
}

double Psi::value(double t, const CadlagPath& omega) {
    if (t < sStar_ - kTimeTol)
        throw InputError("Psi::value: time precedes the anchor");
    const auto hits = hitting_skeleton(omega, sStar_, params_.eps);
    FrozenSkeleton skel = root_;
    int i = 0;
    for (const auto& hp : hits) {
        if (hp.first >= t - kTimeTol) break;
        skel.pairs.emplace_back(hp.first, hp.second);
        ++i;
    }
    if (i + 1 > params_.depth)
        throw SolverError("Psi::value: path records more than depth=" +
                          std::to_string(params_.depth) +
                          " hitting pairs before t; rebuild with a larger depth");
    const double v = levelValue(skel, i + 1, t, omega.value(t)(0));
    const double tail = params_.eps * std::pow(2.0, -(i + 2));
    return v + tail;
}

Psi::Audit Psi::audit() {
    Audit a;
    a.psiAnchor = value(sStar_, omegaStar_);
    a.theta1 = theta1_;
    a.theta1se = theta1se_;
    a.eps = params_.eps;
    for (int j = 1; j <= params_.depth; ++j) a.deltas.push_back(delta(j));
    return a;
}

Psi build_psi(const Characteristics& chi, const Driver& driver,
              const std::function<double(const CadlagPath&)>& xi,
              double sStar, const CadlagPath& omegaStar, const PsiParams& params) {
    return Psi(chi, driver, xi, sStar, omegaStar, params);
}

std::vector<ComparisonRow> partial_comparison_check(
    const Characteristics& chi, const Driver& driver,
    const std::function<double(const CadlagPath&)>& xi, Psi& psi,
    const std::vector<TimePoint>& points, int n_paths, double h,
    std::uint64_t seed, double slack) {
    std::vector<ComparisonRow> rows;
    rows.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        ComparisonRow row;
        row.t = points[i].t;
        const ValueEstimate est =
            u0(chi, driver, xi, points[i].t, points[i].path, n_paths, h, seed + i);
        row.u0 = est.value;
        row.u0se = est.se;
        row.psi = psi.value(points[i].t, points[i].path);
        row.ok = row.u0 <= row.psi + 3.0 * est.se + slack;
        rows.push_back(row);
    }
    return rows;
}

} // namespace ppide
