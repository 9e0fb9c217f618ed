#include "ppide/bsde.hpp"

#include "ppide/errors.hpp"

#include <Eigen/QR>

#include <cmath>
#include <string>

namespace ppide {

namespace {

double defaultEta(double, const CadlagPath&, const Eigen::VectorXd& z) {
    return std::min(1.0, z.norm());
}

// All multi-indices with total degree between 1 and `degree` over `nf`
// variables (the intercept is handled separately).
void enumerateExponents(int nf, int degree, std::vector<int>& cur,
                        std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == nf) {
        int total = 0;
        for (int e : cur) total += e;
        if (total > 0) out.push_back(cur);
        return;
    }
    for (int e = 0; e <= degree; ++e) {
        cur.push_back(e);
        int total = 0;
        for (int x : cur) total += x;
        if (total <= degree) enumerateExponents(nf, degree, cur, out);
        cur.pop_back();
    }
}

// Per-step least-squares projection.  Features are standardized; constant
// features are absorbed into the intercept; a design that is still
// rank-deficient after that is reported as a solver error.
class StepRegression {
public:
    StepRegression(const Eigen::MatrixXd& rawFeatures, int degree, int stepIndex) {
        const int n = static_cast<int>(rawFeatures.rows());
        // Standardize and keep only features that actually vary.
        std::vector<Eigen::VectorXd> live;
        for (int f = 0; f < rawFeatures.cols(); ++f) {
            const Eigen::VectorXd col = rawFeatures.col(f);
            const double mean = col.mean();
            // Center first: the textbook E[X^2] - mean^2 form cancels
            // catastrophically and can turn an exactly-constant column into
            // numerical noise that poisons the design.
            const Eigen::VectorXd centered = col.array() - mean;
            const double sd = std::sqrt(centered.squaredNorm() / n);
            if (sd > 1e-9 * (1.0 + std::abs(mean))) live.push_back(centered / sd);
        }
        std::vector<std::vector<int>> expo;
        std::vector<int> cur;
        enumerateExponents(static_cast<int>(live.size()), degree, cur, expo);

        design_.resize(n, 1 + static_cast<int>(expo.size()));
        design_.col(0).setOnes();
        for (std::size_t j = 0; j < expo.size(); ++j) {
            Eigen::VectorXd col = Eigen::VectorXd::Ones(n);
            for (std::size_t f = 0; f < live.size(); ++f)
                for (int e = 0; e < expo[j][f]; ++e) col = col.cwiseProduct(live[f]);
            design_.col(1 + j) = col;
        }
        qr_.compute(design_);
        if (qr_.rank() < design_.cols())
            throw SolverError("solve_bsde: rank-deficient regression design at time step " +
                              std::to_string(stepIndex));
    }

    Eigen::VectorXd fit(const Eigen::VectorXd& target) const {
        return design_ * qr_.solve(target);
    }

    int basisSize() const { return static_cast<int>(design_.cols()); }

private:
    Eigen::MatrixXd design_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

// Raw regression features for every grid node, built in one forward sweep so
// that the running maximum and last-jump clocks cost O(m N) overall.
std::vector<Eigen::MatrixXd> buildFeatures(const Ensemble& ens, const RegressionBasis& basis) {
    const int n = ens.size();
    const int m = ens.steps();
    const int d = ens.paths.front().dim();
    const int extra = (basis.useRunningMax ? 1 : 0) + (basis.useLastJump ? 1 : 0);
    std::vector<Eigen::MatrixXd> out(m + 1, Eigen::MatrixXd(n, d + extra));
    for (int p = 0; p < n; ++p) {
        double rm = 0.0;
        double lj = ens.start;
        std::size_t next = 0;
        for (int k = 0; k <= m; ++k) {
            const Eigen::VectorXd x = ens.paths[p].value(ens.grid[k]);
            rm = std::max(rm, x.norm());
            while (next < ens.jumps[p].size() &&
                   ens.jumps[p][next].time <= ens.grid[k] + kTimeTol)
                lj = std::max(lj, ens.jumps[p][next++].time);
            out[k].block(p, 0, 1, d) = x.transpose();
            int c = d;
            if (basis.useRunningMax) out[k](p, c++) = rm;
            if (basis.useLastJump) out[k](p, c++) = lj;
        }
    }
    return out;
}

} // namespace

BsdeSolution solve_bsde(const Ensemble& ens, const Characteristics& chi,
                        const std::vector<double>& terminal, const PathDriver& driver,
                        const RegressionBasis& basis) {
    const int n = ens.size();
    const int m = ens.steps();
    const int d = chi.dim;
    const int natoms = static_cast<int>(chi.jumps.atoms.size());
    if (static_cast<int>(terminal.size()) != n)
        throw InputError("solve_bsde: terminal size mismatch");

    BsdeSolution sol;
    sol.grid = ens.grid;
    sol.y.resize(m + 1, n);
    sol.z.assign(m, Eigen::MatrixXd::Zero(n, d));
    sol.uAtoms.assign(m, Eigen::MatrixXd::Zero(n, std::max(1, natoms)));
    for (int p = 0; p < n; ++p) sol.y(m, p) = terminal[p];

    Eigen::VectorXd fsum = Eigen::VectorXd::Zero(n); // pathwise driver integral
    Eigen::MatrixXd counts(n, std::max(1, natoms));
    const std::vector<Eigen::MatrixXd> features = buildFeatures(ens, basis);

    for (int k = m - 1; k >= 0; --k) {
        const double t0 = ens.grid[k];
        const double hk = ens.grid[k + 1] - t0;
        const StepRegression reg(features[k], basis.degree, k);
        sol.basisSize = std::max(sol.basisSize, reg.basisSize());

        const Eigen::VectorXd ynext = sol.y.row(k + 1).transpose();
        const Eigen::VectorXd cont = reg.fit(ynext);

        // Z from the Brownian increment, one regression per component.
        for (int i = 0; i < d; ++i) {
            Eigen::VectorXd target(n);
            for (int p = 0; p < n; ++p)
                target(p) = ynext(p) * ens.normals[p](k, i) / std::sqrt(hk);
            sol.z[k].col(i) = reg.fit(target);
        }

        // Per-atom jump increments from the compensated counting martingales.
        if (natoms > 0) {
            counts.setZero();
            for (int p = 0; p < n; ++p)
                for (const auto& ev : ens.jumps[p])
                    if (ev.step == k) counts(p, ev.atom) += 1.0;
            for (int a = 0; a < natoms; ++a) {
                const double wa = chi.jumps.atoms[a].weight;
                Eigen::VectorXd target(n);
                for (int p = 0; p < n; ++p)
                    target(p) = ynext(p) * (counts(p, a) - wa * hk) / (wa * hk);
                sol.uAtoms[k].col(a) = reg.fit(target);
            }
        }

        for (int p = 0; p < n; ++p) {
            const double fv = driver(p, t0, cont(p), sol.z[k].row(p).transpose(),
                                     sol.uAtoms[k].row(p).transpose());
            sol.y(k, p) = cont(p) + hk * fv;
            fsum(p) += hk * fv;
        }
    }

    sol.rootValue = sol.y.row(0).mean();
    double sq = 0.0, sum = 0.0;
    for (int p = 0; p < n; ++p) {
        const double v = terminal[p] + fsum(p);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    sol.rootSe = std::sqrt(std::max(0.0, sq / n - mean * mean) / n);
    return sol;
}

BsdeSolution solve_bsde(const Ensemble& ens, const Characteristics& chi,
                        const std::function<double(const CadlagPath&)>& xi,
                        const Driver& driver, const RegressionBasis& basis) {
    std::vector<double> terminal(ens.size());
    for (int p = 0; p < ens.size(); ++p) terminal[p] = xi(ens.paths[p]);
    auto eta = driver.eta ? driver.eta : defaultEta;
    PathDriver pd = [&ens, &chi, &driver, eta](int p, double t, double y,
                                               const Eigen::VectorXd& z,
                                               const Eigen::VectorXd& uAtoms) {
        const CadlagPath& w = ens.paths[p];
        double pv = 0.0;
        for (std::size_t a = 0; a < chi.jumps.atoms.size(); ++a) {
            const Eigen::VectorXd zz = chi.jumpSize(t, w, chi.jumps.atoms[a].z);
            pv += chi.jumps.atoms[a].weight * eta(t, w, zz) * uAtoms(a);
        }
        return driver.f(t, w, y, z, pv);
    };
    return solve_bsde(ens, chi, terminal, pd, basis);
}

ValueEstimate u0(const Characteristics& chi, const Driver& driver,
                 const std::function<double(const CadlagPath&)>& xi,
                 double t, const CadlagPath& w, int n_paths, double h,
                 std::uint64_t seed, const RegressionBasis& basis) {
    const Ensemble ens = simulate(chi, t, w.stopped(t), n_paths, h, seed);
    const BsdeSolution sol = solve_bsde(ens, chi, xi, driver, basis);
    return {sol.rootValue, sol.rootSe};
}

ValueEstimate nonlinear_expectation(
    const Characteristics& chi, double L, double s, const CadlagPath& w,
    const StoppingRule& tau, const std::function<double(const CadlagPath&)>& xi,
    bool upper, int n_paths, double h, std::uint64_t seed,
    const RegressionBasis& basis,
    const std::function<double(double, const CadlagPath&, const Eigen::VectorXd&)>& eta) {
    if (L < 0) throw InputError("nonlinear_expectation: penalty level must be >= 0");
    const Ensemble ens = simulate(chi, s, w.stopped(s), n_paths, h, seed);

    std::vector<double> stopAt(ens.size(), chi.horizon);
    if (tau)
        for (int p = 0; p < ens.size(); ++p) stopAt[p] = tau(ens.paths[p]);

    std::vector<double> terminal(ens.size());
    for (int p = 0; p < ens.size(); ++p) terminal[p] = xi(ens.paths[p]);

    auto etaFn = eta ? eta : defaultEta;
    const double sgn = upper ? 1.0 : -1.0;
    PathDriver pd = [&](int p, double t, double, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& uAtoms) {
        if (t >= stopAt[p] - kTimeTol) return 0.0;
        const CadlagPath& path = ens.paths[p];
        // z is the loading on the driving Brownian motion (the dispersion is
        // already inside it), so the Girsanov envelope is L |z|_1 directly.
        double acc = z.lpNorm<1>();
        for (std::size_t a = 0; a < chi.jumps.atoms.size(); ++a) {
            const Eigen::VectorXd zz = chi.jumpSize(t, path, chi.jumps.atoms[a].z);
            const double u = uAtoms(a);
            acc += chi.jumps.atoms[a].weight * etaFn(t, path, zz) *
                   (upper ? std::max(u, 0.0) : std::max(-u, 0.0));
        }
        return sgn * L * acc;
    };
    const BsdeSolution sol = solve_bsde(ens, chi, terminal, pd, basis);
    return {sol.rootValue, sol.rootSe};
}

ValueEstimate gamma_expectation(const Characteristics& chi, const ControlPair& ctrl,
                                double s, const CadlagPath& w,
                                const std::function<double(const CadlagPath&)>& xi,
                                int n_paths, double h, std::uint64_t seed) {
    const Ensemble ens = simulate(chi, s, w.stopped(s), n_paths, h, seed);
    double sum = 0.0, sq = 0.0;
    for (int p = 0; p < ens.size(); ++p) {
        const CadlagPath& path = ens.paths[p];
        double gamma = 1.0;
        std::size_t next = 0;
        for (int k = 0; k < ens.steps(); ++k) {
            const double t0 = ens.grid[k];
            const double hk = ens.grid[k + 1] - t0;
            const Eigen::MatrixXd sg = chi.dispersion(t0, path);
            const Eigen::VectorXd H = ctrl.H ? ctrl.H(t0, path)
                                             : Eigen::VectorXd::Zero(chi.dim);
            double wsum = 0.0;
            for (const auto& atom : chi.jumps.atoms)
                wsum += atom.weight *
                        (ctrl.W ? ctrl.W(t0, path, chi.jumpSize(t0, path, atom.z)) : 0.0);
            const Eigen::VectorXd dxc =
                sg * (std::sqrt(hk) * ens.normals[p].row(k).transpose());
            double factor = 1.0 + H.dot(dxc) - hk * wsum;
            while (next < ens.jumps[p].size() && ens.jumps[p][next].step == k) {
                factor *= 1.0 + (ctrl.W ? ctrl.W(t0, path, ens.jumps[p][next].size) : 0.0);
                ++next;
            }
            if (factor <= 0.0)
                throw SolverError("gamma_expectation: change-of-measure weight became "
                                  "non-positive at time step " + std::to_string(k) +
                                  " (reduce the step size or the control load)");
            gamma *= factor;
        }
        const double v = gamma * xi(path);
        sum += v;
        sq += v * v;
    }
    const int n = ens.size();
    const double mean = sum / n;
    return {mean, std::sqrt(std::max(0.0, sq / n - mean * mean) / n)};
}

RbsdeSolution solve_rbsde(
    const Ensemble& ens, const Characteristics& chi,
    const std::function<double(double, const CadlagPath&)>& barrier, double L,
    const RegressionBasis& basis,
    const std::function<double(double, const CadlagPath&, const Eigen::VectorXd&)>& eta,
    const StoppingRule& horizonStop) {
    const int n = ens.size();
    const int m = ens.steps();
    const int d = chi.dim;
    const int natoms = static_cast<int>(chi.jumps.atoms.size());
    auto etaFn = eta ? eta : defaultEta;

    std::vector<double> stopAt(n, chi.horizon);
    if (horizonStop)
        for (int p = 0; p < n; ++p) stopAt[p] = horizonStop(ens.paths[p]);

    RbsdeSolution sol;
    sol.grid = ens.grid;
    sol.y.resize(m + 1, n);
    sol.kbar = Eigen::MatrixXd::Zero(m + 1, n);
    Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(m, n);

    for (int p = 0; p < n; ++p)
        sol.y(m, p) = barrier(std::min(chi.horizon, stopAt[p]), ens.paths[p]);

    Eigen::VectorXd fsum = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd counts(n, std::max(1, natoms));
    const std::vector<Eigen::MatrixXd> features = buildFeatures(ens, basis);

    for (int k = m - 1; k >= 0; --k) {
        const double t0 = ens.grid[k];
        const double hk = ens.grid[k + 1] - t0;
        const StepRegression reg(features[k], basis.degree, k);
        const Eigen::VectorXd ynext = sol.y.row(k + 1).transpose();
        const Eigen::VectorXd cont = reg.fit(ynext);

        Eigen::MatrixXd zk(n, d);
        for (int i = 0; i < d; ++i) {
            Eigen::VectorXd target(n);
            for (int p = 0; p < n; ++p)
                target(p) = ynext(p) * ens.normals[p](k, i) / std::sqrt(hk);
            zk.col(i) = reg.fit(target);
        }
        Eigen::MatrixXd uk = Eigen::MatrixXd::Zero(n, std::max(1, natoms));
        if (natoms > 0) {
            counts.setZero();
            for (int p = 0; p < n; ++p)
                for (const auto& ev : ens.jumps[p])
                    if (ev.step == k) counts(p, ev.atom) += 1.0;
            for (int a = 0; a < natoms; ++a) {
                const double wa = chi.jumps.atoms[a].weight;
                Eigen::VectorXd target(n);
                for (int p = 0; p < n; ++p)
                    target(p) = ynext(p) * (counts(p, a) - wa * hk) / (wa * hk);
                uk.col(a) = reg.fit(target);
            }
        }

        for (int p = 0; p < n; ++p) {
            const CadlagPath& path = ens.paths[p];
            if (t0 >= stopAt[p] - kTimeTol) {
                sol.y(k, p) = barrier(stopAt[p], path);
                continue;
            }
            double fv = zk.row(p).lpNorm<1>();
            for (int a = 0; a < natoms; ++a) {
                const Eigen::VectorXd zz = chi.jumpSize(t0, path, chi.jumps.atoms[a].z);
                fv += chi.jumps.atoms[a].weight * etaFn(t0, path, zz) *
                      std::max(uk(p, a), 0.0);
            }
            fv *= L;
            const double candidate = cont(p) + hk * fv;
            const double rk = barrier(t0, path);
            sol.y(k, p) = std::max(candidate, rk);
            dk(k, p) = std::max(rk - candidate, 0.0);
            fsum(p) += hk * fv + dk(k, p);
        }
    }

    // Forward accumulation of the reflection and the touch times.
    sol.tauStar.assign(n, chi.horizon);
    for (int p = 0; p < n; ++p) {
        bool touched = false;
        for (int k = 0; k <= m; ++k) {
            if (k > 0) sol.kbar(k, p) = sol.kbar(k - 1, p) + dk(k - 1, p);
            const double t = ens.grid[k];
            const double rk = barrier(std::min(t, stopAt[p]), ens.paths[p]);
            if (!touched && sol.y(k, p) - rk <= 1e-9 * (1.0 + std::abs(rk))) {
                sol.tauStar[p] = std::min(t, stopAt[p]);
                touched = true;
            }
        }
        if (!touched) sol.tauStar[p] = std::min(chi.horizon, stopAt[p]);
    }

    sol.rootValue = sol.y.row(0).mean();
    double sum = 0.0, sq = 0.0;
    for (int p = 0; p < n; ++p) {
        const double v = sol.y(m, p) + fsum(p);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    sol.rootSe = std::sqrt(std::max(0.0, sq / n - mean * mean) / n);
    return sol;
}

IbpReport ibp_check(const Characteristics& chi, const SemimartingaleSpec& s1,
                    const SemimartingaleSpec& s2, double s, const CadlagPath& w,
                    int n_paths, double h, std::uint64_t seed) {
    const Ensemble ens = simulate(chi, s, w.stopped(s), n_paths, h, seed);
    double lsum = 0.0, lsq = 0.0, rsum = 0.0;
    for (int p = 0; p < ens.size(); ++p) {
        const CadlagPath& path = ens.paths[p];
        double a = s1.s0, b = s2.s0;
        double drift = 0.0;
        std::size_t next = 0;
        for (int k = 0; k < ens.steps(); ++k) {
            const double t0 = ens.grid[k];
            const double hk = ens.grid[k + 1] - t0;
            const Eigen::MatrixXd sg = chi.dispersion(t0, path);
            const Eigen::MatrixXd c = sg * sg.transpose();
            const Eigen::VectorXd h1 = s1.H ? s1.H(t0, path) : Eigen::VectorXd::Zero(chi.dim);
            const Eigen::VectorXd h2 = s2.H ? s2.H(t0, path) : Eigen::VectorXd::Zero(chi.dim);
            const double b1 = s1.beta ? s1.beta(t0, path) : 0.0;
            const double b2 = s2.beta ? s2.beta(t0, path) : 0.0;

            double crossJump = 0.0, w1c = 0.0, w2c = 0.0;
            for (const auto& atom : chi.jumps.atoms) {
                const Eigen::VectorXd zz = chi.jumpSize(t0, path, atom.z);
                const double w1 = s1.W ? s1.W(t0, path, zz) : 0.0;
                const double w2 = s2.W ? s2.W(t0, path, zz) : 0.0;
                crossJump += atom.weight * w1 * w2;
                w1c += atom.weight * w1;
                w2c += atom.weight * w2;
            }
            drift += hk * (b * b1 + a * b2 + h1.dot(c * h2) + crossJump);

            const Eigen::VectorXd dxc = sg * (std::sqrt(hk) * ens.normals[p].row(k).transpose());
            double da = b1 * hk + h1.dot(dxc) - hk * w1c;
            double db = b2 * hk + h2.dot(dxc) - hk * w2c;
            while (next < ens.jumps[p].size() && ens.jumps[p][next].step == k) {
                const Eigen::VectorXd& zz = ens.jumps[p][next].size;
                da += s1.W ? s1.W(t0, path, zz) : 0.0;
                db += s2.W ? s2.W(t0, path, zz) : 0.0;
                ++next;
            }
            a += da;
            b += db;
        }
        const double prod = a * b;
        lsum += prod;
        lsq += prod * prod;
        rsum += drift;
    }
    const int n = ens.size();
    IbpReport rep;
    rep.lhs = lsum / n;
    rep.rhs = s1.s0 * s2.s0 + rsum / n;
    rep.se = std::sqrt(std::max(0.0, lsq / n - rep.lhs * rep.lhs) / n);
    return rep;
}

} // namespace ppide
