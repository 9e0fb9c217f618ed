#include "ppide/simulate.hpp"

#include "ppide/errors.hpp"

#include <cmath>

namespace ppide {

void Characteristics::validate() const {
    if (dim < 1) throw InputError("Characteristics: dimension must be >= 1");
    if (horizon <= 0) throw InputError("Characteristics: horizon must be positive");
    if (bound < 1.0)
        throw InputError("Characteristics: bounded-coefficients assumption requires bound >= 1");
    if (!drift || !dispersion)
        throw InputError("Characteristics: drift and dispersion must be set");
    for (const auto& a : jumps.atoms) {
        if (a.weight <= 0)
            throw InputError("Characteristics: finite-activity assumption requires positive atom weights");
        if (static_cast<int>(a.z.size()) != dim)
            throw InputError("Characteristics: jump atom dimension mismatch");
        const double r = a.z.norm();
        if (r > bound + 1e-12)
            throw InputError("Characteristics: jump-size-window assumption violated (|z| > bound)");
        if (minJumpSize > 0 && r < minJumpSize - 1e-12)
            throw InputError("Characteristics: jump-size-window assumption violated (|z| < minimal size)");
    }
    // Spot-check boundedness of the coefficients at the flat zero path.
    const CadlagPath flat = CadlagPath::zero(horizon, dim);
    if (drift(0.0, flat).norm() > bound + 1e-9)
        throw InputError("Characteristics: bounded-coefficients assumption violated by the drift");
    if (dispersion(0.0, flat).norm() > bound + 1e-9)
        throw InputError("Characteristics: bounded-coefficients assumption violated by the dispersion");
}

Characteristics Characteristics::constant(double horizon, const Eigen::VectorXd& b,
                                          const Eigen::MatrixXd& sigma, JumpMeasure jumps,
                                          double bound, double minJumpSize) {
    Characteristics chi;
    chi.dim = static_cast<int>(b.size());
    chi.horizon = horizon;
    chi.drift = [b](double, const CadlagPath&) { return b; };
    chi.dispersion = [sigma](double, const CadlagPath&) { return sigma; };
    chi.jumps = std::move(jumps);
    chi.bound = bound;
    chi.minJumpSize = minJumpSize;
    return chi;
}

Ensemble simulate(const Characteristics& chi, double s, const CadlagPath& prefix,
                  int n_paths, double h, std::uint64_t seed) {
    chi.validate();
    if (prefix.dim() != chi.dim) throw InputError("simulate: prefix dimension mismatch");
    if (s < -kTimeTol || s > chi.horizon - kTimeTol)
        throw InputError("simulate: start time outside [0, horizon)");
    if (h <= 0) throw InputError("simulate: step size must be positive");
    if (n_paths < 1) throw InputError("simulate: need at least one path");

    const double T = chi.horizon;
    const int m = std::max(1, static_cast<int>(std::ceil((T - s) / h - 1e-9)));
    const double dt = (T - s) / m;

    Ensemble ens;
    ens.start = s;
    ens.seed = seed;
    ens.grid.resize(m + 1);
    for (int k = 0; k <= m; ++k) ens.grid[k] = s + dt * k;
    ens.grid[m] = T;

    const CounterRng rng(seed);
    const double lambda = chi.jumps.totalMass();
    const int natoms = static_cast<int>(chi.jumps.atoms.size());

    ens.paths.reserve(n_paths);
    ens.normals.reserve(n_paths);
    ens.jumps.resize(n_paths);

    const CadlagPath base = prefix.stopped(s);
    for (int p = 0; p < n_paths; ++p) {
        CadlagPath path = base;

        Eigen::MatrixXd xi(m, chi.dim);
        for (int k = 0; k < m; ++k)
            for (int i = 0; i < chi.dim; ++i)
                xi(k, i) = rng.normal(p, k, CounterRng::Gauss, i);

        // Exact jump arrival times from the finite intensity, with the atom
        // drawn from the normalized weights.
        std::vector<std::pair<double, int>> arrivals;
        if (lambda > 0) {
            double tau = s;
            for (std::uint64_t k = 0;; ++k) {
                tau += rng.exponential(p, 0, CounterRng::JumpTime, k, lambda);
                if (tau >= T - kTimeTol) break;
                const double u = rng.uniform(p, 0, CounterRng::JumpMark, k) * lambda;
                double acc = 0.0;
                int atom = natoms - 1;
                for (int i = 0; i < natoms; ++i) {
                    acc += chi.jumps.atoms[i].weight;
                    if (u <= acc) { atom = i; break; }
                }
                arrivals.emplace_back(tau, atom);
            }
        }

        std::size_t next = 0;
        for (int k = 0; k < m; ++k) {
            const double t0 = ens.grid[k], t1 = ens.grid[k + 1];
            const double hk = t1 - t0;
            // Coefficients frozen at the left node; compensator in the drift.
            const Eigen::VectorXd b = chi.drift(t0, path);
            const Eigen::MatrixXd sg = chi.dispersion(t0, path);
            const Eigen::VectorXd comp = chi.compensator(t0, path);
            const Eigen::VectorXd diffuse =
                (b - comp) * hk + sg * (std::sqrt(hk) * xi.row(k).transpose());

            const Eigen::VectorXd v0 = path.value(t0);
            Eigen::VectorXd jumped = Eigen::VectorXd::Zero(chi.dim);
            while (next < arrivals.size() && arrivals[next].first <= t1 - kTimeTol) {
                const double tau = arrivals[next].first;
                const int atom = arrivals[next].second;
                const Eigen::VectorXd size =
                    chi.jumpSize(t0, path, chi.jumps.atoms[atom].z);
                if (tau > t0 + kTimeTol) {
                    const Eigen::VectorXd vpre = v0 + diffuse * ((tau - t0) / hk) + jumped;
                    path.extendLinear(tau, vpre);
                }
                path.applyJumpAtEnd(size);
                jumped += size;
                ens.jumps[p].push_back({tau, atom, k, size});
                ++next;
            }
            path.extendLinear(t1, v0 + diffuse + jumped);
        }

        ens.paths.push_back(std::move(path));
        ens.normals.push_back(std::move(xi));
    }
    return ens;
}

std::vector<std::pair<double, Eigen::VectorXd>>
hitting_skeleton(const CadlagPath& w, double t, double eps, const Eigen::VectorXd& base) {
    if (eps <= 0) throw InputError("hitting_skeleton: threshold must be positive");
    std::vector<std::pair<double, Eigen::VectorXd>> out;
    Eigen::VectorXd anchor = base;
    // Scan knot times from t on; between knots every segment is linear or
    // constant, so |w - anchor| peaks at knots and the scan is exact.
    if ((w.value(t) - anchor).norm() >= eps) {
        anchor = w.value(t);
        out.emplace_back(t, anchor);
    }
    for (const auto& k : w.knots()) {
        if (k.t <= t + kTimeTol) continue;
        if ((k.v - anchor).norm() >= eps) {
            anchor = k.v;
            out.emplace_back(k.t, anchor);
        }
    }
    return out;
}

std::vector<std::pair<double, Eigen::VectorXd>>
hitting_skeleton(const CadlagPath& w, double t, double eps) {
    return hitting_skeleton(w, t, eps, w.value(t));
}

RestartReport restart_check(const Characteristics& chi, double s, const CadlagPath& prefix,
                            double t_mid, const std::function<double(const CadlagPath&)>& phi,
                            int n_outer, int n_inner, double h, std::uint64_t seed) {
    if (t_mid <= s || t_mid >= chi.horizon)
        throw InputError("restart_check: intermediate time must lie in (s, horizon)");

    RestartReport rep;

    // Direct estimate.
    const Ensemble direct = simulate(chi, s, prefix, n_outer * n_inner, h, seed);
    double sum = 0.0, sq = 0.0;
    for (const auto& w : direct.paths) {
        const double v = phi(w);
        sum += v;
        sq += v * v;
    }
    const int nd = direct.size();
    rep.direct = sum / nd;
    const double varDirect = std::max(0.0, sq / nd - rep.direct * rep.direct);

    // Tower estimate: restart the flow at t_mid from each outer path.
    const Ensemble outer = simulate(chi, s, prefix, n_outer, h, seed + 1);
    double osum = 0.0, osq = 0.0;
    for (int p = 0; p < outer.size(); ++p) {
        const CadlagPath mid = outer.paths[p].stopped(t_mid);
        const Ensemble inner =
            simulate(chi, t_mid, mid, n_inner, h, seed + 1000003ULL * (p + 2));
        double isum = 0.0;
        for (const auto& w : inner.paths) isum += phi(w);
        const double v = isum / inner.size();
        osum += v;
        osq += v * v;
    }
    rep.nested = osum / n_outer;
    const double varOuter = std::max(0.0, osq / n_outer - rep.nested * rep.nested);
    rep.se = std::sqrt(varDirect / nd + varOuter / n_outer);
    return rep;
}

} // namespace ppide
