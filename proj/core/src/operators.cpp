#include "ppide/operators.hpp"

#include "ppide/errors.hpp"

#include <cmath>

namespace ppide {

double nabla2(const FunctionalJet& jet, double t, const CadlagPath& w,
              const Eigen::VectorXd& z) {
    const CadlagPath bumped = w.bumped(t, z);
    return jet.u(t, bumped) - jet.u(t, w) - z.dot(jet.dw(t, w));
}

double apply_I(const FunctionalJet& jet, const Characteristics& chi,
               const Driver& driver, double t, const CadlagPath& w) {
    double acc = 0.0;
    const double base = jet.u(t, w);
    for (const auto& atom : chi.jumps.atoms) {
        const Eigen::VectorXd z = chi.jumpSize(t, w, atom.z);
        acc += atom.weight * driver.eta(t, w, z) * (jet.u(t, w.bumped(t, z)) - base);
    }
    return acc;
}

double apply_L(const FunctionalJet& jet, const Characteristics& chi,
               double t, const CadlagPath& w) {
    const Eigen::VectorXd b = chi.drift(t, w);
    const Eigen::MatrixXd sg = chi.dispersion(t, w);
    const Eigen::MatrixXd c = sg * sg.transpose();
    double acc = -jet.dt(t, w) - b.dot(jet.dw(t, w)) -
                 0.5 * c.cwiseProduct(jet.dww(t, w)).sum();
    for (const auto& atom : chi.jumps.atoms) {
        const Eigen::VectorXd z = chi.jumpSize(t, w, atom.z);
        acc -= atom.weight * nabla2(jet, t, w, z);
    }
    return acc;
}

double classical_residual(const FunctionalJet& jet, const Characteristics& chi,
                          const Driver& driver, double t, const CadlagPath& w) {
    return apply_L(jet, chi, t, w) -
           driver.f(t, w, jet.u(t, w), jet.dw(t, w),
                    apply_I(jet, chi, driver, t, w));
}

ItoReport ito_residual(const FunctionalJet& jet, const Characteristics& chi,
                       double s, const CadlagPath& w, double radius,
                       int n_paths, double h, std::uint64_t seed) {
    const Ensemble ens = simulate(chi, s, w, n_paths, h, seed);
    const double u0 = jet.u(s, w.stopped(s));

    double sum = 0.0, sq = 0.0;
    for (int p = 0; p < ens.size(); ++p) {
        const CadlagPath& x = ens.paths[p];
        // First exit of the |X - X_s| >= radius ball, capped at the horizon.
        double stop = chi.horizon;
        const auto hits = hitting_skeleton(x, s, radius);
        if (!hits.empty()) stop = std::min(stop, hits.front().first);

        // u at the stopping point plus the time integral of L u up to it,
        // with the generator frozen at the left grid node of each step.
        double acc = jet.u(stop, x.stopped(stop)) - u0;
        for (int k = 0; k < ens.steps(); ++k) {
            const double t0 = ens.grid[k];
            if (t0 >= stop - kTimeTol) break;
            const double dt = std::min(ens.grid[k + 1], stop) - t0;
            acc += apply_L(jet, chi, t0, x.stopped(t0)) * dt;
        }
        sum += acc;
        sq += acc * acc;
    }
    ItoReport rep;
    rep.residual = sum / ens.size();
    const double var = std::max(0.0, sq / ens.size() - rep.residual * rep.residual);
    rep.se = std::sqrt(var / ens.size());
    return rep;
}

} // namespace ppide
