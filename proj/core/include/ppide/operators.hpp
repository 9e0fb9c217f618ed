#pragma once

#include "ppide/path.hpp"
#include "ppide/simulate.hpp"

#include <functional>

namespace ppide {

// Pathwise first/second order data of a non-anticipating functional u:
// value, time derivative, and the vertical (bump) derivatives.
struct FunctionalJet {
    std::function<double(double, const CadlagPath&)> u;
    std::function<double(double, const CadlagPath&)> dt;
    std::function<Eigen::VectorXd(double, const CadlagPath&)> dw;
    std::function<Eigen::MatrixXd(double, const CadlagPath&)> dww;
};

// Semilinear driver f(t, omega, y, z, p) with the jump weight eta(t, omega, z)
// that forms the nonlocal argument p.  `lipschitz` is the constant of the
// standing Lipschitz assumption; `monotoneInP` records monotonicity of f in p.
struct Driver {
    std::function<double(double, const CadlagPath&, double, const Eigen::VectorXd&, double)> f;
    std::function<double(double, const CadlagPath&, const Eigen::VectorXd&)> eta;
    double lipschitz = 1.0;
    bool monotoneInP = true;
};

// Second-order vertical increment u(t, omega + z 1_{[t,T]}) - u(t, omega)
// - z . du(t, omega).
double nabla2(const FunctionalJet& jet, double t, const CadlagPath& w,
              const Eigen::VectorXd& z);

// Nonlocal argument I u(t, omega) = sum_i weight_i eta(t, omega, z_i)
// [u(t, omega + z_i 1_{[t,T]}) - u(t, omega)].
double apply_I(const FunctionalJet& jet, const Characteristics& chi,
               const Driver& driver, double t, const CadlagPath& w);

// Linear part L u = -du/dt - b . du - 1/2 tr(c d2u) - sum_i weight_i
// nabla2 u(z_i) with c = sigma sigma^T.
double apply_L(const FunctionalJet& jet, const Characteristics& chi,
               double t, const CadlagPath& w);

// Full residual L u - f(t, omega, u, du, I u) of the semilinear equation.
double classical_residual(const FunctionalJet& jet, const Characteristics& chi,
                          const Driver& driver, double t, const CadlagPath& w);

// Monte Carlo check of the pathwise Ito identity: along simulated paths
// stopped at the first exit of a |.| >= radius ball (or the horizon),
// E[u(stop, X)] - u(s, omega) + E[int_s^stop L u dt] should vanish up to the
// discretization bias.  Returns the residual and its standard error.
struct ItoReport {
    double residual = 0.0;
    double se = 0.0;
};
ItoReport ito_residual(const FunctionalJet& jet, const Characteristics& chi,
                       double s, const CadlagPath& w, double radius,
                       int n_paths, double h, std::uint64_t seed);

} // namespace ppide
