#pragma once

#include "ppide/path.hpp"
#include "ppide/rng.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace ppide {

// One atom of the finite jump measure K = sum_i weight_i * delta_{z_i}.
struct JumpAtom {
    Eigen::VectorXd z;
    double weight = 0.0;
};

// Finite-activity jump measure given by weighted atoms.  The total mass is the
// jump intensity and meanJump() is the compensator integral of z K(dz).
struct JumpMeasure {
    std::vector<JumpAtom> atoms;

    double totalMass() const {
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight;
        return s;
    }
    Eigen::VectorXd meanJump(int dim) const {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
        for (const auto& a : atoms) m += a.weight * a.z;
        return m;
    }
};

// Differential characteristics (b, sigma, K) of the jump diffusion.  The
// drift and dispersion may look at the whole stopped path (path dependence);
// the jump measure is a fixed finite atom list, optionally re-mapped in a
// path-dependent way through `jumpMap`.
struct Characteristics {
    int dim = 1;
    double horizon = 1.0;
    std::function<Eigen::VectorXd(double, const CadlagPath&)> drift;
    std::function<Eigen::MatrixXd(double, const CadlagPath&)> dispersion;
    JumpMeasure jumps;
    // Optional mark-to-jump map delta(t, path, z); identity when absent.
    std::function<Eigen::VectorXd(double, const CadlagPath&, const Eigen::VectorXd&)> jumpMap;

    // Standing bounds: coefficient bound (>= 1), Lipschitz constant, and the
    // minimal jump radius (all jump sizes live in [minJumpSize, bound]).
    double bound = 1.0;
    double lipschitz = 1.0;
    double minJumpSize = 0.0;

    Eigen::VectorXd jumpSize(double t, const CadlagPath& w, const Eigen::VectorXd& z) const {
        return jumpMap ? jumpMap(t, w, z) : z;
    }
    Eigen::VectorXd compensator(double t, const CadlagPath& w) const {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
        for (const auto& a : jumps.atoms) m += a.weight * jumpSize(t, w, a.z);
        return m;
    }

    // Validate the standing assumptions, throwing InputError with the name of
    // the violated assumption.
    void validate() const;

    // Constant-coefficient helper used by the grid solvers.
    static Characteristics constant(double horizon, const Eigen::VectorXd& b,
                                    const Eigen::MatrixXd& sigma, JumpMeasure jumps,
                                    double bound = 1.0, double minJumpSize = 0.0);
};

// A jump realized on one simulated path.
struct JumpEvent {
    double time = 0.0;
    int atom = 0;             // index into Characteristics::jumps.atoms
    int step = 0;             // grid interval [u_k, u_{k+1}) containing the jump
    Eigen::VectorXd size;     // realized jump vector
};

// Output of the Euler scheme: paths share the uniform grid; jump times are
// kept exactly and inserted as extra knots in each path.  The per-step
// Brownian draws and jump events are retained for the backward solvers.
struct Ensemble {
    double start = 0.0;
    std::vector<double> grid;                 // start = u_0 < ... < u_m = horizon
    std::vector<CadlagPath> paths;            // one cadlag path per sample
    std::vector<Eigen::MatrixXd> normals;     // per path: (steps x dim) standard normals
    std::vector<std::vector<JumpEvent>> jumps;
    std::uint64_t seed = 0;

    int steps() const { return static_cast<int>(grid.size()) - 1; }
    int size() const { return static_cast<int>(paths.size()); }
    // Value of path p at grid node k.
    Eigen::VectorXd valueAt(int p, int k) const { return paths[p].value(grid[k]); }
    // Jumps of path p inside grid interval k, net of the compensator weight.
    // (Raw events; callers form compensated martingale increments themselves.)
};

// Euler scheme for the conditional law started at (s, prefix): the prefix is
// frozen on [0, s] and the jump diffusion is grown on [s, horizon] with step
// h, exact jump arrival times from the finite intensity, and the compensator
// folded into the drift.  Coefficients are frozen per step at the left node.
Ensemble simulate(const Characteristics& chi, double s, const CadlagPath& prefix,
                  int n_paths, double h, std::uint64_t seed);

// Hitting-time skeleton of `w` started at time t with threshold eps:
// H_0 = t, H_{j+1} = first knot time >= H_j at which |w - w(H_j)| >= eps
// (exact on the knot grid: segments are linear, so the norm peaks at knots).
// Returns the pairs (H_j, w(H_j)) for j >= 1, up to the horizon.
std::vector<std::pair<double, Eigen::VectorXd>>
hitting_skeleton(const CadlagPath& w, double t, double eps);

// Same, but measuring the first displacement from an explicit base point
// instead of w(t) (so H_1 = t when |w(t) - base| >= eps already).
std::vector<std::pair<double, Eigen::VectorXd>>
hitting_skeleton(const CadlagPath& w, double t, double eps, const Eigen::VectorXd& base);

// Flow ("restart") diagnostic: compares a direct Monte Carlo estimate of
// E_{s,omega}[phi] with the tower estimate that restarts the simulation at an
// intermediate time from each outer path.  Returns both estimates and a
// combined standard error.
struct RestartReport {
    double direct = 0.0;
    double nested = 0.0;
    double se = 0.0;
};
RestartReport restart_check(const Characteristics& chi, double s, const CadlagPath& prefix,
                            double t_mid, const std::function<double(const CadlagPath&)>& phi,
                            int n_outer, int n_inner, double h, std::uint64_t seed);

} // namespace ppide
