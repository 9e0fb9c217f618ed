#include <doctest.h>

#include "ppide/errors.hpp"
#include "ppide/pathfrozen.hpp"

#include <cmath>

using namespace ppide;

namespace {

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

Characteristics levyFixture(double horizon = 1.0) {
    JumpMeasure jumps;
    jumps.atoms.push_back({vec1(0.4), 0.7});
    jumps.atoms.push_back({vec1(-0.3), 0.5});
    return Characteristics::constant(horizon, vec1(0.1),
                                     Eigen::MatrixXd::Constant(1, 1, 0.2), jumps,
                                     1.0, 0.3);
}

double levyExponent(const Characteristics& chi, double lambda) {
    const double b = 0.1, sigma = 0.2;
    double m1 = 0.0, jumpPart = 0.0;
    for (const auto& a : chi.jumps.atoms) {
        m1 += a.weight * a.z(0);
        jumpPart += a.weight * (std::exp(lambda * a.z(0)) - 1.0);
    }
    return (b - m1) * lambda + 0.5 * sigma * sigma * lambda * lambda + jumpPart;
}

Driver zeroDriver() {
    Driver d;
    d.f = [](double, const CadlagPath&, double, const Eigen::VectorXd&, double) {
        return 0.0;
    };
    d.lipschitz = 0.0;
    return d;
}

} // namespace

TEST_CASE("frozen data path stitches the anchor, the levels and the terminal") {
    FrozenSkeleton skel;
    skel.anchorTime = 0.4;
    skel.anchorPath = CadlagPath::step(1.0, {0.0, 0.2}, {0.0, 1.0});
    skel.pairs = {{0.4, vec1(1.5)}, {0.7, vec1(2.0)}};
    const CadlagPath w = frozen_data(skel, {}, vec1(3.0));
    CHECK(w.valueScalar(0.1) == 0.0);
    CHECK(w.valueScalar(0.3) == 1.0);
    CHECK(w.valueScalar(0.5) == 1.5);
    CHECK(w.valueScalar(0.8) == 2.0);
    CHECK(w.valueScalar(1.0) == 3.0);
    CHECK(w.leftLimit(1.0)(0) == 2.0);
}

TEST_CASE("Bernstein fit is exact on constants and affine data") {
    const Box2 box{0.0, 1.0, -1.0, 1.0};
    const auto affine = [](double t, double x) { return 2.0 - 0.5 * t + 3.0 * x; };
    const BernsteinFit fit = bernstein_fit(affine, box, 3, 4);
    for (double t : {0.0, 0.37, 1.0})
        for (double x : {-1.0, -0.2, 0.8})
            CHECK(fit(t, x) == doctest::Approx(affine(t, x)).epsilon(1e-12));
}

TEST_CASE("Bernstein error on the square is the classical 1/(4n)") {
    const Box2 box{0.0, 1.0, 0.0, 1.0};
    const auto sq = [](double, double x) { return x * x; };
    for (int n : {4, 8, 16}) {
        const BernsteinFit fit = bernstein_fit(sq, box, 1, n);
        // The midpoint error of the one-dimensional operator is x(1-x)/n.
        CHECK(fit(0.5, 0.5) - 0.25 == doctest::Approx(0.25 / n).epsilon(1e-9));
    }
}

TEST_CASE("an unreachable tolerance raises ApproximationError with the achieved error") {
    const Box2 box{0.0, 1.0, 0.0, 1.0};
    const auto sq = [](double, double x) { return x * x; };
    try {
        bernstein_fit(sq, box, 1, 4, /*requested=*/1e-6);
        FAIL("expected ApproximationError");
    } catch (const ApproximationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("achieved") != std::string::npos);
    }
    // A requested tolerance above 1/(4n) succeeds and records the audit.
    const BernsteinFit ok = bernstein_fit(sq, box, 1, 4, 0.08);
    CHECK(ok.certifiedError() <= 0.08);
    CHECK(ok.certifiedError() > 0.0);
}

TEST_CASE("localized grid solve reproduces the exponential closed form") {
    const Characteristics chi = levyFixture();
    const double lambda = 0.5, alpha = 0.3, T = 1.0;
    const double kap = levyExponent(chi, lambda);
    const auto exact = [=](double t, double x) {
        return std::exp(alpha * (T - t)) * std::exp(lambda * x + (T - t) * kap);
    };

    CylinderGrid grid;
    grid.center = 0.0;
    grid.eps = 0.5;
    grid.t0 = 0.5;
    grid.t1 = T;
    grid.nx = 64;
    grid.nt = 64;
    const auto etaBar = [](double z) { return std::min(1.0, std::abs(z)); };
    const LocalDriver fhat = [alpha](double, double, double w, double, double) {
        return alpha * w;
    };
    const GridSolution sol = solve_frozen_pide(chi, etaBar, fhat, exact, grid);
    for (double t : {0.55, 0.75, 0.95})
        for (double x : {-0.3, 0.0, 0.25})
            CHECK(std::abs(sol.eval(t, x) - exact(t, x)) <= 0.02);
}

TEST_CASE("skeleton value at the horizon is the frozen terminal datum") {
    const Characteristics chi = levyFixture();
    const auto xi = [](const CadlagPath& w) { return w.valueScalar(w.horizon()); };
    FrozenSkeleton skel;
    skel.anchorTime = 0.0;
    skel.anchorPath = CadlagPath::zero(1.0, 1);
    skel.pairs = {{0.0, vec1(0.0)}};
    ThetaParams params;
    params.eps = 0.2;
    params.n_paths = 100;
    const ValueEstimate v = theta(chi, zeroDriver(), xi, skel, 1.0, vec1(2.0), params);
    CHECK(v.value == doctest::Approx(2.0));
    CHECK(v.se == doctest::Approx(0.0));
}

TEST_CASE("dynamic programming identity holds exactly under a shared seed") {
    const Characteristics chi = levyFixture();
    const auto xi = [](const CadlagPath& w) { return w.valueScalar(w.horizon()); };
    Driver drv;
    drv.f = [](double, const CadlagPath& w, double y, const Eigen::VectorXd&, double) {
        return 0.25 * y;
    };
    drv.eta = [](double, const CadlagPath&, const Eigen::VectorXd& z) {
        return std::min(1.0, z.norm());
    };

    FrozenSkeleton s1;
    s1.anchorTime = 0.0;
    s1.anchorPath = CadlagPath::zero(1.0, 1);
    s1.pairs = {{0.0, vec1(0.0)}};
    ThetaParams params;
    params.eps = 0.2;
    params.n_paths = 800;
    params.h = 1.0 / 64.0;
    params.seed = 12345;

    const double t = 0.3;
    for (double dx : {0.25, -0.3, 0.5}) { // all displacements leave the eps-ball
        const Eigen::VectorXd x = vec1(dx);
        const FrozenSkeleton s2 = s1.extended(t, x);
        const double lhs = theta(chi, drv, xi, s1, t, x, params).value;
        const double rhs = theta(chi, drv, xi, s2, t, x, params).value;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("constant data pins the patched approximation at the anchor") {
    const Characteristics chi = levyFixture();
    const double c = 1.3;
    const auto xi = [c](const CadlagPath&) { return c; };
    PsiParams params;
    params.eps = 0.2;
    params.depth = 2;
    params.degT = 1;
    params.degX = 2;
    params.nx = 16;
    params.nt = 16;
    params.mc.n_paths = 200;
    params.mc.h = 1.0 / 32.0;
    Psi psi = build_psi(chi, zeroDriver(), xi, 0.2, CadlagPath::zero(1.0, 1), params);

    const Psi::Audit audit = psi.audit();
    CHECK(audit.theta1 == doctest::Approx(c).epsilon(1e-12));
    CHECK(audit.psiAnchor == doctest::Approx(c + 0.75 * params.eps).epsilon(1e-9));
    // Strict sandwich with the designed margins eps/4 and 3 eps/4.
    CHECK(audit.psiAnchor > audit.theta1);
    CHECK(audit.psiAnchor < audit.theta1 + params.eps);

    // Off-anchor evaluation keeps the value inside the same constant band.
    const double off = psi.value(0.5, CadlagPath::zero(1.0, 1));
    CHECK(off >= c);
    CHECK(off <= c + params.eps);
}

TEST_CASE("invalid patch parameters are rejected") {
    const Characteristics chi = levyFixture(); // minimal jump size 0.3
    const auto xi = [](const CadlagPath&) { return 0.0; };
    PsiParams bad;
    bad.eps = -0.1;
    CHECK_THROWS_AS(build_psi(chi, zeroDriver(), xi, 0.0, CadlagPath::zero(1.0, 1), bad),
                    InputError);
    PsiParams wide;
    wide.eps = 0.4; // must stay below the minimal jump size
    CHECK_THROWS_AS(build_psi(chi, zeroDriver(), xi, 0.0, CadlagPath::zero(1.0, 1), wide),
                    InputError);
}

TEST_CASE("exceeding the recorded depth is a solver failure") {
    const Characteristics chi = levyFixture();
    const auto xi = [](const CadlagPath&) { return 0.0; };
    PsiParams params;
    params.eps = 0.2;
    params.depth = 1;
    params.degT = 1;
    params.degX = 1;
    params.nx = 8;
    params.nt = 8;
    params.mc.n_paths = 100;
    params.mc.h = 1.0 / 16.0;
    Psi psi = build_psi(chi, zeroDriver(), xi, 0.0, CadlagPath::zero(1.0, 1), params);

    CadlagPath wild = CadlagPath::step(1.0, {0.0, 0.2, 0.4}, {0.0, 0.5, 1.0});
    CHECK_THROWS_AS(psi.value(0.6, wild), SolverError);
}

TEST_CASE("backward Monte Carlo value stays below the patched approximation") {
    const Characteristics chi = levyFixture();
    const auto xi = [](const CadlagPath& w) { return w.valueScalar(w.horizon()); };
    PsiParams params;
    params.eps = 0.2;
    params.depth = 2;
    params.degT = 1;
    params.degX = 2;
    params.nx = 24;
    params.nt = 24;
    params.mc.n_paths = 1500;
    params.mc.h = 1.0 / 64.0;
    params.mc.seed = 5;
    Psi psi = build_psi(chi, zeroDriver(), xi, 0.25, CadlagPath::zero(1.0, 1), params);

    const std::vector<TimePoint> probes = {{0.25, CadlagPath::zero(1.0, 1)}};
    const auto rows = partial_comparison_check(chi, zeroDriver(), xi, psi, probes, 4000,
                                               1.0 / 64.0, 901, 0.05);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].ok);
    CHECK(rows[0].psi >= rows[0].u0 - 3.0 * rows[0].u0se - 0.05);
}
