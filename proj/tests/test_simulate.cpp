#include <doctest.h>

#include "ppide/errors.hpp"
#include "ppide/simulate.hpp"

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
                                     /*bound=*/1.0, /*minJumpSize=*/0.3);
}

} // namespace

TEST_CASE("terminal moments match the constant-coefficient closed forms") {
    const Characteristics chi = levyFixture();
    const int n = 20000;
    const Ensemble ens = simulate(chi, 0.0, CadlagPath::zero(1.0, 1), n, 1.0 / 128.0, 42);

    double mean = 0.0, sq = 0.0;
    for (int p = 0; p < n; ++p) {
        const double x = ens.paths[p].valueScalar(1.0);
        mean += x;
        sq += x * x;
    }
    mean /= n;
    const double var = sq / n - mean * mean;

    // The compensator is folded into the drift, so E X_T = b T and
    // Var X_T = (sigma^2 + sum_i w_i z_i^2) T.
    const double trueMean = 0.1;
    const double trueVar = 0.2 * 0.2 + 0.7 * 0.4 * 0.4 + 0.5 * 0.3 * 0.3;
    const double seMean = std::sqrt(trueVar / n);
    CHECK(std::abs(mean - trueMean) <= 3.0 * seMean);
    CHECK(std::abs(var - trueVar) <= 0.05 * trueVar);
}

TEST_CASE("jump counts and sizes respect the measure") {
    const Characteristics chi = levyFixture();
    const int n = 5000;
    const Ensemble ens = simulate(chi, 0.0, CadlagPath::zero(1.0, 1), n, 1.0 / 64.0, 7);

    double count = 0.0;
    for (int p = 0; p < n; ++p) {
        for (const auto& ev : ens.jumps[p]) {
            count += 1.0;
            const double sz = ev.size.norm();
            CHECK(sz >= chi.minJumpSize - 1e-12);
            CHECK(sz <= chi.bound + 1e-12);
            CHECK(ev.time >= 0.0);
            CHECK(ev.time <= 1.0);
        }
    }
    const double intensity = chi.jumps.totalMass(); // 1.2
    const double meanJumps = count / n;
    CHECK(std::abs(meanJumps - intensity) <= 3.0 * std::sqrt(intensity / n));
}

TEST_CASE("realized jump times appear as knots of the sampled paths") {
    const Characteristics chi = levyFixture();
    const Ensemble ens = simulate(chi, 0.0, CadlagPath::zero(1.0, 1), 50, 1.0 / 32.0, 11);
    for (int p = 0; p < ens.size(); ++p) {
        const auto jt = ens.paths[p].jumpTimes();
        REQUIRE(jt.size() == ens.jumps[p].size());
        for (std::size_t k = 0; k < jt.size(); ++k)
            CHECK(jt[k] == doctest::Approx(ens.jumps[p][k].time).epsilon(1e-12));
    }
}

TEST_CASE("the conditional law keeps the prefix frozen") {
    const Characteristics chi = levyFixture();
    CadlagPath prefix(1.0, vec1(2.0));
    prefix.extendLinear(0.3, vec1(1.5));
    const Ensemble ens = simulate(chi, 0.5, prefix.stopped(0.5), 200, 1.0 / 64.0, 3);
    for (int p = 0; p < ens.size(); ++p) {
        CHECK(ens.paths[p].valueScalar(0.1) == doctest::Approx(prefix.valueScalar(0.1)));
        CHECK(ens.paths[p].valueScalar(0.3) == doctest::Approx(1.5));
        CHECK(ens.paths[p].valueScalar(0.5) == doctest::Approx(1.5));
    }
    CHECK(ens.grid.front() == doctest::Approx(0.5));
    CHECK(ens.grid.back() == doctest::Approx(1.0));
}

TEST_CASE("simulation is bit-reproducible for a fixed seed") {
    const Characteristics chi = levyFixture();
    const Ensemble a = simulate(chi, 0.0, CadlagPath::zero(1.0, 1), 64, 1.0 / 64.0, 99);
    const Ensemble b = simulate(chi, 0.0, CadlagPath::zero(1.0, 1), 64, 1.0 / 64.0, 99);
    for (int p = 0; p < a.size(); ++p)
        CHECK(a.paths[p].toJson() == b.paths[p].toJson());
    const Ensemble c = simulate(chi, 0.0, CadlagPath::zero(1.0, 1), 64, 1.0 / 64.0, 100);
    bool allSame = true;
    for (int p = 0; p < a.size(); ++p)
        allSame = allSame && (a.paths[p].toJson() == c.paths[p].toJson());
    CHECK_FALSE(allSame);
}

TEST_CASE("hitting skeleton is exact on a handcrafted path") {
    CadlagPath w(1.0, vec1(0.0));
    w.extendLinear(0.4, vec1(0.5));   // crosses 0.25 at t = 0.2
    w.applyJumpAtEnd(vec1(0.5));      // jumps to 1.0 at t = 0.4
    w.extendConstantTo(1.0);

    // Detection is on the knot grid: the ramp crosses 0.25 in the interior of
    // its segment, but the first knot at which the displacement is visible is
    // t = 0.4 (already past the jump, so the recorded level is 1.0 and no
    // further quarter-excursion ever happens).
    const auto hits = hitting_skeleton(w, 0.0, 0.25);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].first == doctest::Approx(0.4));
    CHECK(hits[0].second(0) == doctest::Approx(1.0));

    // With an explicit displaced base the very first time qualifies.
    const auto hits2 = hitting_skeleton(w, 0.5, 0.25, vec1(0.0));
    REQUIRE(hits2.size() >= 1);
    CHECK(hits2[0].first == doctest::Approx(0.5));
}

TEST_CASE("tower-property restart diagnostic closes") {
    const Characteristics chi = levyFixture();
    const auto phi = [](const CadlagPath& w) { return w.valueScalar(1.0); };
    const RestartReport rep = restart_check(chi, 0.0, CadlagPath::zero(1.0, 1), 0.5, phi,
                                            200, 50, 1.0 / 64.0, 17);
    CHECK(std::abs(rep.direct - rep.nested) <= 3.0 * rep.se + 1e-6);
}

TEST_CASE("standing assumptions are validated by name") {
    Characteristics chi = levyFixture();
    chi.bound = 0.5; // atoms of size up to 0.4 are fine, but bound < 1 is not
    CHECK_THROWS_WITH_AS(chi.validate(),
                         doctest::Contains("bounded-coefficients assumption"),
                         InputError);

    Characteristics big = levyFixture();
    big.jumps.atoms.push_back({vec1(5.0), 0.1});
    CHECK_THROWS_WITH_AS(big.validate(),
                         doctest::Contains("jump-size-window assumption"), InputError);

    Characteristics neg = levyFixture();
    neg.jumps.atoms.push_back({vec1(0.5), -0.1});
    CHECK_THROWS_AS(neg.validate(), InputError);
}
