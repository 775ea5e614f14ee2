#include <doctest.h>

#include <cmath>

#include "cble/errors.hpp"
#include "cble/montecarlo.hpp"
#include "cble/quenched.hpp"

using namespace cble;

namespace {

LevyEnvSpec benchmark() { return LevyEnvSpec::brownian(-0.5, 1.0); }
BranchingMechanism stable_half() { return BranchingMechanism::stable(1.0, 0.5); }

std::vector<DecayPoint> synthetic_points(double scale) {
    std::vector<DecayPoint> pts;
    for (double t : {8.0, 16.0, 24.0, 32.0, 40.0}) {
        DecayPoint p;
        p.t = t;
        p.p.mean = scale * std::exp(-t / 8.0) * std::pow(t, -1.5);
        p.p.se = 1e-12 * p.p.mean;
        p.p.n = 1;
        pts.push_back(p);
    }
    return pts;
}

}  // namespace

TEST_CASE("decay_fit recovers exact synthetic data") {
    const DecayFit fit = decay_fit(synthetic_points(1.0));
    CHECK(fit.slope == doctest::Approx(-0.125).epsilon(1e-10));
    CHECK(fit.intercept == doctest::Approx(0.0).epsilon(1e-9));
    for (Eigen::Index i = 0; i < fit.residuals.size(); ++i)
        CHECK(std::abs(fit.residuals[i]) < 1e-9);
    CHECK(fit.plateau_drift < 1e-9);

    const DecayFit two = decay_fit(synthetic_points(2.0));
    CHECK(two.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("decay_fit drops bad points and enforces the minimum") {
    auto pts = synthetic_points(1.0);
    pts[2].p.mean = 0.0;
    const DecayFit fit = decay_fit(pts);
    CHECK(fit.t.size() == 4);
    CHECK(fit.warnings.size() == 1);
    pts[1].p.mean = 0.0;
    CHECK_THROWS_AS(decay_fit(pts), std::invalid_argument);
}

TEST_CASE("direct survival estimator basics") {
    const McEstimate zero =
        estimate_survival_direct(stable_half(), benchmark(), 0.0, 1.0, 0.05, 100, 1, 1);
    CHECK(zero.mean == 0.0);
    CHECK(zero.se == 0.0);

    const LevyEnvSpec frozen = LevyEnvSpec::brownian(0.0, 0.0);
    const McEstimate csbp =
        estimate_survival_direct(stable_half(), frozen, 1.0, 1.0, 0.05, 8, 1, 1);
    CHECK(csbp.mean == doctest::Approx(-std::expm1(-4.0)).epsilon(1e-12));
    CHECK(csbp.se == 0.0);
}

TEST_CASE("direct and importance-sampled estimators agree") {
    const double gamma = find_gamma(benchmark());
    for (double T : {2.0, 5.0}) {
        const McEstimate a =
            estimate_survival_direct(stable_half(), benchmark(), 1.0, T, 0.05, 20000, 21, 1);
        const McEstimate b =
            estimate_survival_is(stable_half(), benchmark(), 1.0, T, 0.05, 20000, gamma, 22, 1);
        CHECK(a.ess > 100);
        CHECK(b.ess > 100);
        CHECK(std::abs(a.mean - b.mean) <= 4.0 * std::sqrt(a.se * a.se + b.se * b.se));
    }
}

TEST_CASE("gamma = 0 reduces the IS estimator to the direct one") {
    // identity tilt: weights are exactly 1, so ess equals n
    const McEstimate m =
        estimate_is_total_mass(benchmark(), 2.0, 0.05, 2000, 0.0, 23, 1);
    CHECK(m.mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.ess == doctest::Approx(2000.0).epsilon(1e-9));
}

TEST_CASE("IS total mass is 1 within noise") {
    const double gamma = find_gamma(benchmark());
    const McEstimate m = estimate_is_total_mass(benchmark(), 4.0, 0.05, 20000, gamma, 24, 1);
    CHECK(std::abs(m.mean - 1.0) <= 4.0 * m.se);
}

TEST_CASE("reproducibility across thread counts") {
    const double gamma = find_gamma(benchmark());
    const McEstimate a =
        estimate_survival_is(stable_half(), benchmark(), 1.0, 3.0, 0.05, 4096, gamma, 25, 1);
    const McEstimate b =
        estimate_survival_is(stable_half(), benchmark(), 1.0, 3.0, 0.05, 4096, gamma, 25, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.se == b.se);
    CHECK(a.ess == b.ess);
}

TEST_CASE("estimate_b basics") {
    const double gamma = find_gamma(benchmark());
    const BEstimate zero =
        estimate_b(stable_half(), benchmark(), 0.0, 1.0, 8.0, 0.05, 500, gamma, 26, 1);
    CHECK(zero.value.mean == 0.0);

    const BEstimate b1 =
        estimate_b(stable_half(), benchmark(), 1.0, 1.0, 8.0, 0.05, 4000, gamma, 27, 1);
    CHECK(b1.value.mean > 0.0);
    CHECK(b1.value.mean <= 1.0);
    // per-path monotonicity in z with shared environments
    const BEstimate b2 =
        estimate_b(stable_half(), benchmark(), 2.0, 1.0, 8.0, 0.05, 4000, gamma, 27, 1);
    CHECK(b2.value.mean >= b1.value.mean - 1e-12);
    // large z saturates the conditional survival
    const BEstimate big =
        estimate_b(stable_half(), benchmark(), 1e6, 1.0, 8.0, 0.05, 2000, gamma, 28, 1);
    CHECK(big.value.mean > 0.9);
}

TEST_CASE("estimate_B pairing rules") {
    RenewalEstimate table;
    const int g = 9;
    table.x.resize(g);
    table.u.resize(g);
    table.u_hat.resize(g);
    table.u_se = Eigen::VectorXd::Zero(g);
    table.u_hat_se = Eigen::VectorXd::Zero(g);
    for (int j = 0; j < g; ++j) {
        table.x[j] = 0.5 * j;
        table.u[j] = 44.7 * table.x[j];
        table.u_hat[j] = 44.7 * table.x[j];
    }
    table.slope_u = 44.7;
    table.slope_u_hat = 44.7;
    table.h = 1e-3;
    table.norm_tag = "epoch-count@h=0.001";
    const KappaEstimate kap = kappa_gamma(table, 0.5);

    KappaEstimate other = kap;
    other.norm_tag = "epoch-count@h=0.002";
    CHECK_THROWS_AS(estimate_B(stable_half(), benchmark(), 1.0, {1.0}, 4.0, 0.05, 400, 0.5, table,
                               other, 29, 1),
                    std::invalid_argument);

    const auto seq = estimate_B(stable_half(), benchmark(), 1.0, {1.0, 2.0}, 4.0, 0.05, 800, 0.5,
                                table, kap, 29, 1);
    REQUIRE(seq.size() == 2);
    CHECK(seq[0].value > 0.0);
    CHECK(seq[1].value > 0.0);

    // rescaling the local time doubles U-hat and kappa together (the
    // Wiener-Hopf pairing is preserved); the sequence must not move
    RenewalEstimate doubled = table;
    doubled.u_hat *= 2.0;
    doubled.slope_u_hat *= 2.0;
    KappaEstimate kap2 = kap;
    kap2.kappa *= 2.0;
    const auto seq2 = estimate_B(stable_half(), benchmark(), 1.0, {1.0, 2.0}, 4.0, 0.05, 800, 0.5,
                                 doubled, kap2, 29, 1);
    CHECK(seq2[0].value == doctest::Approx(seq[0].value).epsilon(1e-12));
    CHECK(seq2[1].value == doctest::Approx(seq[1].value).epsilon(1e-12));
}

TEST_CASE("stable_G saturation limits") {
    const double gamma = find_gamma(benchmark());
    const GEstimate zero = stable_G(0.0, 2.0, 1.0, benchmark(), gamma, 0.5, 1.0, 8.0, 0.05,
                                    brownian_harmonic(), brownian_harmonic(), 1000, 30, 1);
    CHECK(zero.est.mean == doctest::Approx(0.0).epsilon(1e-12));
    const GEstimate one = stable_G(1e9, 2.0, 1.0, benchmark(), gamma, 0.5, 1.0, 8.0, 0.05,
                                   brownian_harmonic(), brownian_harmonic(), 1000, 30, 1);
    CHECK(one.est.mean > 0.999);
}

TEST_CASE("martingale annealed check") {
    const auto feller = BranchingMechanism::diffusive(1.0);
    const LevyEnvSpec frozen = LevyEnvSpec::brownian(0.0, 0.0);
    const McEstimate m1 =
        martingale_annealed_check(feller, frozen, 1.0, 1.0, 2e-3, 0.05, 5000, 31, 1);
    CHECK(std::abs(m1.mean - 1.0) <= 4.0 * m1.se + 10.0 * 2e-3);

    const McEstimate m2 =
        martingale_annealed_check(feller, benchmark(), 2.0, 1.0, 2e-3, 0.05, 10000, 32, 1);
    CHECK(std::abs(m2.mean - 2.0) <= 4.0 * m2.se + 20.0 * 2e-3);

    const McEstimate zero =
        martingale_annealed_check(feller, benchmark(), 0.0, 1.0, 2e-3, 0.05, 200, 33, 1);
    CHECK(zero.mean == 0.0);
}
