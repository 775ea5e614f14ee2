#include <doctest.h>

#include <cmath>

#include "cble/errors.hpp"
#include "cble/fluctuation.hpp"
#include "cble/quenched.hpp"

using namespace cble;

namespace {

RenewalEstimate synthetic_table(double slope, double xmax, double step, double offset = 0.0) {
    const int g = static_cast<int>(xmax / step) + 1;
    RenewalEstimate est;
    est.x.resize(g);
    est.u.resize(g);
    est.u_hat.resize(g);
    est.u_se = Eigen::VectorXd::Zero(g);
    est.u_hat_se = Eigen::VectorXd::Zero(g);
    for (int j = 0; j < g; ++j) {
        est.x[j] = j * step;
        est.u[j] = offset + slope * est.x[j];
        est.u_hat[j] = est.u[j];
    }
    est.slope_u = slope;
    est.slope_u_hat = slope;
    est.h = 1e-3;
    est.norm_tag = "synthetic";
    return est;
}

LevyEnvSpec tilted_benchmark() { return esscher_tilt(LevyEnvSpec::brownian(-0.5, 1.0), 0.5); }

}  // namespace

TEST_CASE("kappa_gamma on synthetic tables") {
    // U(x) = x, gamma = 1: integral of e^{-x} x equals 1, kappa = 1
    const KappaEstimate k1 = kappa_gamma(synthetic_table(1.0, 40.0, 0.01), 1.0);
    CHECK(k1.kappa == doctest::Approx(1.0).epsilon(1e-4));
    // normalization covariance: U -> 2U halves kappa
    const KappaEstimate k2 = kappa_gamma(synthetic_table(2.0, 40.0, 0.01), 1.0);
    CHECK(k2.kappa == doctest::Approx(0.5).epsilon(1e-4));
    // irregular-case step function U = 1
    const KappaEstimate k3 = kappa_gamma(synthetic_table(0.0, 40.0, 0.01, 1.0), 1.0);
    CHECK(k3.kappa == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("mu_gamma sampler against the Gamma law") {
    // density ~ y e^{-y}: Gamma(2,1), mean 2
    const MuGammaSampler mu = mu_gamma(synthetic_table(1.0, 40.0, 0.02), 1.0);
    const long n = 20000;
    double s1 = 0, s2 = 0;
    RngStream rng(91, stream_tag::mu_sample, 0);
    for (long i = 0; i < n; ++i) {
        const double y = mu.sample(rng);
        s1 += y;
        s2 += y * y;
    }
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 2.0) <= 4.0 * se);

    // doubling gamma on U(x) = x gives Gamma(2,2), mean 1
    const MuGammaSampler mu2 = mu_gamma(synthetic_table(1.0, 40.0, 0.02), 2.0);
    double t1 = 0, t2 = 0;
    RngStream rng2(92, stream_tag::mu_sample, 0);
    for (long i = 0; i < n; ++i) {
        const double y = mu2.sample(rng2);
        t1 += y;
        t2 += y * y;
    }
    const double mean2 = t1 / n;
    const double se2 = std::sqrt((t2 / n - mean2 * mean2) / n);
    CHECK(std::abs(mean2 - 1.0) <= 4.0 * se2);
}

TEST_CASE("mu_gamma mass check against its own kappa") {
    const RenewalEstimate table = synthetic_table(1.0, 40.0, 0.02);
    const KappaEstimate k = kappa_gamma(table, 1.0);
    const MuGammaSampler mu = mu_gamma(table, 1.0);
    CHECK(mu.mass_check(k.kappa) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(mu.mass_check(mu.kappa_implied()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a_gamma closed forms") {
    CHECK(a_gamma(LevyEnvSpec::brownian(-0.5, 1.0), 0.5) ==
          doctest::Approx(0.3989422804).epsilon(1e-9));
    CHECK(a_gamma(LevyEnvSpec::brownian(-2.0, 2.0), 0.5) ==
          doctest::Approx(1.0 / std::sqrt(8.0 * 3.14159265358979323846)).epsilon(1e-12));
    CHECK_THROWS_AS(a_gamma(LevyEnvSpec::brownian(1.0, 0.0), 0.5), std::domain_error);

    // with jumps the curvature enters through the analytic Phi''
    const auto spec = LevyEnvSpec::with_atoms(-2.0, 1.0, 1.0, {{1.0, 1.0}});
    const double g = find_gamma(spec);
    const double expected = 1.0 / std::sqrt(2.0 * 3.14159265358979323846 *
                                            (1.0 + std::exp(g)));
    CHECK(a_gamma(spec, g) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("conditioned expectations are self-normalized") {
    const LevyEnvSpec spec = tilted_benchmark();
    const auto one = [](const EnvironmentPath&) { return 1.0; };
    const McEstimate up = conditioned_expectation_up(spec, 1.0, 1.0, 1.0 / 128.0, one,
                                                     brownian_harmonic(), 4000, 7, 1);
    CHECK(up.mean == doctest::Approx(1.0).epsilon(1e-12));
    const McEstimate dn = conditioned_expectation_down(spec, -1.0, 1.0, 1.0 / 128.0, one,
                                                       brownian_harmonic(), 4000, 7, 1);
    CHECK(dn.mean == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("harmonic mean reproduces U-hat(x)") {
    const LevyEnvSpec spec = tilted_benchmark();
    const McEstimate m = harmonic_mean_up(spec, 1.0, 1.0, 1.0 / 256.0, brownian_harmonic(),
                                          20000, 8, 1);
    CHECK(std::abs(m.mean - 1.0) <= 4.0 * m.se);
}

TEST_CASE("up/down reflection symmetry of driftless Brownian motion") {
    const LevyEnvSpec spec = tilted_benchmark();
    const auto terminal = [](const EnvironmentPath& p) { return p.terminal(); };
    const auto neg_terminal = [](const EnvironmentPath& p) { return -p.terminal(); };
    const McEstimate up = conditioned_expectation_up(spec, 1.0, 1.0, 1.0 / 128.0, terminal,
                                                     brownian_harmonic(), 20000, 9, 1);
    const McEstimate dn = conditioned_expectation_down(spec, -1.0, 1.0, 1.0 / 128.0, neg_terminal,
                                                       brownian_harmonic(), 20000, 10, 1);
    CHECK(std::abs(up.mean - dn.mean) <= 4.0 * std::sqrt(up.se * up.se + dn.se * dn.se));
}

TEST_CASE("degenerate weights raise") {
    const LevyEnvSpec doomed = LevyEnvSpec::brownian(-6.0, 1.0);
    const auto one = [](const EnvironmentPath&) { return 1.0; };
    CHECK_THROWS_AS(conditioned_expectation_up(doomed, 0.005, 6.0, 1.0 / 64.0, one,
                                               brownian_harmonic(), 64, 11, 1),
                    numerical_error);
}

TEST_CASE("conditioned branching expectation") {
    const LevyEnvSpec spec = tilted_benchmark();
    const auto mech = BranchingMechanism::stable(1.0, 0.5);
    const auto one = [](double, const EnvironmentPath&) { return 1.0; };
    const McEstimate g1 = cble_conditioned_expectation(mech, spec, 1.0, 1.0, 2.0, 1.0 / 64.0, one,
                                                       brownian_harmonic(), 2000, 12, 1);
    CHECK(g1.mean == doctest::Approx(1.0).epsilon(1e-12));

    const auto surv = [](double s, const EnvironmentPath&) { return s; };
    const McEstimate tiny = cble_conditioned_expectation(mech, spec, 1e-12, 1.0, 2.0, 1.0 / 64.0,
                                                         surv, brownian_harmonic(), 2000, 12, 1);
    CHECK(tiny.mean < 1e-6);
}

TEST_CASE("renewal estimate on the tilted benchmark") {
    Eigen::VectorXd grid(6);
    grid << -0.5, 0.0, 0.5, 1.0, 1.5, 2.0;
    const RenewalEstimate est = renewal_estimate(tilted_benchmark(), grid, 2e-3, 48.0, 2500, 13, 1);
    CHECK(est.u_hat[0] == 0.0);  // zero on negatives
    for (int j = 1; j < 6; ++j) CHECK(est.u_hat[j] >= est.u_hat[j - 1]);
    // Brownian renewal function is linear
    const double ratio = est.u_hat[5] / est.u_hat[3];
    const auto& cov = est.cov_u_hat;
    const double var = (cov(5, 5) - 2.0 * ratio * cov(3, 5) + ratio * ratio * cov(3, 3)) /
                       (est.u_hat[3] * est.u_hat[3]);
    CHECK(std::abs(ratio - 2.0) <= 4.0 * std::sqrt(var));
    // ascending and descending sides agree in law for symmetric walks
    CHECK(std::abs(est.u[3] / est.u_hat[3] - 1.0) < 0.2);
    CHECK(est.slope_u_hat > 0.0);
}

TEST_CASE("monotone drift walk has a constant renewal table") {
    Eigen::VectorXd grid(3);
    grid << 0.0, 1.0, 2.0;
    const LevyEnvSpec drifty = LevyEnvSpec::brownian(1.0, 0.0);
    const RenewalEstimate est = renewal_estimate(drifty, grid, 0.01, 8.0, 200, 14, 1);
    CHECK(est.zero_epoch_desc);
    for (int j = 0; j < 3; ++j) CHECK(est.u_hat[j] == 1.0);
}

TEST_CASE("renewal interpolant extends linearly") {
    const RenewalEstimate table = synthetic_table(2.0, 4.0, 0.5);
    const Harmonic f = renewal_interpolant(table, false);
    CHECK(f(-1.0) == 0.0);
    CHECK(f(1.25) == doctest::Approx(2.5));
    CHECK(f(10.0) == doctest::Approx(20.0));
}
