#include <doctest.h>

#include <cmath>

#include "cble/quenched.hpp"
#include "cble/sde.hpp"

using namespace cble;

namespace {

LevyEnvSpec benchmark() { return LevyEnvSpec::brownian(-0.5, 1.0); }

}  // namespace

TEST_CASE("degenerate mechanism reduces to the exponential flow bitwise") {
    const auto none = BranchingMechanism::finite_atoms(0.0, {});
    for (int p = 0; p < 5; ++p) {
        RngStream env_rng(41, stream_tag::env_path, static_cast<std::uint64_t>(p));
        RngStream b_rng(41, stream_tag::branching, static_cast<std::uint64_t>(p));
        const EnvironmentPath env = simulate_path(benchmark(), 0.3, 2.0, 0.1, env_rng);
        const ZPath zp = simulate_z(none, env, 1.5, 0.05, b_rng);
        const double expected = 1.5 * std::exp(env.terminal() - env.x0);
        CHECK(zp.z[zp.z.size() - 1] == expected);
    }
}

TEST_CASE("absorption at zero is absorbing") {
    const auto feller = BranchingMechanism::diffusive(1.0);
    RngStream env_rng(42, stream_tag::env_path, 0);
    const EnvironmentPath env = simulate_path(benchmark(), 0.0, 4.0, 0.05, env_rng);
    RngStream b_rng(42, stream_tag::branching, 0);
    const ZPath zero = simulate_z(feller, env, 0.0, 1e-3, b_rng);
    for (Eigen::Index k = 0; k < zero.z.size(); ++k) CHECK(zero.z[k] == 0.0);

    // a tiny initial mass almost surely absorbs quickly
    RngStream b2(43, stream_tag::branching, 0);
    const ZPath zp = simulate_z(feller, env, 1e-4, 1e-3, b2);
    if (zp.absorbed_idx >= 0)
        for (Eigen::Index k = zp.absorbed_idx; k < zp.z.size(); ++k) CHECK(zp.z[k] == 0.0);
}

TEST_CASE("stable branching below beta = 1 is rejected") {
    RngStream env_rng(44, stream_tag::env_path, 0);
    const EnvironmentPath env = simulate_path(benchmark(), 0.0, 1.0, 0.1, env_rng);
    RngStream b_rng(44, stream_tag::branching, 0);
    CHECK_THROWS_AS(simulate_z(BranchingMechanism::stable(1.0, 0.5), env, 1.0, 1e-2, b_rng),
                    std::invalid_argument);
}

TEST_CASE("Feller extinction probability") {
    const auto feller = BranchingMechanism::diffusive(1.0);
    const LevyEnvSpec frozen = LevyEnvSpec::brownian(0.0, 0.0);
    const long n = 20000;
    const double dt = 5e-4;
    long extinct = 0;
    for (long i = 0; i < n; ++i) {
        RngStream env_rng(45, stream_tag::env_path, static_cast<std::uint64_t>(i));
        RngStream b_rng(45, stream_tag::branching, static_cast<std::uint64_t>(i));
        const EnvironmentPath env = simulate_path(frozen, 0.0, 1.0, 0.25, env_rng);
        const ZPath zp = simulate_z(feller, env, 1.0, dt, b_rng);
        if (zp.z[zp.z.size() - 1] == 0.0) ++extinct;
    }
    const double p = static_cast<double>(extinct) / n;
    const double se = std::sqrt(p * (1.0 - p) / n);
    // classical Feller extinction e^{-z/(rho2 T)} with an O(dt) allowance
    CHECK(std::abs(p - std::exp(-1.0)) <= 4.0 * se + 50.0 * dt);
}

TEST_CASE("laplace crosscheck vanishes at lambda = 0") {
    const auto feller = BranchingMechanism::diffusive(1.0);
    const McEstimate d =
        laplace_crosscheck(feller, benchmark(), 1.0, 0.0, 1.0, 1e-2, 0.05, 200, 46, 1);
    CHECK(d.mean == 0.0);
    CHECK(d.se == 0.0);
}

TEST_CASE("laplace crosscheck within noise for frozen environments") {
    const auto feller = BranchingMechanism::diffusive(1.0);
    const LevyEnvSpec frozen = LevyEnvSpec::brownian(0.0, 0.0);
    const McEstimate d =
        laplace_crosscheck(feller, frozen, 1.0, 1.0, 1.0, 1e-3, 0.25, 20000, 47, 1);
    CHECK(std::abs(d.mean) <= 4.0 * d.se + 0.05 * 1e-3 + 2e-3);
}

TEST_CASE("clamp events are counted at coarse steps") {
    const auto feller = BranchingMechanism::diffusive(4.0);
    RngStream env_rng(48, stream_tag::env_path, 0);
    const EnvironmentPath env = simulate_path(benchmark(), 0.0, 2.0, 0.1, env_rng);
    RngStream b_rng(48, stream_tag::branching, 0);
    const ZPath zp = simulate_z(feller, env, 0.05, 0.05, b_rng);
    CHECK(zp.clamp_events >= 0);
}
