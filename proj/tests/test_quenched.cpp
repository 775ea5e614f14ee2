#include <doctest.h>

#include <cmath>
#include <limits>

#include "cble/errors.hpp"
#include "cble/quenched.hpp"

using namespace cble;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

EnvironmentPath flat_path(double level, double horizon, int pieces = 4) {
    Eigen::VectorXd t(pieces + 1), v(pieces + 1);
    for (int i = 0; i <= pieces; ++i) {
        t[i] = horizon * i / pieces;
        v[i] = level;
    }
    return EnvironmentPath::from_grid(std::move(t), std::move(v));
}

EnvironmentPath random_step_path(RngStream& rng, int segments, double horizon) {
    Eigen::VectorXd t(segments + 1), v(segments + 1);
    t[0] = 0.0;
    for (int i = 1; i <= segments; ++i) t[i] = t[i - 1] + 0.02 + rng.uniform() * 0.08;
    const double scale = horizon / t[segments];
    for (int i = 0; i <= segments; ++i) t[i] *= scale;
    t[segments] = horizon;
    for (int i = 0; i <= segments; ++i) v[i] = -3.0 + 6.0 * rng.uniform();
    return EnvironmentPath::from_grid(std::move(t), std::move(v));
}

// sub-path on [i0, i1] with times rebased to 0 and raw values kept
EnvironmentPath slice(const EnvironmentPath& p, Eigen::Index i0, Eigen::Index i1) {
    Eigen::VectorXd t(i1 - i0 + 1), v(i1 - i0 + 1);
    for (Eigen::Index i = i0; i <= i1; ++i) {
        t[i - i0] = p.times[i] - p.times[i0];
        v[i - i0] = p.values[i];
    }
    return EnvironmentPath::from_grid(std::move(t), std::move(v));
}

}  // namespace

TEST_CASE("exp_functional hand sums") {
    CHECK(exp_functional(flat_path(0.0, 2.0), 1.0) == doctest::Approx(2.0).epsilon(1e-15));

    Eigen::VectorXd t(3), v(3);
    t << 0, 1, 2;
    v << 0, std::log(2.0), std::log(2.0);
    CHECK(exp_functional(EnvironmentPath::from_grid(t, v), 1.0) ==
          doctest::Approx(1.5).epsilon(1e-14));

    const int n = 1000;  // slope-1 path on a fine grid
    Eigen::VectorXd ts(n + 1), vs(n + 1);
    for (int i = 0; i <= n; ++i) {
        ts[i] = static_cast<double>(i) / n;
        vs[i] = ts[i];
    }
    const double got = exp_functional(EnvironmentPath::from_grid(ts, vs), 1.0);
    CHECK(std::abs(got - (1.0 - std::exp(-1.0))) < 1e-3);
}

TEST_CASE("exp_functional shift convention and raw flag") {
    const EnvironmentPath p = flat_path(2.0, 3.0);
    CHECK(exp_functional(p, 1.0) == doctest::Approx(3.0));  // xi - xi_0 = 0
    CHECK(exp_functional(p, 1.0, true) == doctest::Approx(3.0 * std::exp(-2.0)));
}

TEST_CASE("solve_v stable flat-path closed form") {
    const auto mech = BranchingMechanism::stable(1.0, 0.5);
    const QuenchedSolution s = solve_v(mech, flat_path(0.0, 1.0), 1.0, 1e-10);
    CHECK(s.v0 == doctest::Approx(4.0 / 9.0).epsilon(1e-8));
    CHECK(s.lambda == 1.0);
    CHECK(solve_v(mech, flat_path(0.0, 1.0), 0.0).v0 == 0.0);
}

TEST_CASE("solve_v matches the stable closed form on random paths") {
    const auto mech = BranchingMechanism::stable(1.0, 0.5);
    RngStream rng(31, 2, 0);
    for (int rep = 0; rep < 25; ++rep) {
        const EnvironmentPath p = random_step_path(rng, 64, 0.5 + 1.5 * rng.uniform());
        const double exp_int = exp_functional(p, 0.5);
        for (double lambda : {0.1, 1.0, 10.0}) {
            const double oracle = stable_v(1.0, 0.5, lambda, exp_int);
            const double got = solve_v(mech, p, lambda, 1e-9).v0;
            CHECK(std::abs(got - oracle) / oracle < 1e-8);
        }
    }
}

TEST_CASE("stable_v examples") {
    CHECK(stable_v(1.0, 0.5, kInf, 1.0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(stable_v(1.0, 1.0, kInf, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(stable_v(1.0, 0.5, 7.0, 0.0) == doctest::Approx(7.0).epsilon(1e-15));
    CHECK_THROWS_AS(stable_v(1.0, 0.5, kInf, 0.0), std::domain_error);
}

TEST_CASE("v_infinity closed forms and refusal") {
    const auto stable = BranchingMechanism::stable(1.0, 0.5);
    CHECK(v_infinity(stable, flat_path(0.0, 1.0)).v0 == doctest::Approx(4.0).epsilon(1e-12));
    const auto feller = BranchingMechanism::diffusive(1.0);
    CHECK(v_infinity(feller, flat_path(0.0, 2.0)).v0 == doctest::Approx(0.5).epsilon(1e-12));
    const auto atoms = BranchingMechanism::finite_atoms(0.0, {{1.0, 1.0}});
    CHECK_THROWS_AS(v_infinity(atoms, flat_path(0.0, 1.0)), std::domain_error);
}

TEST_CASE("generic ladder agrees with the stable closed form") {
    const auto mech = BranchingMechanism::stable(1.0, 0.5);
    RngStream rng(32, 2, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const EnvironmentPath p = random_step_path(rng, 40, 1.0);
        const double oracle = stable_v(1.0, 0.5, kInf, exp_functional(p, 0.5));
        const double got = v_infinity_ladder(mech, p, 1e-7).v0;
        CHECK(std::abs(got - oracle) / oracle < 1e-6);
    }
}

TEST_CASE("ladder on an atom mechanism with a diffusion part") {
    // Grey holds through rho2; the ladder must converge and dominate the
    // pure-Feller solution computed from the same rho2
    const auto mech = BranchingMechanism::finite_atoms(1.0, {{1.0, 0.5}});
    const EnvironmentPath p = flat_path(0.0, 1.0);
    const double v = v_infinity(mech, p).v0;
    const double feller = 1.0;  // 1/(rho2 T)
    CHECK(v > 0.0);
    CHECK(v <= feller * (1.0 + 1e-9));
}

TEST_CASE("survival probability identities") {
    const auto mech = BranchingMechanism::stable(1.0, 0.5);
    const EnvironmentPath p = flat_path(0.0, 1.0);
    CHECK(survival_prob_quenched(mech, p, 1.0) ==
          doctest::Approx(-std::expm1(-4.0)).epsilon(1e-12));
    CHECK(survival_prob_quenched(mech, p, 0.0) == 0.0);
    CHECK(survival_prob_quenched(mech, p, 2.0) > survival_prob_quenched(mech, p, 1.0));
    CHECK(survival_prob_quenched(mech, p, 1.0) <= 1.0);
}

TEST_CASE("quenched laplace transform") {
    const auto feller = BranchingMechanism::diffusive(1.0);
    const EnvironmentPath p = flat_path(0.0, 1.0);
    CHECK(quenched_laplace(feller, p, 1.0, 0.0) == 1.0);
    CHECK(quenched_laplace(feller, p, 1.0, 1.0) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-8));

    const auto mech = BranchingMechanism::stable(1.0, 0.5);
    RngStream rng(33, 2, 0);
    const EnvironmentPath q = random_step_path(rng, 32, 1.0);
    const double v = stable_v(1.0, 0.5, 2.0, exp_functional(q, 0.5));
    CHECK(quenched_laplace(mech, q, 1.5, 2.0) ==
          doctest::Approx(std::exp(-1.5 * v)).epsilon(1e-7));

    // decreasing in lambda and z
    CHECK(quenched_laplace(mech, q, 1.0, 1.0) > quenched_laplace(mech, q, 1.0, 2.0));
    CHECK(quenched_laplace(mech, q, 1.0, 1.0) > quenched_laplace(mech, q, 2.0, 1.0));
}

TEST_CASE("monotonicity of v in lambda") {
    const auto mech = BranchingMechanism::finite_atoms(0.3, {{1.0, 1.0}});
    RngStream rng(34, 2, 0);
    const EnvironmentPath p = random_step_path(rng, 24, 1.5);
    double prev = 0.0;
    for (double lambda : {0.5, 1.0, 2.0, 8.0, 64.0}) {
        const double v = solve_v(mech, p, lambda, 1e-9).v0;
        CHECK(v >= prev - 1e-12);
        CHECK(v <= lambda);  // backward sweep only shrinks the terminal value
        prev = v;
    }
}

TEST_CASE("flow property of the backward equation") {
    const auto mech = BranchingMechanism::stable(1.0, 0.5);
    RngStream rng(35, 2, 0);
    const EnvironmentPath p = random_step_path(rng, 30, 2.0);
    const Eigen::Index mid = 15;
    const double whole = solve_v(mech, p, 3.0, 1e-10, true).v0;
    const double upper = solve_v(mech, slice(p, mid, p.size() - 1), 3.0, 1e-10, true).v0;
    const double lower = solve_v(mech, slice(p, 0, mid), upper, 1e-10, true).v0;
    CHECK(std::abs(lower - whole) / whole < 1e-8);
}

TEST_CASE("upper bound through the exponential functional") {
    const auto stable = BranchingMechanism::stable(1.0, 0.5);
    const auto mixed = BranchingMechanism::finite_atoms(1.0, {{1.0, 0.5}});
    RngStream rng(36, 2, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const EnvironmentPath p = random_step_path(rng, 24, 1.0);
        CHECK(v_upper_bound_check(stable, p, 1e-9));
        CHECK(v_upper_bound_check(mixed, p, 1e-9));
    }
    // atoms enlarge psi0, so the bound is strict
    const EnvironmentPath p = flat_path(0.0, 1.0);
    const double v = v_infinity(mixed, p).v0;
    CHECK(v < 1.0);
    CHECK_THROWS_AS(v_upper_bound_check(BranchingMechanism::finite_atoms(0.0, {{1.0, 1.0}}),
                                        p, 1e-9),
                    std::domain_error);
}
