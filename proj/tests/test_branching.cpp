#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cble/branching.hpp"
#include "cble/rng.hpp"

using namespace cble;

TEST_CASE("psi0 closed forms") {
    CHECK(psi0(BranchingMechanism::stable(1.0, 0.5), 4.0) == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(psi0(BranchingMechanism::stable(2.0, 0.7), 0.0) == 0.0);
    CHECK(psi0(BranchingMechanism::finite_atoms(0.0, {{1.0, 1.0}}), 0.0) == 0.0);
    CHECK(psi0(BranchingMechanism::finite_atoms(0.0, {{1.0, 1.0}}), 1.0) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("big_psi0") {
    CHECK(big_psi0(BranchingMechanism::stable(1.0, 0.5), 4.0) == doctest::Approx(2.0));
    CHECK(big_psi0(BranchingMechanism::stable(1.0, 0.5), 0.0) == 0.0);
    CHECK(big_psi0(BranchingMechanism::diffusive(3.0), 2.0) == doctest::Approx(6.0));
}

TEST_CASE("psi0 equals lambda Psi0 over a wide range") {
    const auto mech = BranchingMechanism::finite_atoms(0.5, {{0.5, 2.0}, {2.0, 0.25}});
    for (double l = 1e-8; l < 1e8; l *= 10.0) {
        const double lhs = psi0(mech, l);
        const double rhs = l * big_psi0(mech, l);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
}

TEST_CASE("Grey's condition per variant") {
    CHECK(check_grey(BranchingMechanism::stable(1.0, 0.5)));
    CHECK(check_grey(BranchingMechanism::diffusive(2.0)));
    CHECK_FALSE(check_grey(BranchingMechanism::finite_atoms(0.0, {{1.0, 1.0}})));
    CHECK(check_grey(BranchingMechanism::finite_atoms(0.1, {{1.0, 1.0}})));
}

TEST_CASE("regular variation metadata") {
    const RvMetadata s = rv_metadata(BranchingMechanism::stable(2.0, 0.7));
    CHECK(s.beta == 0.7);
    CHECK(s.ell_at_zero == 2.0);
    CHECK(s.lower_bound_holds);
    CHECK(s.xlog2x_ok);

    const RvMetadata d = rv_metadata(BranchingMechanism::diffusive(1.0));
    CHECK(d.beta == 1.0);
    CHECK(d.ell_at_zero == 1.0);

    const RvMetadata a = rv_metadata(BranchingMechanism::finite_atoms(0.0, {{1.0, 1.0}}));
    CHECK(a.beta == 1.0);
    CHECK(a.ell_at_zero == doctest::Approx(0.5));
    CHECK_FALSE(a.lower_bound_holds);
}

TEST_CASE("small-lambda expansion of the atom part") {
    // psi0 ~ lambda^2 sum m x^2 / 2 near zero
    const auto mech = BranchingMechanism::finite_atoms(0.0, {{2.0, 0.5}});
    const double l = 1e-6;
    CHECK(psi0(mech, l) == doctest::Approx(l * l * 0.5 * 0.5 * 4.0).epsilon(1e-5));
}

TEST_CASE("diffusive canonicalizes onto the stable family") {
    const auto a = BranchingMechanism::diffusive(0.7);
    const auto b = BranchingMechanism::stable(0.7, 1.0);
    CHECK(a.kind == MechKind::stable);
    for (double l : {0.0, 0.3, 1.0, 7.0, 123.0})
        CHECK(psi0(a, l) == psi0(b, l));
}

TEST_CASE("psi0 convexity chord property") {
    RngStream rng(11, 1, 0);
    const auto mech = BranchingMechanism::finite_atoms(0.25, {{0.7, 1.3}, {3.0, 0.1}});
    for (int rep = 0; rep < 200; ++rep) {
        double l1 = 10.0 * rng.uniform();
        double l3 = l1 + 10.0 * rng.uniform() + 1e-6;
        const double w = rng.uniform();
        const double l2 = w * l1 + (1.0 - w) * l3;
        const double chord = w * psi0(mech, l1) + (1.0 - w) * psi0(mech, l3);
        CHECK(psi0(mech, l2) <= chord * (1.0 + 1e-12) + 1e-300);
    }
}

TEST_CASE("Psi0 monotone on a log grid") {
    const auto mech = BranchingMechanism::finite_atoms(0.0, {{1.0, 1.0}, {0.1, 5.0}});
    double prev = 0.0;
    for (double l = 1e-6; l < 1e6; l *= 1.7) {
        const double cur = big_psi0(mech, l);
        CHECK(cur >= prev - 1e-15);
        prev = cur;
    }
}

TEST_CASE("mechanism validation") {
    CHECK_THROWS_AS(BranchingMechanism::stable(0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(BranchingMechanism::stable(1.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(BranchingMechanism::finite_atoms(0.0, {{-1.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(psi0(BranchingMechanism::stable(1.0, 0.5), -1.0), std::domain_error);
}
