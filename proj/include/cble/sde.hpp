#pragma once

#include <Eigen/Core>

#include "cble/branching.hpp"
#include "cble/estimate.hpp"
#include "cble/levy_env.hpp"
#include "cble/rng.hpp"

namespace cble {

struct ZPath {
    Eigen::VectorXd t;
    Eigen::VectorXd z;          // nonnegative, absorbing at 0
    Eigen::Index absorbed_idx = -1;  // first index with z = 0, -1 if never
    long clamp_events = 0;      // negative branching excursions clamped to 0
};

// Lie-split Euler scheme on the environment grid refined to step dt:
// branching substep (Feller noise, compensated atom births) followed by the
// exact environment flow Z <- Z e^{d xi}. Requires a diffusive-dominated
// mechanism: stable beta < 1 is rejected.
ZPath simulate_z(const BranchingMechanism& mech, const EnvironmentPath& env, double z0, double dt,
                 RngStream& rng);

// Discrepancy between the SDE-sampled Laplace functional
// exp{-lambda Z_T e^{-(xi_T - xi_0)}} and the quenched kernel value
// exp{-z v_T(0, lambda)} averaged over shared environments.
McEstimate laplace_crosscheck(const BranchingMechanism& mech, const LevyEnvSpec& spec, double z0,
                              double lambda, double horizon, double dt, double max_step, long n,
                              std::uint64_t seed, int threads);

}  // namespace cble
