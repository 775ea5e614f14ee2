#pragma once

#include "cble/branching.hpp"
#include "cble/levy_env.hpp"

namespace cble {

struct OdeDiagnostics {
    long steps = 0;
    long rejects = 0;
};

struct QuenchedSolution {
    double v0 = 0.0;          // v_t(0, lambda, xi - xi_0)
    double lambda = 0.0;      // terminal condition (ignored when infinite)
    bool lambda_infinite = false;
    double tol = 0.0;
    OdeDiagnostics diag;
};

// I_{0,T}(beta xi) = int_0^T e^{-beta xi_u} du, exact for the piecewise
// constant skeleton. The path enters as xi - xi_0 unless raw is set.
double exp_functional(const EnvironmentPath& path, double beta, bool raw = false);

// Backward solution of  d/ds v = e^{xi_s} psi0(v e^{-xi_s}),  v(T) = lambda,
// integrated segment by segment with an adaptive embedded Runge-Kutta pair.
QuenchedSolution solve_v(const BranchingMechanism& mech, const EnvironmentPath& path,
                         double lambda, double tol = 1e-9, bool raw = false);

// Stable closed form (lambda^{-beta} + beta C I)^{-1/beta}; lambda may be
// +infinity, in which case I must be positive.
double stable_v(double c, double beta, double lambda, double exp_int);

// v_t(0, infinity, xi - xi_0). Stable mechanisms use the closed form; other
// variants climb the ladder lambda_k = 10^k with Aitken extrapolation.
QuenchedSolution v_infinity(const BranchingMechanism& mech, const EnvironmentPath& path,
                            double tol = 1e-9);

// Generic ladder route, independent of the stable shortcut; used to validate
// the closed form against the ODE path.
QuenchedSolution v_infinity_ladder(const BranchingMechanism& mech, const EnvironmentPath& path,
                                   double tol = 1e-9);

// P(Z_t > 0 | xi) = 1 - exp{-z v_t(0, infinity, xi - xi_0)}
double survival_prob_quenched(const BranchingMechanism& mech, const EnvironmentPath& path,
                              double z);

// E[exp{-lambda Z_t e^{-(xi_t - xi_0)}} | xi] = exp{-z v_t(0, lambda, xi - xi_0)}
double quenched_laplace(const BranchingMechanism& mech, const EnvironmentPath& path, double z,
                        double lambda);

// Checks v_infinity <= (beta C I)^{-1/beta} (1 + tol) with the mechanism's
// global regular-variation lower bound as C.
bool v_upper_bound_check(const BranchingMechanism& mech, const EnvironmentPath& path,
                         double tol = 1e-9);

}  // namespace cble
