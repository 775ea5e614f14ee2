#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "cble/branching.hpp"
#include "cble/estimate.hpp"
#include "cble/fluctuation.hpp"
#include "cble/levy_env.hpp"

namespace cble {

// Annealed survival probability P_z(Z_T > 0): mean of the quenched survival
// probability over environment paths (branching randomness integrated out).
McEstimate estimate_survival_direct(const BranchingMechanism& mech, const LevyEnvSpec& spec,
                                    double z, double horizon, double max_step, long n,
                                    std::uint64_t seed, int threads);

// Importance-sampled version: environments drawn under the Esscher tilt at
// gamma and mapped back with the exponential-martingale weight. For pure
// Gaussian environments the terminal value is sampled by paired strata and
// the path filled as a Brownian bridge.
McEstimate estimate_survival_is(const BranchingMechanism& mech, const LevyEnvSpec& spec, double z,
                                double horizon, double max_step, long n, double gamma,
                                std::uint64_t seed, int threads);

// Total mass of the tilted measure: the IS estimator with the survival factor
// replaced by 1. Targets 1 exactly.
McEstimate estimate_is_total_mass(const LevyEnvSpec& spec, double horizon, double max_step, long n,
                                  double gamma, std::uint64_t seed, int threads);

struct DecayPoint {
    double t = 0.0;
    McEstimate p;
};

struct DecayFit {
    Eigen::VectorXd t, y, y_se;  // y = log p + 1.5 log t for the usable points
    double slope = 0.0;          // estimates Phi(gamma)
    double intercept = 0.0;      // estimates log of the limit constant
    double slope_se = 0.0;
    double intercept_se = 0.0;
    double plateau_drift = 0.0;  // (max-min)/min of per-point implied intercepts, upper half
    Eigen::VectorXd residuals;
    std::vector<std::string> warnings;
};

// Weighted least squares of y(T) = log p-hat + 1.5 log T against T. The 3/2
// exponent is imposed, not fitted.
DecayFit decay_fit(const std::vector<DecayPoint>& points);

// Survival estimates over a horizon grid, direct or tilted.
std::vector<DecayPoint> survival_decay_study(const BranchingMechanism& mech,
                                             const LevyEnvSpec& spec, double z,
                                             const std::vector<double>& t_grid, double max_step,
                                             long n, bool importance, double gamma,
                                             std::uint64_t seed, int threads);

struct BEstimate {
    McEstimate value;      // finite-T proxy for b(z,x)
    double value_half_t = 0.0;  // same estimator at T/2, convergence diagnostic
    double half_t = 0.0;
};

// Ratio estimator for b(z,x) = lim P_{(z,x)}(Z_T > 0 | inf xi > 0) under the
// gamma tilt with weight e^{-gamma(xi_T - x)} on both sides of the ratio.
BEstimate estimate_b(const BranchingMechanism& mech, const LevyEnvSpec& spec, double z, double x,
                     double horizon, double max_step, long n, double gamma, std::uint64_t seed,
                     int threads);

struct BConstPoint {
    double x = 0.0;
    double value = 0.0;  // b(z,x) e^{gamma x} U-hat(x) A_gamma h / (gamma kappa)
    double b = 0.0;
    double b_se = 0.0;
};

// Sequence whose final entry estimates the decay constant of Theorem-level
// survival asymptotics. The renewal table and kappa must carry the same
// normalization tag; the product is rescaled by the skeleton step h, which
// converts epoch counting into the continuous local-time pairing.
std::vector<BConstPoint> estimate_B(const BranchingMechanism& mech, const LevyEnvSpec& spec,
                                    double z, const std::vector<double>& x_grid, double horizon,
                                    double max_step, long n, double gamma,
                                    const RenewalEstimate& renewal, const KappaEstimate& kappa,
                                    std::uint64_t seed, int threads);

struct InfAsymptotic {
    std::vector<DecayPoint> points;  // p = P_x(inf xi > 0) per horizon
    DecayFit fit;
};

InfAsymptotic estimate_inf_asymptotic(const LevyEnvSpec& spec, double x,
                                      const std::vector<double>& t_grid, double max_step, long n,
                                      double gamma, std::uint64_t seed, int threads);

struct GEstimate {
    McEstimate est;
    double tail_frac_up = 0.0;    // mean share of the functional from the last 10% of [0,T]
    double tail_frac_down = 0.0;
};

// G_{z,x}(y): nested Monte Carlo over one up-conditioned and one
// down-conditioned exponential functional, self-normalized.
GEstimate stable_G(double z, double x, double y, const LevyEnvSpec& spec, double gamma,
                   double beta, double c, double horizon, double max_step, const Harmonic& uhat,
                   const Harmonic& u, long n, std::uint64_t seed, int threads);

// int G_{z,x}(y) mu_gamma(dy) with y sampled from the mu_gamma table and the
// h-transforms normalized by the exact harmonic values.
GEstimate stable_G_mu(double z, double x, const MuGammaSampler& mu, const LevyEnvSpec& spec,
                      double gamma, double beta, double c, double horizon, double max_step,
                      const Harmonic& uhat, const Harmonic& u, long n, std::uint64_t seed,
                      int threads);

// Mean of Z_T e^{-(xi_T - xi_0)} over joint simulations; targets z.
McEstimate martingale_annealed_check(const BranchingMechanism& mech, const LevyEnvSpec& spec,
                                     double z, double horizon, double dt, double max_step, long n,
                                     std::uint64_t seed, int threads);

}  // namespace cble
