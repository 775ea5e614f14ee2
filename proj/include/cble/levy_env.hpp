#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "cble/rng.hpp"

namespace cble {

enum class JumpKind { none, two_sided_exp, atoms };

struct JumpAtom {
    double value = 0.0;  // jump size, nonzero
    double prob = 0.0;   // probability mass
};

// Parametric law of the environment: drift + Brownian part + finite-activity
// compound-Poisson jumps. Immutable after construction.
struct LevyEnvSpec {
    double drift = 0.0;
    double sigma = 0.0;
    double jump_rate = 0.0;
    JumpKind jump_kind = JumpKind::none;
    // two-sided exponential jump law
    double p_up = 0.5;
    double eta_up = 1.0;
    double eta_down = 1.0;
    // atomic jump law
    std::vector<JumpAtom> atoms;

    // sup{lambda : E[e^{lambda J}] < inf}
    double theta_max() const;

    // throws std::invalid_argument on constraint violations
    void validate() const;

    static LevyEnvSpec brownian(double drift, double sigma);
    static LevyEnvSpec with_two_sided_exp(double drift, double sigma, double rate, double p_up,
                                          double eta_up, double eta_down);
    static LevyEnvSpec with_atoms(double drift, double sigma, double rate,
                                  std::vector<JumpAtom> atoms);
};

// Sampled cadlag skeleton of the environment. Piecewise constant between grid
// points: xi(t) = values[i] for t in [times[i], times[i+1]). left_values[i]
// holds xi(times[i]^-); it differs from values[i] only at jump grid points and
// lets barrier weights condition on the Gaussian bridge within each segment.
struct EnvironmentPath {
    Eigen::VectorXd times;
    Eigen::VectorXd values;
    Eigen::VectorXd left_values;
    double x0 = 0.0;

    Eigen::Index size() const { return times.size(); }
    double horizon() const { return times[times.size() - 1]; }
    double terminal() const { return values[values.size() - 1]; }

    static EnvironmentPath from_grid(Eigen::VectorXd times, Eigen::VectorXd values);
    void validate() const;
};

enum class Regime {
    supercritical,
    critical,
    strongly_subcritical,
    intermediate_subcritical,
    weakly_subcritical,
};

std::string to_string(Regime r);

struct RegimeReport {
    double dphi0 = 0.0;  // Phi'(0)
    double dphi1 = 0.0;  // Phi'(1)
    Regime regime = Regime::critical;
    std::optional<double> gamma;      // present iff weakly subcritical
    std::optional<double> phi_gamma;  // Phi(gamma)
};

struct PhiDerivatives {
    double phi = 0.0;
    double dphi = 0.0;
    double d2phi = 0.0;
};

// Laplace exponent Phi(lambda) = log E[e^{lambda xi_1}] and derivatives,
// evaluated analytically from the triplet. Requires 0 <= lambda < theta_max.
PhiDerivatives laplace_exponent(const LevyEnvSpec& spec, double lambda);

RegimeReport classify_regime(const LevyEnvSpec& spec, double eps_sign = 1e-10,
                             double gamma_tol = 1e-12);

// Root of Phi' on (0,1); requires the weakly subcritical regime.
double find_gamma(const LevyEnvSpec& spec, double tol = 1e-12);

// Law of the environment under the exponential change of measure at lambda,
// in closed form. Satisfies Phi_tilted(u) = Phi(lambda+u) - Phi(lambda).
LevyEnvSpec esscher_tilt(const LevyEnvSpec& spec, double lambda);

// Exact skeleton: Poisson jump times become grid points, gaps are refined to
// at most max_step and carry exact Gaussian increments.
EnvironmentPath simulate_path(const LevyEnvSpec& spec, double x0, double horizon, double max_step,
                              RngStream& rng);

// min/max over grid values (exact for the skeleton representation)
std::pair<double, double> running_extrema(const EnvironmentPath& path);

// Skeleton of (xi_{(T-s)^-} - xi_T) on the reflected grid; jumps move to
// their mirrored times with negated sizes.
EnvironmentPath reverse_path(const EnvironmentPath& path);

// Radon-Nikodym weight exp{-lambda (xi_T - x0) + T Phi(lambda)} converting a
// tilted-measure sample back to the base measure.
double esscher_weight(const EnvironmentPath& path, double lambda, double phi_lambda);

// P(the continuous path stays above `level` | skeleton), assuming Gaussian
// bridges with scale `sigma` between grid points. Returns the product of
// per-segment no-dip probabilities, 0 if the skeleton itself touches the
// level. With sigma = 0 this is the plain grid indicator.
double stay_above_weight(const EnvironmentPath& path, double level, double sigma);

// Mirror image: P(path stays below `level` | skeleton).
double stay_below_weight(const EnvironmentPath& path, double level, double sigma);

}  // namespace cble
