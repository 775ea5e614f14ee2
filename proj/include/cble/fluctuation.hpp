#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

#include "cble/branching.hpp"
#include "cble/estimate.hpp"
#include "cble/levy_env.hpp"
#include "cble/rng.hpp"

namespace cble {

// Renewal-function tables estimated from skeleton walks at step h. Local time
// is counted in ladder epochs, so values carry the "epoch-count@h" scale; any
// downstream constant pairs kappa with U (or their duals), which removes the
// free normalization up to the discrete-to-continuous factor h.
struct RenewalEstimate {
    Eigen::VectorXd x;
    Eigen::VectorXd u, u_se;          // ascending renewal function U
    Eigen::VectorXd u_hat, u_hat_se;  // descending renewal function U-hat
    Eigen::MatrixXd cov_u, cov_u_hat; // covariance of the tabulated means
    double h = 0.0;
    double t_lad = 0.0;
    long paths = 0;
    double slope_u = 0.0;      // fitted linear growth on the upper half grid
    double slope_u_hat = 0.0;
    double active_frac_asc = 0.0;   // paths that hit the horizon before leaving the window
    double active_frac_desc = 0.0;
    bool zero_epoch_asc = false;
    bool zero_epoch_desc = false;
    std::string norm_tag;
};

RenewalEstimate renewal_estimate(const LevyEnvSpec& spec_tilted, const Eigen::VectorXd& x_grid,
                                 double h, double t_lad, long n_paths, std::uint64_t seed,
                                 int threads);

struct KappaEstimate {
    double kappa = 0.0;
    double integral = 0.0;       // int e^{-gamma x} U(x) dx including the linear tail
    double tail_fraction = 0.0;  // share contributed by the analytic tail
    double h = 0.0;
    std::string norm_tag;
};

// kappa^{(gamma)}(0,gamma) from the ascending table via the bivariate Laplace
// identity; trapezoid on the grid plus an analytic linear-tail correction.
KappaEstimate kappa_gamma(const RenewalEstimate& renewal, double gamma);

// Normalized sampler for mu_gamma(dy) ~ e^{-gamma y} U(y) dy, y > 0.
class MuGammaSampler {
public:
    MuGammaSampler(Eigen::VectorXd y, Eigen::VectorXd density, double gamma, double h,
                   std::string norm_tag);

    double sample(RngStream& rng) const;
    double total_mass_unnormalized() const { return total_; }
    double kappa_implied() const { return 1.0 / (gamma_ * total_); }
    // gamma * kappa * integral; equals 1 when kappa comes from the same table
    double mass_check(double kappa_independent) const { return gamma_ * kappa_independent * total_; }
    double gamma() const { return gamma_; }
    double h() const { return h_; }
    const std::string& norm_tag() const { return norm_tag_; }

private:
    Eigen::VectorXd y_, f_, cum_;
    double total_ = 0.0;
    double gamma_ = 0.0;
    double h_ = 0.0;
    std::string norm_tag_;
};

MuGammaSampler mu_gamma(const RenewalEstimate& renewal, double gamma);

// A_gamma = 1/sqrt(2 pi Phi''(gamma)) for environments with a Gaussian
// component; the atom integral vanishes because P(xi_t = 0) = 0 for sigma > 0.
double a_gamma(const LevyEnvSpec& spec, double gamma);

using PathFunctional = std::function<double(const EnvironmentPath&)>;
using Harmonic = std::function<double(double)>;

// U-hat(x) = x, the renewal function of driftless Brownian motion.
Harmonic brownian_harmonic();

// Linear interpolation of a renewal table with its fitted linear tail.
Harmonic renewal_interpolant(const RenewalEstimate& renewal, bool descending);

// Self-normalized Doob h-transform expectation of f under the law conditioned
// to stay positive, started at x > 0:
//   E^{up}[f] ~ sum f(path) w(path) / sum w(path),  w = U-hat(xi_T) W+(path)
// where W+ is the Gaussian-bridge probability of staying positive.
McEstimate conditioned_expectation_up(const LevyEnvSpec& spec, double x, double horizon,
                                      double max_step, const PathFunctional& f,
                                      const Harmonic& uhat, long n, std::uint64_t seed,
                                      int threads);

// Unnormalized mean of U-hat(xi_T) W+; equals U-hat(x) by harmonicity.
McEstimate harmonic_mean_up(const LevyEnvSpec& spec, double x, double horizon, double max_step,
                            const Harmonic& uhat, long n, std::uint64_t seed, int threads);

// Mirror case, conditioned to stay negative from x < 0 with weight U(-xi_T) W-.
McEstimate conditioned_expectation_down(const LevyEnvSpec& spec, double x, double horizon,
                                        double max_step, const PathFunctional& f,
                                        const Harmonic& u, long n, std::uint64_t seed,
                                        int threads);

// Conditioned branching expectation: g(survival, path) averaged under the
// up-conditioned environment with the branching integrated out.
McEstimate cble_conditioned_expectation(const BranchingMechanism& mech, const LevyEnvSpec& spec,
                                        double z, double x, double horizon, double max_step,
                                        const std::function<double(double, const EnvironmentPath&)>& g,
                                        const Harmonic& uhat, long n, std::uint64_t seed,
                                        int threads);

}  // namespace cble
