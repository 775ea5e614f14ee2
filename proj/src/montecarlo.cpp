#include "cble/montecarlo.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "cble/errors.hpp"
#include "cble/parallel.hpp"
#include "cble/quenched.hpp"
#include "cble/sde.hpp"

namespace cble {

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
    return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

bool stratifiable(const LevyEnvSpec& spec, long n) {
    return spec.jump_rate == 0.0 && spec.sigma > 0.0 && n >= 4 && n % 2 == 0;
}

// Brownian path with the terminal increment pinned; the interior is the
// exact Gaussian bridge on the uniform grid. Drift drops out of the bridge.
EnvironmentPath simulate_bridge_path(const LevyEnvSpec& spec, double x0, double horizon,
                                     double max_step, double terminal_increment, RngStream& rng) {
    const int pieces = std::max(1, static_cast<int>(std::ceil(horizon / max_step)));
    const double dt = horizon / pieces;
    EnvironmentPath p;
    p.x0 = x0;
    p.times.resize(pieces + 1);
    p.values.resize(pieces + 1);
    double b = 0.0;  // Gaussian part, bridge target b_T
    const double b_target = terminal_increment - spec.drift * horizon;
    p.times[0] = 0.0;
    p.values[0] = x0;
    for (int k = 1; k < pieces; ++k) {
        const double t = k * dt;
        const double remain = horizon - (t - dt);
        const double mean = b + dt * (b_target - b) / remain;
        const double var = dt * (remain - dt) / remain;
        b = mean + std::sqrt(var) * rng.gaussian();
        p.times[k] = t;
        p.values[k] = x0 + spec.drift * t + spec.sigma * b;
    }
    p.times[pieces] = horizon;
    p.values[pieces] = x0 + terminal_increment;
    p.left_values = p.values;
    return p;
}

struct MeanReducer {
    std::vector<double> vals;
    std::vector<char> failed;
    bool stratified = false;

    explicit MeanReducer(long n, bool strat) : vals(static_cast<std::size_t>(n), 0.0),
                                               failed(static_cast<std::size_t>(n), 0),
                                               stratified(strat) {}

    McEstimate reduce(std::uint64_t seed) const {
        McEstimate e;
        e.seed = seed;
        const long n = static_cast<long>(vals.size());
        long ok = 0;
        Neumaier s1, s2;
        for (long i = 0; i < n; ++i) {
            if (failed[static_cast<std::size_t>(i)]) continue;
            ++ok;
            const double v = vals[static_cast<std::size_t>(i)];
            s1.add(v);
            s2.add(v * v);
        }
        e.n = ok;
        e.failures = n - ok;
        if (ok == 0) throw numerical_error("estimator: every path failed");
        e.mean = s1.value() / ok;
        if (stratified && e.failures == 0) {
            Neumaier q;
            for (long k = 0; k < n / 2; ++k) {
                const double d = vals[static_cast<std::size_t>(2 * k)] -
                                 vals[static_cast<std::size_t>(2 * k + 1)];
                q.add(0.25 * d * d);
            }
            e.se = std::sqrt(q.value()) / (static_cast<double>(n) / 2.0);
        } else {
            const double var = std::max(0.0, s2.value() / ok - e.mean * e.mean);
            e.se = std::sqrt(var / static_cast<double>(ok));
        }
        e.ess = static_cast<double>(ok);
        return e;
    }
};

// weight diagnostics for IS runs
double weighted_ess(const std::vector<double>& w) {
    Neumaier s1, s2;
    for (double v : w) {
        s1.add(v);
        s2.add(v * v);
    }
    const double a = s1.value();
    const double b = s2.value();
    return b > 0.0 ? a * a / b : 0.0;
}

template <class PerPath>
McEstimate run_is_estimator(const LevyEnvSpec& spec, double x0, double horizon, double max_step,
                            long n, double gamma, std::uint64_t seed, std::uint32_t tag,
                            std::uint64_t index_offset, int threads, const PerPath& value_of) {
    const auto t0 = clock_t_::now();
    const LevyEnvSpec tilted = esscher_tilt(spec, gamma);
    const double phi_gamma = laplace_exponent(spec, gamma).phi;
    const bool strat = stratifiable(tilted, n);
    MeanReducer red(n, strat);
    std::vector<double> weights(static_cast<std::size_t>(n), 0.0);
    const double sd_T = tilted.sigma * std::sqrt(horizon);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream rng(seed, tag, index_offset + i);
        EnvironmentPath path;
        if (strat) {
            const long stratum = static_cast<long>(i) / 2;
            const double u = (static_cast<double>(stratum) + rng.uniform()) /
                             (static_cast<double>(n) / 2.0);
            const double inc = tilted.drift * horizon + sd_T * norm_quantile(u);
            path = simulate_bridge_path(tilted, x0, horizon, max_step, inc, rng);
        } else {
            path = simulate_path(tilted, x0, horizon, max_step, rng);
        }
        const double w = esscher_weight(path, gamma, phi_gamma);
        weights[i] = w;
        try {
            red.vals[i] = w * value_of(path);
        } catch (const numerical_error&) {
            red.failed[i] = 1;
        }
    });
    McEstimate e = red.reduce(seed);
    e.ess = weighted_ess(weights);
    e.wall_s = seconds_since(t0);
    return e;
}

}  // namespace

McEstimate estimate_survival_direct(const BranchingMechanism& mech, const LevyEnvSpec& spec,
                                    double z, double horizon, double max_step, long n,
                                    std::uint64_t seed, int threads) {
    if (!(z >= 0.0)) throw std::invalid_argument("z must be >= 0");
    const auto t0 = clock_t_::now();
    if (z == 0.0) {
        McEstimate e;
        e.n = n;
        e.seed = seed;
        e.ess = static_cast<double>(n);
        return e;
    }
    const bool degenerate = spec.sigma == 0.0 && spec.jump_rate == 0.0 && spec.drift == 0.0;
    MeanReducer red(n, false);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream rng(seed, stream_tag::survival_direct, i);
        const EnvironmentPath path = simulate_path(spec, 0.0, horizon, max_step, rng);
        try {
            red.vals[i] = survival_prob_quenched(mech, path, z);
        } catch (const numerical_error&) {
            red.failed[i] = 1;
        }
    });
    McEstimate e = red.reduce(seed);
    if (degenerate) e.se = 0.0;  // frozen environment: the integrand is deterministic
    e.wall_s = seconds_since(t0);
    return e;
}

McEstimate estimate_survival_is(const BranchingMechanism& mech, const LevyEnvSpec& spec, double z,
                                double horizon, double max_step, long n, double gamma,
                                std::uint64_t seed, int threads) {
    if (!(z >= 0.0)) throw std::invalid_argument("z must be >= 0");
    return run_is_estimator(spec, 0.0, horizon, max_step, n, gamma, seed,
                            stream_tag::survival_is, 0,
                            threads, [&](const EnvironmentPath& path) {
                                return survival_prob_quenched(mech, path, z);
                            });
}

McEstimate estimate_is_total_mass(const LevyEnvSpec& spec, double horizon, double max_step, long n,
                                  double gamma, std::uint64_t seed, int threads) {
    return run_is_estimator(spec, 0.0, horizon, max_step, n, gamma, seed,
                            stream_tag::survival_is, 0, threads,
                            [](const EnvironmentPath&) { return 1.0; });
}

DecayFit decay_fit(const std::vector<DecayPoint>& points) {
    std::vector<double> t, y, var;
    DecayFit fit;
    for (const auto& pt : points) {
        if (!(pt.p.mean > 0.0)) {
            fit.warnings.push_back("dropped nonpositive estimate at t=" + std::to_string(pt.t));
            continue;
        }
        t.push_back(pt.t);
        y.push_back(std::log(pt.p.mean) + 1.5 * std::log(pt.t));
        const double rel = pt.p.se / pt.p.mean;
        var.push_back(std::max(rel * rel, 1e-30));
    }
    const int m = static_cast<int>(t.size());
    if (m < 4) throw std::invalid_argument("decay_fit needs at least 4 usable points");

    Eigen::Matrix2d xtx = Eigen::Matrix2d::Zero();
    Eigen::Vector2d xty = Eigen::Vector2d::Zero();
    for (int i = 0; i < m; ++i) {
        const double w = 1.0 / var[static_cast<std::size_t>(i)];
        const Eigen::Vector2d row(1.0, t[static_cast<std::size_t>(i)]);
        xtx += w * row * row.transpose();
        xty += w * row * y[static_cast<std::size_t>(i)];
    }
    const Eigen::Matrix2d cov = xtx.inverse();
    const Eigen::Vector2d beta = cov * xty;
    fit.intercept = beta[0];
    fit.slope = beta[1];
    fit.intercept_se = std::sqrt(cov(0, 0));
    fit.slope_se = std::sqrt(cov(1, 1));

    fit.t = Eigen::Map<Eigen::VectorXd>(t.data(), m);
    fit.y = Eigen::Map<Eigen::VectorXd>(y.data(), m);
    fit.y_se.resize(m);
    fit.residuals.resize(m);
    for (int i = 0; i < m; ++i) {
        fit.y_se[i] = std::sqrt(var[static_cast<std::size_t>(i)]);
        fit.residuals[i] = fit.y[i] - (fit.intercept + fit.slope * fit.t[i]);
    }
    // implied intercept per point over the upper half of the horizon grid
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int i = m / 2; i < m; ++i) {
        const double b = std::exp(fit.y[i] - fit.slope * fit.t[i]);
        lo = std::min(lo, b);
        hi = std::max(hi, b);
    }
    fit.plateau_drift = lo > 0.0 ? (hi - lo) / lo : 0.0;
    return fit;
}

std::vector<DecayPoint> survival_decay_study(const BranchingMechanism& mech,
                                             const LevyEnvSpec& spec, double z,
                                             const std::vector<double>& t_grid, double max_step,
                                             long n, bool importance, double gamma,
                                             std::uint64_t seed, int threads) {
    std::vector<DecayPoint> pts;
    pts.reserve(t_grid.size());
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const double T = t_grid[k];
        DecayPoint pt;
        pt.t = T;
        if (importance) {
            pt.p = run_is_estimator(spec, 0.0, T, max_step, n, gamma, seed,
                                    stream_tag::survival_is,
                                    static_cast<std::uint64_t>(k) << 32, threads,
                                    [&](const EnvironmentPath& path) {
                                        return survival_prob_quenched(mech, path, z);
                                    });
        } else {
            pt.p = estimate_survival_direct(mech, spec, z, T, max_step, n, seed + k, threads);
        }
        pts.push_back(pt);
    }
    return pts;
}

namespace {

struct RatioAcc {
    std::vector<double> num, den;
};

McEstimate reduce_ratio(const RatioAcc& acc, std::uint64_t seed) {
    const long n = static_cast<long>(acc.num.size());
    Neumaier sn, sd;
    for (double v : acc.num) sn.add(v);
    for (double v : acc.den) sd.add(v);
    const double md = sd.value() / n;
    if (!(md > 0.0)) throw numerical_error("ratio estimator: denominator vanished");
    const double mn = sn.value() / n;
    const double ratio = mn / md;
    Neumaier qn, qd, qc, q2;
    for (long i = 0; i < n; ++i) {
        const double a = acc.num[static_cast<std::size_t>(i)] - mn;
        const double b = acc.den[static_cast<std::size_t>(i)] - md;
        qn.add(a * a);
        qd.add(b * b);
        qc.add(a * b);
        q2.add(acc.den[static_cast<std::size_t>(i)] * acc.den[static_cast<std::size_t>(i)]);
    }
    McEstimate e;
    e.mean = ratio;
    e.se = std::sqrt(std::max(0.0, qn.value() / n - 2.0 * ratio * qc.value() / n +
                                  ratio * ratio * qd.value() / n) /
                     static_cast<double>(n)) /
           md;
    e.n = n;
    e.seed = seed;
    const double sum_d = sd.value();
    e.ess = q2.value() > 0.0 ? sum_d * sum_d / q2.value() : 0.0;
    if (e.ess < 50.0) throw numerical_error("ratio estimator: effective sample size too small");
    return e;
}

McEstimate b_ratio_once(const BranchingMechanism& mech, const LevyEnvSpec& tilted, double gamma,
                        double z, double x, double horizon, double max_step, long n,
                        std::uint64_t seed, std::uint32_t tag, int threads) {
    RatioAcc acc;
    acc.num.assign(static_cast<std::size_t>(n), 0.0);
    acc.den.assign(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream rng(seed, tag, i);
        const EnvironmentPath path = simulate_path(tilted, x, horizon, max_step, rng);
        const double w = std::exp(-gamma * (path.terminal() - x)) *
                         stay_above_weight(path, 0.0, tilted.sigma);
        acc.den[i] = w;
        if (w > 0.0) acc.num[i] = w * survival_prob_quenched(mech, path, z);
    });
    return reduce_ratio(acc, seed);
}

}  // namespace

BEstimate estimate_b(const BranchingMechanism& mech, const LevyEnvSpec& spec, double z, double x,
                     double horizon, double max_step, long n, double gamma, std::uint64_t seed,
                     int threads) {
    if (!(x > 0.0)) throw std::invalid_argument("estimate_b requires x > 0");
    if (!(z >= 0.0)) throw std::invalid_argument("estimate_b requires z >= 0");
    const auto t0 = clock_t_::now();
    const LevyEnvSpec tilted = esscher_tilt(spec, gamma);
    BEstimate out;
    if (z == 0.0) {
        out.value.n = n;
        out.value.seed = seed;
        out.half_t = horizon / 2.0;
        return out;
    }
    out.value = b_ratio_once(mech, tilted, gamma, z, x, horizon, max_step, n, seed,
                             stream_tag::b_const, threads);
    out.half_t = horizon / 2.0;
    out.value_half_t = b_ratio_once(mech, tilted, gamma, z, x, out.half_t, max_step, n, seed,
                                    stream_tag::b_const_half, threads)
                           .mean;
    out.value.wall_s = seconds_since(t0);
    return out;
}

std::vector<BConstPoint> estimate_B(const BranchingMechanism& mech, const LevyEnvSpec& spec,
                                    double z, const std::vector<double>& x_grid, double horizon,
                                    double max_step, long n, double gamma,
                                    const RenewalEstimate& renewal, const KappaEstimate& kappa,
                                    std::uint64_t seed, int threads) {
    if (renewal.norm_tag != kappa.norm_tag)
        throw std::invalid_argument(
            "estimate_B: kappa and renewal inputs carry different normalization tags");
    const Harmonic uhat = renewal_interpolant(renewal, true);
    const double a = a_gamma(spec, gamma);
    std::vector<BConstPoint> out;
    out.reserve(x_grid.size());
    for (std::size_t k = 0; k < x_grid.size(); ++k) {
        const double x = x_grid[k];
        const LevyEnvSpec tilted = esscher_tilt(spec, gamma);
        McEstimate b = b_ratio_once(mech, tilted, gamma, z, x, horizon, max_step, n,
                                    seed + 1000 * k, stream_tag::b_const, threads);
        BConstPoint pt;
        pt.x = x;
        pt.b = b.mean;
        pt.b_se = b.se;
        // the h factor converts the epoch-count local-time pairing U-hat / kappa
        // into the continuous Wiener-Hopf normalization
        pt.value = b.mean * std::exp(gamma * x) * uhat(x) * a * renewal.h / (gamma * kappa.kappa);
        out.push_back(pt);
    }
    return out;
}

InfAsymptotic estimate_inf_asymptotic(const LevyEnvSpec& spec, double x,
                                      const std::vector<double>& t_grid, double max_step, long n,
                                      double gamma, std::uint64_t seed, int threads) {
    if (!(x > 0.0)) throw std::invalid_argument("estimate_inf_asymptotic requires x > 0");
    InfAsymptotic out;
    const double sigma = spec.sigma;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const double T = t_grid[k];
        DecayPoint pt;
        pt.t = T;
        pt.p = run_is_estimator(spec, x, T, max_step, n, gamma, seed, stream_tag::inf_asymp,
                                static_cast<std::uint64_t>(k) << 32, threads,
                                [&](const EnvironmentPath& path) {
                                    return stay_above_weight(path, 0.0, sigma);
                                });
        out.points.push_back(pt);
    }
    out.fit = decay_fit(out.points);
    return out;
}

namespace {

// exponential functional and the share contributed by the last 10% of the
// window; sign < 0 integrates e^{+beta xi} (the dual functional)
std::pair<double, double> functional_with_tail(const EnvironmentPath& path, double beta,
                                               double sign) {
    const Eigen::Index n = path.size();
    const double t_tail = 0.9 * path.horizon();
    double acc = 0.0, tail = 0.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double piece =
            std::exp(-sign * beta * path.values[i]) * (path.times[i + 1] - path.times[i]);
        acc += piece;
        if (path.times[i] >= t_tail) tail += piece;
    }
    return {acc, acc > 0.0 ? tail / acc : 0.0};
}

}  // namespace

GEstimate stable_G(double z, double x, double y, const LevyEnvSpec& spec, double gamma,
                   double beta, double c, double horizon, double max_step, const Harmonic& uhat,
                   const Harmonic& u, long n, std::uint64_t seed, int threads) {
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("stable_G requires x, y > 0");
    const auto t0 = clock_t_::now();
    const LevyEnvSpec tilted = esscher_tilt(spec, gamma);
    RatioAcc acc;
    acc.num.assign(static_cast<std::size_t>(n), 0.0);
    acc.den.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> tails_up(static_cast<std::size_t>(n), 0.0);
    std::vector<double> tails_dn(static_cast<std::size_t>(n), 0.0);
    const double zx = z * std::exp(-x);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream up_rng(seed, stream_tag::stable_g_up, i);
        RngStream dn_rng(seed, stream_tag::stable_g_down, i);
        const EnvironmentPath up = simulate_path(tilted, x, horizon, max_step, up_rng);
        const EnvironmentPath dn = simulate_path(tilted, -y, horizon, max_step, dn_rng);
        const double w_up = uhat(up.terminal()) * stay_above_weight(up, 0.0, tilted.sigma);
        const double w_dn = u(-dn.terminal()) * stay_below_weight(dn, 0.0, tilted.sigma);
        const double w = w_up * w_dn;
        acc.den[i] = w;
        if (w > 0.0) {
            const auto [iu, tu] = functional_with_tail(up, beta, 1.0);
            const auto [id, td] = functional_with_tail(dn, beta, -1.0);
            tails_up[i] = tu;
            tails_dn[i] = td;
            const double g = -std::expm1(-zx * std::pow(beta * c * (iu + id), -1.0 / beta));
            acc.num[i] = w * g;
        }
    });
    GEstimate out;
    out.est = reduce_ratio(acc, seed);
    out.est.wall_s = seconds_since(t0);
    Neumaier tu, td;
    for (double v : tails_up) tu.add(v);
    for (double v : tails_dn) td.add(v);
    out.tail_frac_up = tu.value() / n;
    out.tail_frac_down = td.value() / n;
    return out;
}

GEstimate stable_G_mu(double z, double x, const MuGammaSampler& mu, const LevyEnvSpec& spec,
                      double gamma, double beta, double c, double horizon, double max_step,
                      const Harmonic& uhat, const Harmonic& u, long n, std::uint64_t seed,
                      int threads) {
    if (!(x > 0.0)) throw std::invalid_argument("stable_G_mu requires x > 0");
    const auto t0 = clock_t_::now();
    const LevyEnvSpec tilted = esscher_tilt(spec, gamma);
    const double uhat_x = uhat(x);
    if (!(uhat_x > 0.0)) throw std::invalid_argument("stable_G_mu: U-hat(x) must be positive");
    MeanReducer red(n, false);
    std::vector<double> tails_up(static_cast<std::size_t>(n), 0.0);
    std::vector<double> tails_dn(static_cast<std::size_t>(n), 0.0);
    const double zx = z * std::exp(-x);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream y_rng(seed, stream_tag::mu_sample, i);
        RngStream up_rng(seed, stream_tag::stable_g_up, i);
        RngStream dn_rng(seed, stream_tag::stable_g_down, i);
        const double y = std::max(mu.sample(y_rng), 1e-12);
        const EnvironmentPath up = simulate_path(tilted, x, horizon, max_step, up_rng);
        const EnvironmentPath dn = simulate_path(tilted, -y, horizon, max_step, dn_rng);
        const double w_up = uhat(up.terminal()) * stay_above_weight(up, 0.0, tilted.sigma);
        const double w_dn = u(-dn.terminal()) * stay_below_weight(dn, 0.0, tilted.sigma);
        const double w = (w_up / uhat_x) * (w_dn / u(y));
        if (w > 0.0) {
            const auto [iu, tu] = functional_with_tail(up, beta, 1.0);
            const auto [id, td] = functional_with_tail(dn, beta, -1.0);
            tails_up[i] = tu;
            tails_dn[i] = td;
            const double g = -std::expm1(-zx * std::pow(beta * c * (iu + id), -1.0 / beta));
            red.vals[i] = w * g;
        }
    });
    GEstimate out;
    out.est = red.reduce(seed);
    out.est.wall_s = seconds_since(t0);
    Neumaier tu, td;
    for (double v : tails_up) tu.add(v);
    for (double v : tails_dn) td.add(v);
    out.tail_frac_up = tu.value() / n;
    out.tail_frac_down = td.value() / n;
    return out;
}

McEstimate martingale_annealed_check(const BranchingMechanism& mech, const LevyEnvSpec& spec,
                                     double z, double horizon, double dt, double max_step, long n,
                                     std::uint64_t seed, int threads) {
    const auto t0 = clock_t_::now();
    MeanReducer red(n, false);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream env_rng(seed, stream_tag::env_path, i);
        RngStream b_rng(seed, stream_tag::branching, i);
        const EnvironmentPath path = simulate_path(spec, 0.0, horizon, max_step, env_rng);
        const ZPath zp = simulate_z(mech, path, z, dt, b_rng);
        red.vals[i] = zp.z[zp.z.size() - 1] * std::exp(-(path.terminal() - path.x0));
    });
    McEstimate e = red.reduce(seed);
    e.wall_s = seconds_since(t0);
    return e;
}

}  // namespace cble
