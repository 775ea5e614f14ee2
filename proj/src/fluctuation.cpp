#include "cble/fluctuation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cble/errors.hpp"
#include "cble/parallel.hpp"
#include "cble/quenched.hpp"

namespace cble {

namespace {

struct WalkAccumulator {
    std::vector<double> count;    // per path x grid, flattened
    std::vector<double> deficit;  // remaining window above the deepest record
    std::vector<char> active;
};

// Strict descending-record counting for one skeleton walk at step h; with
// flip the increments change sign, which turns the routine into the
// ascending-record counter of the same law.
void ladder_walk(const LevyEnvSpec& s, bool flip, double h, double t_lad, double x_max,
                 const Eigen::VectorXd& grid, std::uint64_t seed, std::uint32_t tag, long n_paths,
                 int threads, WalkAccumulator& out) {
    const Eigen::Index g = grid.size();
    out.count.assign(static_cast<std::size_t>(n_paths * g), 0.0);
    out.deficit.assign(static_cast<std::size_t>(n_paths * g), 0.0);
    out.active.assign(static_cast<std::size_t>(n_paths), 0);
    const double sd = s.sigma * std::sqrt(h);
    const double drift_h = s.drift * h;
    const long max_steps = static_cast<long>(std::ceil(t_lad / h));

    parallel_for(static_cast<std::size_t>(n_paths), threads, [&](std::size_t i) {
        RngStream rng(seed, tag, i);
        double next_jump = s.jump_rate > 0.0 ? rng.exponential(s.jump_rate) : -1.0;
        double walk = 0.0, record = 0.0;
        std::vector<double> depths;
        bool exited = false;
        for (long k = 1; k <= max_steps; ++k) {
            double inc = drift_h + (sd > 0.0 ? sd * rng.gaussian() : 0.0);
            if (s.jump_rate > 0.0) {
                const double t1 = static_cast<double>(k) * h;
                while (next_jump < t1) {
                    double j;
                    if (s.jump_kind == JumpKind::two_sided_exp) {
                        j = rng.uniform() < s.p_up ? rng.exponential(s.eta_up)
                                                   : -rng.exponential(s.eta_down);
                    } else {
                        const double u = rng.uniform();
                        double acc = 0.0;
                        j = s.atoms.back().value;
                        for (const auto& a : s.atoms) {
                            acc += a.prob;
                            if (u < acc) {
                                j = a.value;
                                break;
                            }
                        }
                    }
                    inc += j;
                    next_jump += rng.exponential(s.jump_rate);
                }
            }
            walk += flip ? -inc : inc;
            if (walk < record) {
                record = walk;
                if (-record > x_max) {
                    exited = true;
                    break;
                }
                depths.push_back(-record);
            }
        }
        double* c = out.count.data() + i * static_cast<std::size_t>(g);
        double* d = out.deficit.data() + i * static_cast<std::size_t>(g);
        for (Eigen::Index j = 0; j < g; ++j) {
            if (grid[j] < 0.0) continue;
            c[j] = static_cast<double>(
                std::upper_bound(depths.begin(), depths.end(), grid[j]) - depths.begin());
        }
        if (!exited) {
            out.active[i] = 1;
            const double depth = -record;
            for (Eigen::Index j = 0; j < g; ++j)
                if (grid[j] >= 0.0) d[j] = std::max(0.0, grid[j] - depth);
        }
    });
}

double fit_slope_upper_half(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index g = x.size();
    const Eigen::Index j0 = g / 2;
    const Eigen::Index m = g - j0;
    if (m < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (Eigen::Index j = j0; j < g; ++j) {
        sx += x[j];
        sy += y[j];
        sxx += x[j] * x[j];
        sxy += x[j] * y[j];
    }
    const double den = m * sxx - sx * sx;
    if (den <= 0.0) return 0.0;
    return std::max(0.0, (m * sxy - sx * sy) / den);
}

struct SideResult {
    Eigen::VectorXd mean, se;
    Eigen::MatrixXd cov;  // covariance of the means
    double slope = 0.0;
    double active_frac = 0.0;
};

SideResult reduce_side(const WalkAccumulator& acc, const Eigen::VectorXd& grid, long n,
                       bool zero_epoch) {
    const Eigen::Index g = grid.size();
    Eigen::VectorXd mc(g), md(g);
    for (Eigen::Index j = 0; j < g; ++j) {
        Neumaier sc, sd;
        for (long i = 0; i < n; ++i) {
            sc.add(acc.count[static_cast<std::size_t>(i * g + j)]);
            sd.add(acc.deficit[static_cast<std::size_t>(i * g + j)]);
        }
        mc[j] = sc.value() / static_cast<double>(n);
        md[j] = sd.value() / static_cast<double>(n);
    }
    // completion: records the ladder process would still place inside the
    // window are added as slope * remaining-window, solved by fixed point
    double slope = fit_slope_upper_half(grid, mc);
    for (int it = 0; it < 3; ++it) slope = fit_slope_upper_half(grid, mc + slope * md);

    SideResult r;
    r.slope = slope;
    r.mean.resize(g);
    r.se.resize(g);
    long active = 0;
    for (long i = 0; i < n; ++i) active += acc.active[static_cast<std::size_t>(i)];
    r.active_frac = static_cast<double>(active) / static_cast<double>(n);
    const double z0 = zero_epoch ? 1.0 : 0.0;
    Eigen::VectorXd completed_mean(g);
    for (Eigen::Index j = 0; j < g; ++j) {
        if (grid[j] < 0.0) {
            completed_mean[j] = 0.0;
            continue;
        }
        Neumaier s1;
        for (long i = 0; i < n; ++i)
            s1.add(acc.count[static_cast<std::size_t>(i * g + j)] +
                   slope * acc.deficit[static_cast<std::size_t>(i * g + j)]);
        completed_mean[j] = s1.value() / static_cast<double>(n);
    }
    r.cov = Eigen::MatrixXd::Zero(g, g);
    for (Eigen::Index j = 0; j < g; ++j) {
        if (grid[j] < 0.0) continue;
        for (Eigen::Index k = j; k < g; ++k) {
            if (grid[k] < 0.0) continue;
            Neumaier s;
            for (long i = 0; i < n; ++i) {
                const double vj = acc.count[static_cast<std::size_t>(i * g + j)] +
                                  slope * acc.deficit[static_cast<std::size_t>(i * g + j)] -
                                  completed_mean[j];
                const double vk = acc.count[static_cast<std::size_t>(i * g + k)] +
                                  slope * acc.deficit[static_cast<std::size_t>(i * g + k)] -
                                  completed_mean[k];
                s.add(vj * vk);
            }
            const double c = s.value() / (static_cast<double>(n) * static_cast<double>(n));
            r.cov(j, k) = c;
            r.cov(k, j) = c;
        }
    }
    for (Eigen::Index j = 0; j < g; ++j) {
        r.mean[j] = grid[j] < 0.0 ? 0.0 : completed_mean[j] + z0;
        r.se[j] = std::sqrt(std::max(0.0, r.cov(j, j)));
    }
    return r;
}

}  // namespace

RenewalEstimate renewal_estimate(const LevyEnvSpec& spec_tilted, const Eigen::VectorXd& x_grid,
                                 double h, double t_lad, long n_paths, std::uint64_t seed,
                                 int threads) {
    spec_tilted.validate();
    if (!(h > 0.0) || !(t_lad > h)) throw std::invalid_argument("renewal_estimate: bad h or t_lad");
    if (x_grid.size() < 2) throw std::invalid_argument("renewal_estimate: grid too small");
    for (Eigen::Index j = 1; j < x_grid.size(); ++j)
        if (!(x_grid[j] > x_grid[j - 1]))
            throw std::invalid_argument("renewal_estimate: grid must be increasing");

    const double x_max = x_grid[x_grid.size() - 1];
    RenewalEstimate est;
    est.x = x_grid;
    est.h = h;
    est.t_lad = t_lad;
    est.paths = n_paths;
    // 0 counts as a ladder epoch only when it is not regular for the half line
    est.zero_epoch_desc = spec_tilted.sigma == 0.0 && spec_tilted.drift >= 0.0;
    est.zero_epoch_asc = spec_tilted.sigma == 0.0 && spec_tilted.drift <= 0.0;
    {
        std::ostringstream tag;
        tag << "epoch-count@h=" << h;
        est.norm_tag = tag.str();
    }

    WalkAccumulator desc, asc;
    ladder_walk(spec_tilted, false, h, t_lad, x_max, x_grid, seed, stream_tag::renewal_desc,
                n_paths, threads, desc);
    ladder_walk(spec_tilted, true, h, t_lad, x_max, x_grid, seed, stream_tag::renewal_asc, n_paths,
                threads, asc);

    SideResult rd = reduce_side(desc, x_grid, n_paths, est.zero_epoch_desc);
    SideResult ra = reduce_side(asc, x_grid, n_paths, est.zero_epoch_asc);
    est.u_hat = std::move(rd.mean);
    est.u_hat_se = std::move(rd.se);
    est.cov_u_hat = std::move(rd.cov);
    est.slope_u_hat = rd.slope;
    est.active_frac_desc = rd.active_frac;
    est.u = std::move(ra.mean);
    est.u_se = std::move(ra.se);
    est.cov_u = std::move(ra.cov);
    est.slope_u = ra.slope;
    est.active_frac_asc = ra.active_frac;
    return est;
}

KappaEstimate kappa_gamma(const RenewalEstimate& renewal, double gamma) {
    if (!(gamma > 0.0)) throw std::domain_error("kappa_gamma requires gamma > 0");
    const Eigen::VectorXd& x = renewal.x;
    const Eigen::VectorXd& u = renewal.u;
    const Eigen::Index g = x.size();
    Neumaier body;
    if (x[0] > 0.0) body.add(0.5 * x[0] * std::exp(-gamma * x[0]) * u[0]);
    for (Eigen::Index j = 0; j + 1 < g; ++j) {
        const double f0 = std::exp(-gamma * x[j]) * u[j];
        const double f1 = std::exp(-gamma * x[j + 1]) * u[j + 1];
        body.add(0.5 * (f0 + f1) * (x[j + 1] - x[j]));
    }
    const double xm = x[g - 1];
    const double um = u[g - 1];
    const double slope = renewal.slope_u;
    const double tail = std::exp(-gamma * xm) * (um / gamma + slope / (gamma * gamma));
    const double total = body.value() + tail;
    if (!(total > 0.0)) throw numerical_error("kappa_gamma: nonpositive Laplace integral");
    KappaEstimate k;
    k.integral = total;
    k.tail_fraction = tail / total;
    if (k.tail_fraction > 0.5)
        throw numerical_error("kappa_gamma: tail coverage failure, extend the x grid");
    k.kappa = 1.0 / (gamma * total);
    k.h = renewal.h;
    k.norm_tag = renewal.norm_tag;
    return k;
}

MuGammaSampler::MuGammaSampler(Eigen::VectorXd y, Eigen::VectorXd density, double gamma, double h,
                               std::string norm_tag)
    : y_(std::move(y)), f_(std::move(density)), gamma_(gamma), h_(h),
      norm_tag_(std::move(norm_tag)) {
    const Eigen::Index g = y_.size();
    if (g < 2 || f_.size() != g) throw std::invalid_argument("mu_gamma: bad table");
    cum_.resize(g);
    cum_[0] = 0.0;
    for (Eigen::Index j = 1; j < g; ++j)
        cum_[j] = cum_[j - 1] + 0.5 * (f_[j] + f_[j - 1]) * (y_[j] - y_[j - 1]);
    total_ = cum_[g - 1];
    if (!(total_ > 0.0)) throw numerical_error("mu_gamma: degenerate density");
}

double MuGammaSampler::sample(RngStream& rng) const {
    const double target = rng.uniform() * total_;
    const Eigen::Index g = y_.size();
    Eigen::Index lo = 0, hi = g - 1;
    while (hi - lo > 1) {
        const Eigen::Index mid = (lo + hi) / 2;
        if (cum_[mid] <= target)
            lo = mid;
        else
            hi = mid;
    }
    const double rem = target - cum_[lo];
    const double dy = y_[hi] - y_[lo];
    const double f0 = f_[lo], f1 = f_[hi];
    const double a = 0.5 * (f1 - f0) / dy;
    // solve a s^2 + f0 s = rem for s in [0, dy]
    double s;
    if (std::abs(a) < 1e-300) {
        s = f0 > 0.0 ? rem / f0 : 0.5 * dy;
    } else {
        const double disc = std::max(0.0, f0 * f0 + 4.0 * a * rem);
        s = (-f0 + std::sqrt(disc)) / (2.0 * a);
    }
    return y_[lo] + std::clamp(s, 0.0, dy);
}

MuGammaSampler mu_gamma(const RenewalEstimate& renewal, double gamma) {
    if (!(gamma > 0.0)) throw std::domain_error("mu_gamma requires gamma > 0");
    const Eigen::Index g = renewal.x.size();
    const double xm = renewal.x[g - 1];
    const double um = renewal.u[g - 1];
    const double slope = renewal.slope_u;
    // extend the table with the fitted linear tail until the density is dead
    const double y_ext = xm + 30.0 / gamma;
    const int ext_pts = 240;
    std::vector<double> ys, fs;
    ys.reserve(static_cast<std::size_t>(g) + ext_pts);
    fs.reserve(static_cast<std::size_t>(g) + ext_pts);
    for (Eigen::Index j = 0; j < g; ++j) {
        if (renewal.x[j] < 0.0) continue;
        ys.push_back(renewal.x[j]);
        fs.push_back(std::exp(-gamma * renewal.x[j]) * std::max(0.0, renewal.u[j]));
    }
    const double dy = (y_ext - xm) / ext_pts;
    for (int k = 1; k <= ext_pts; ++k) {
        const double y = xm + k * dy;
        ys.push_back(y);
        fs.push_back(std::exp(-gamma * y) * (um + slope * (y - xm)));
    }
    Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    Eigen::VectorXd fv = Eigen::Map<Eigen::VectorXd>(fs.data(), static_cast<Eigen::Index>(fs.size()));
    return MuGammaSampler(std::move(yv), std::move(fv), gamma, renewal.h, renewal.norm_tag);
}

double a_gamma(const LevyEnvSpec& spec, double gamma) {
    if (!(spec.sigma > 0.0))
        throw std::domain_error(
            "a_gamma: only environments with a Gaussian component are supported (sigma > 0)");
    const double d2 = laplace_exponent(spec, gamma).d2phi;
    return 1.0 / std::sqrt(2.0 * std::numbers::pi * d2);
}

Harmonic brownian_harmonic() {
    return [](double v) { return v > 0.0 ? v : 0.0; };
}

Harmonic renewal_interpolant(const RenewalEstimate& renewal, bool descending) {
    Eigen::VectorXd x = renewal.x;
    Eigen::VectorXd u = descending ? renewal.u_hat : renewal.u;
    const double slope = descending ? renewal.slope_u_hat : renewal.slope_u;
    return [x, u, slope](double v) {
        if (v <= 0.0) return 0.0;
        const Eigen::Index g = x.size();
        if (v >= x[g - 1]) return u[g - 1] + slope * (v - x[g - 1]);
        Eigen::Index lo = 0, hi = g - 1;
        while (hi - lo > 1) {
            const Eigen::Index mid = (lo + hi) / 2;
            if (x[mid] <= v)
                lo = mid;
            else
                hi = mid;
        }
        const double w = (v - x[lo]) / (x[hi] - x[lo]);
        return (1.0 - w) * u[lo] + w * u[hi];
    };
}

namespace {

struct RatioSample {
    std::vector<double> num, den;
};

McEstimate ratio_estimate(const RatioSample& s, std::uint64_t seed) {
    const long n = static_cast<long>(s.num.size());
    Neumaier sn, sd;
    for (double v : s.num) sn.add(v);
    for (double v : s.den) sd.add(v);
    const double mn = sn.value() / n;
    const double md = sd.value() / n;
    if (!(md > 0.0)) throw numerical_error("conditioned expectation: all h-transform weights are 0");
    const double ratio = mn / md;
    Neumaier qn, qd, qc, q2;
    for (long i = 0; i < n; ++i) {
        const double a = s.num[static_cast<std::size_t>(i)] - mn;
        const double b = s.den[static_cast<std::size_t>(i)] - md;
        qn.add(a * a);
        qd.add(b * b);
        qc.add(a * b);
        q2.add(s.den[static_cast<std::size_t>(i)] * s.den[static_cast<std::size_t>(i)]);
    }
    const double var_n = qn.value() / n;
    const double var_d = qd.value() / n;
    const double cov = qc.value() / n;
    McEstimate e;
    e.mean = ratio;
    e.se = std::sqrt(std::max(0.0, var_n - 2.0 * ratio * cov + ratio * ratio * var_d) /
                     static_cast<double>(n)) /
           md;
    e.n = n;
    e.seed = seed;
    const double sum_d = sd.value();
    e.ess = q2.value() > 0.0 ? sum_d * sum_d / q2.value() : 0.0;
    return e;
}

}  // namespace

McEstimate conditioned_expectation_up(const LevyEnvSpec& spec, double x, double horizon,
                                      double max_step, const PathFunctional& f,
                                      const Harmonic& uhat, long n, std::uint64_t seed,
                                      int threads) {
    if (!(x > 0.0)) throw std::invalid_argument("conditioned_expectation_up requires x > 0");
    const auto t0 = std::chrono::steady_clock::now();
    RatioSample s;
    s.num.assign(static_cast<std::size_t>(n), 0.0);
    s.den.assign(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream rng(seed, stream_tag::cond_up, i);
        const EnvironmentPath path = simulate_path(spec, x, horizon, max_step, rng);
        const double w = uhat(path.terminal()) * stay_above_weight(path, 0.0, spec.sigma);
        s.den[i] = w;
        if (w > 0.0) s.num[i] = w * f(path);
    });
    McEstimate e = ratio_estimate(s, seed);
    e.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return e;
}

McEstimate harmonic_mean_up(const LevyEnvSpec& spec, double x, double horizon, double max_step,
                            const Harmonic& uhat, long n, std::uint64_t seed, int threads) {
    if (!(x > 0.0)) throw std::invalid_argument("harmonic_mean_up requires x > 0");
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream rng(seed, stream_tag::cond_up, i);
        const EnvironmentPath path = simulate_path(spec, x, horizon, max_step, rng);
        w[i] = uhat(path.terminal()) * stay_above_weight(path, 0.0, spec.sigma);
    });
    Neumaier s1, s2;
    for (double v : w) {
        s1.add(v);
        s2.add(v * v);
    }
    McEstimate e;
    e.mean = s1.value() / n;
    e.se = std::sqrt(std::max(0.0, s2.value() / n - e.mean * e.mean) / static_cast<double>(n));
    e.n = n;
    e.seed = seed;
    e.ess = static_cast<double>(n);
    e.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return e;
}

McEstimate conditioned_expectation_down(const LevyEnvSpec& spec, double x, double horizon,
                                        double max_step, const PathFunctional& f,
                                        const Harmonic& u, long n, std::uint64_t seed,
                                        int threads) {
    if (!(x < 0.0)) throw std::invalid_argument("conditioned_expectation_down requires x < 0");
    const auto t0 = std::chrono::steady_clock::now();
    RatioSample s;
    s.num.assign(static_cast<std::size_t>(n), 0.0);
    s.den.assign(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream rng(seed, stream_tag::cond_down, i);
        const EnvironmentPath path = simulate_path(spec, x, horizon, max_step, rng);
        const double w = u(-path.terminal()) * stay_below_weight(path, 0.0, spec.sigma);
        s.den[i] = w;
        if (w > 0.0) s.num[i] = w * f(path);
    });
    McEstimate e = ratio_estimate(s, seed);
    e.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return e;
}

McEstimate cble_conditioned_expectation(const BranchingMechanism& mech, const LevyEnvSpec& spec,
                                        double z, double x, double horizon, double max_step,
                                        const std::function<double(double, const EnvironmentPath&)>& g,
                                        const Harmonic& uhat, long n, std::uint64_t seed,
                                        int threads) {
    if (!(x > 0.0) || !(z >= 0.0))
        throw std::invalid_argument("cble_conditioned_expectation requires x > 0 and z >= 0");
    const auto t0 = std::chrono::steady_clock::now();
    RatioSample s;
    s.num.assign(static_cast<std::size_t>(n), 0.0);
    s.den.assign(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream rng(seed, stream_tag::cond_up, i);
        const EnvironmentPath path = simulate_path(spec, x, horizon, max_step, rng);
        const double w = uhat(path.terminal()) * stay_above_weight(path, 0.0, spec.sigma);
        s.den[i] = w;
        if (w > 0.0) s.num[i] = w * g(survival_prob_quenched(mech, path, z), path);
    });
    McEstimate e = ratio_estimate(s, seed);
    e.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return e;
}

}  // namespace cble
