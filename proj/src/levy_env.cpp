#include "cble/levy_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cble/errors.hpp"

namespace cble {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// moment generating value of the jump law and its first two derivatives
struct JumpMgf {
    double m = 1.0;
    double dm = 0.0;
    double d2m = 0.0;
};

JumpMgf jump_mgf(const LevyEnvSpec& s, double lambda) {
    JumpMgf out;
    switch (s.jump_kind) {
        case JumpKind::none:
            break;
        case JumpKind::two_sided_exp: {
            const double du = s.eta_up - lambda;
            const double dd = s.eta_down + lambda;
            out.m = s.p_up * s.eta_up / du + (1.0 - s.p_up) * s.eta_down / dd;
            out.dm = s.p_up * s.eta_up / (du * du) - (1.0 - s.p_up) * s.eta_down / (dd * dd);
            out.d2m = 2.0 * s.p_up * s.eta_up / (du * du * du) +
                      2.0 * (1.0 - s.p_up) * s.eta_down / (dd * dd * dd);
            break;
        }
        case JumpKind::atoms: {
            out.m = 0.0;
            for (const auto& a : s.atoms) {
                const double e = a.prob * std::exp(lambda * a.value);
                out.m += e;
                out.dm += e * a.value;
                out.d2m += e * a.value * a.value;
            }
            break;
        }
    }
    return out;
}

}  // namespace

double LevyEnvSpec::theta_max() const {
    if (jump_rate > 0.0 && jump_kind == JumpKind::two_sided_exp) return eta_up;
    return kInf;
}

void LevyEnvSpec::validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
    if (!(jump_rate >= 0.0)) throw std::invalid_argument("jump_rate must be >= 0");
    if (!std::isfinite(drift)) throw std::invalid_argument("drift must be finite");
    if (jump_rate > 0.0) {
        if (jump_kind == JumpKind::none)
            throw std::invalid_argument("jump_rate > 0 requires a jump law");
        // compound Poisson excluded: need a diffusion or drift component
        if (sigma == 0.0 && drift == 0.0)
            throw std::invalid_argument(
                "compound-Poisson environment (sigma = 0, drift = 0 with jumps) is not supported");
        if (jump_kind == JumpKind::two_sided_exp) {
            if (!(p_up >= 0.0 && p_up <= 1.0)) throw std::invalid_argument("p_up must be in [0,1]");
            if (!(eta_up > 0.0) || !(eta_down > 0.0))
                throw std::invalid_argument("eta parameters must be > 0");
        }
        if (jump_kind == JumpKind::atoms) {
            if (atoms.empty()) throw std::invalid_argument("atom jump law must not be empty");
            double total = 0.0;
            for (const auto& a : atoms) {
                if (a.value == 0.0) throw std::invalid_argument("atom values must be nonzero");
                if (!(a.prob > 0.0)) throw std::invalid_argument("atom probabilities must be > 0");
                total += a.prob;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw std::invalid_argument("atom probabilities must sum to 1");
        }
    }
}

LevyEnvSpec LevyEnvSpec::brownian(double drift, double sigma) {
    LevyEnvSpec s;
    s.drift = drift;
    s.sigma = sigma;
    s.validate();
    return s;
}

LevyEnvSpec LevyEnvSpec::with_two_sided_exp(double drift, double sigma, double rate, double p_up,
                                            double eta_up, double eta_down) {
    LevyEnvSpec s;
    s.drift = drift;
    s.sigma = sigma;
    s.jump_rate = rate;
    s.jump_kind = rate > 0.0 ? JumpKind::two_sided_exp : JumpKind::none;
    s.p_up = p_up;
    s.eta_up = eta_up;
    s.eta_down = eta_down;
    s.validate();
    return s;
}

LevyEnvSpec LevyEnvSpec::with_atoms(double drift, double sigma, double rate,
                                    std::vector<JumpAtom> atoms) {
    LevyEnvSpec s;
    s.drift = drift;
    s.sigma = sigma;
    s.jump_rate = rate;
    s.jump_kind = rate > 0.0 ? JumpKind::atoms : JumpKind::none;
    s.atoms = std::move(atoms);
    s.validate();
    return s;
}

EnvironmentPath EnvironmentPath::from_grid(Eigen::VectorXd times, Eigen::VectorXd values) {
    EnvironmentPath p;
    p.x0 = values.size() > 0 ? values[0] : 0.0;
    p.times = std::move(times);
    p.values = std::move(values);
    // step-function reading: every grid point is a jump of the skeleton
    p.left_values.resize(p.values.size());
    if (p.values.size() > 0) {
        p.left_values[0] = p.values[0];
        for (Eigen::Index i = 1; i < p.values.size(); ++i) p.left_values[i] = p.values[i - 1];
    }
    p.validate();
    return p;
}

void EnvironmentPath::validate() const {
    if (times.size() < 2) throw std::invalid_argument("path needs at least two grid points");
    if (times.size() != values.size() || times.size() != left_values.size())
        throw std::invalid_argument("path arrays must have equal length");
    if (times[0] != 0.0) throw std::invalid_argument("path grid must start at 0");
    for (Eigen::Index i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("path grid must be strictly increasing");
    if (values[0] != x0) throw std::invalid_argument("values[0] must equal x0");
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::supercritical: return "supercritical";
        case Regime::critical: return "critical";
        case Regime::strongly_subcritical: return "strongly_subcritical";
        case Regime::intermediate_subcritical: return "intermediate_subcritical";
        case Regime::weakly_subcritical: return "weakly_subcritical";
    }
    return "?";
}

PhiDerivatives laplace_exponent(const LevyEnvSpec& spec, double lambda) {
    // strict interiority: computations stay at or below 0.99 theta_max
    if (!(lambda >= 0.0) || lambda > 0.99 * spec.theta_max())
        throw std::domain_error(
            "lambda outside the exponential-moment working domain [0, 0.99 theta_max]");
    PhiDerivatives d;
    const JumpMgf j = jump_mgf(spec, lambda);
    const double s2 = spec.sigma * spec.sigma;
    d.phi = spec.drift * lambda + 0.5 * s2 * lambda * lambda + spec.jump_rate * (j.m - 1.0);
    d.dphi = spec.drift + s2 * lambda + spec.jump_rate * j.dm;
    d.d2phi = s2 + spec.jump_rate * j.d2m;
    return d;
}

RegimeReport classify_regime(const LevyEnvSpec& spec, double eps_sign, double gamma_tol) {
    spec.validate();
    // H1 with theta > 1, under the interiority policy
    if (!(0.99 * spec.theta_max() >= 1.0))
        throw std::domain_error("classification needs exponential moments beyond lambda = 1");
    RegimeReport rep;
    rep.dphi0 = laplace_exponent(spec, 0.0).dphi;
    rep.dphi1 = laplace_exponent(spec, 1.0).dphi;

    auto sign_of = [eps_sign](double v, const char* what) {
        if (v == 0.0) return 0;
        if (std::abs(v) <= eps_sign)
            throw boundary_regime_error(std::string(what) +
                                        " is within the sign tolerance but nonzero; regime is ambiguous");
        return v > 0.0 ? 1 : -1;
    };

    const int s0 = sign_of(rep.dphi0, "Phi'(0)");
    if (s0 > 0) {
        rep.regime = Regime::supercritical;
        return rep;
    }
    if (s0 == 0) {
        rep.regime = Regime::critical;
        return rep;
    }
    const int s1 = sign_of(rep.dphi1, "Phi'(1)");
    if (s1 < 0) {
        rep.regime = Regime::strongly_subcritical;
    } else if (s1 == 0) {
        rep.regime = Regime::intermediate_subcritical;
    } else {
        rep.regime = Regime::weakly_subcritical;
        rep.gamma = find_gamma(spec, gamma_tol);
        rep.phi_gamma = laplace_exponent(spec, *rep.gamma).phi;
    }
    return rep;
}

double find_gamma(const LevyEnvSpec& spec, double tol) {
    const double d0 = laplace_exponent(spec, 0.0).dphi;
    const double d1 = laplace_exponent(spec, 1.0).dphi;
    if (!(d0 < 0.0) || !(d1 > 0.0))
        throw numerical_error("find_gamma: Phi' has no sign change on (0,1); not weakly subcritical");
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (laplace_exponent(spec, mid).dphi < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    // Newton polish inside the bracket; Phi' is strictly increasing here
    double g = 0.5 * (lo + hi);
    for (int i = 0; i < 60; ++i) {
        const PhiDerivatives d = laplace_exponent(spec, g);
        if (std::abs(d.dphi) <= tol) return g;
        double step = d.dphi / d.d2phi;
        double next = g - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (d.dphi > 0.0)
            hi = g;
        else
            lo = g;
        g = next;
    }
    throw numerical_error("find_gamma: Newton polish did not reach the requested tolerance");
}

LevyEnvSpec esscher_tilt(const LevyEnvSpec& spec, double lambda) {
    if (!(lambda >= 0.0) || lambda > 0.99 * spec.theta_max())
        throw std::domain_error("tilt parameter outside the moment domain");
    LevyEnvSpec t = spec;
    t.drift = spec.drift + spec.sigma * spec.sigma * lambda;
    if (spec.jump_rate > 0.0) {
        const JumpMgf j = jump_mgf(spec, lambda);
        t.jump_rate = spec.jump_rate * j.m;
        if (spec.jump_kind == JumpKind::two_sided_exp) {
            t.eta_up = spec.eta_up - lambda;
            t.eta_down = spec.eta_down + lambda;
            t.p_up = spec.p_up * spec.eta_up / (spec.eta_up - lambda) / j.m;
        } else {
            for (auto& a : t.atoms) a.prob = a.prob * std::exp(lambda * a.value) / j.m;
        }
    }
    return t;
}

EnvironmentPath simulate_path(const LevyEnvSpec& spec, double x0, double horizon, double max_step,
                              RngStream& rng) {
    spec.validate();
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be > 0");

    // jump times and sizes first, then Gaussian increments in time order
    std::vector<double> jump_times, jump_sizes;
    if (spec.jump_rate > 0.0) {
        double t = rng.exponential(spec.jump_rate);
        while (t < horizon) {
            jump_times.push_back(t);
            t += rng.exponential(spec.jump_rate);
        }
        jump_sizes.reserve(jump_times.size());
        for (std::size_t k = 0; k < jump_times.size(); ++k) {
            double j = 0.0;
            if (spec.jump_kind == JumpKind::two_sided_exp) {
                if (rng.uniform() < spec.p_up)
                    j = rng.exponential(spec.eta_up);
                else
                    j = -rng.exponential(spec.eta_down);
            } else {
                const double u = rng.uniform();
                double acc = 0.0;
                j = spec.atoms.back().value;
                for (const auto& a : spec.atoms) {
                    acc += a.prob;
                    if (u < acc) {
                        j = a.value;
                        break;
                    }
                }
            }
            jump_sizes.push_back(j);
        }
    }

    std::vector<double> times{0.0}, values{x0}, lefts{x0};
    double cur_t = 0.0, cur_x = x0;
    std::size_t next_jump = 0;
    while (cur_t < horizon) {
        double target = horizon;
        bool is_jump = false;
        if (next_jump < jump_times.size() && jump_times[next_jump] < horizon) {
            target = jump_times[next_jump];
            is_jump = true;
        }
        const double gap = target - cur_t;
        const int pieces = std::max(1, static_cast<int>(std::ceil(gap / max_step)));
        const double dt = gap / pieces;
        for (int p = 0; p < pieces; ++p) {
            const double inc = spec.drift * dt + spec.sigma * std::sqrt(dt) * rng.gaussian();
            cur_t = (p + 1 == pieces) ? target : cur_t + dt;
            const double left = cur_x + inc;
            double value = left;
            if (is_jump && p + 1 == pieces) value += jump_sizes[next_jump];
            times.push_back(cur_t);
            lefts.push_back(left);
            values.push_back(value);
            cur_x = value;
        }
        if (is_jump) ++next_jump;
    }

    EnvironmentPath path;
    path.x0 = x0;
    path.times = Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
    path.values =
        Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    path.left_values =
        Eigen::Map<Eigen::VectorXd>(lefts.data(), static_cast<Eigen::Index>(lefts.size()));
    return path;
}

std::pair<double, double> running_extrema(const EnvironmentPath& path) {
    return {path.values.minCoeff(), path.values.maxCoeff()};
}

EnvironmentPath reverse_path(const EnvironmentPath& path) {
    const Eigen::Index n = path.size() - 1;
    const double T = path.horizon();
    const double xT = path.values[n];
    EnvironmentPath r;
    r.times.resize(n + 1);
    r.values.resize(n + 1);
    r.left_values.resize(n + 1);
    for (Eigen::Index j = 0; j <= n; ++j) r.times[j] = T - path.times[n - j];
    r.times[0] = 0.0;
    r.times[n] = T;
    // reflection swaps values with left limits and negates jumps; the
    // convention xi_{0^-} = xi_0 makes the last entry x_0 - x_T
    for (Eigen::Index j = 0; j <= n; ++j) r.values[j] = path.left_values[n - j] - xT;
    r.left_values[0] = r.values[0];
    for (Eigen::Index j = 1; j <= n; ++j) r.left_values[j] = path.values[n - j] - xT;
    r.x0 = r.values[0];
    return r;
}

double esscher_weight(const EnvironmentPath& path, double lambda, double phi_lambda) {
    return std::exp(-lambda * (path.terminal() - path.x0) + path.horizon() * phi_lambda);
}

namespace {

double one_sided_weight(const EnvironmentPath& path, double level, double sigma, bool above) {
    const Eigen::Index n = path.size();
    const double sgn = above ? 1.0 : -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(sgn * (path.values[i] - level) > 0.0)) return 0.0;
        if (i > 0 && !(sgn * (path.left_values[i] - level) > 0.0)) return 0.0;
    }
    if (sigma == 0.0) return 1.0;
    double w = 1.0;
    const double s2 = sigma * sigma;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double a = sgn * (path.values[i] - level);
        const double b = sgn * (path.left_values[i + 1] - level);
        const double dt = path.times[i + 1] - path.times[i];
        w *= -std::expm1(-2.0 * a * b / (s2 * dt));
        if (w == 0.0) return 0.0;
    }
    return w;
}

}  // namespace

double stay_above_weight(const EnvironmentPath& path, double level, double sigma) {
    return one_sided_weight(path, level, sigma, true);
}

double stay_below_weight(const EnvironmentPath& path, double level, double sigma) {
    return one_sided_weight(path, level, sigma, false);
}

}  // namespace cble
