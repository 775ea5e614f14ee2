#include "cble/quenched.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cble/errors.hpp"

namespace cble {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr long kStepBudget = 1000000;

// Cash-Karp embedded 4(5) pair for the autonomous segment ODE w' = -f(w).
// f(w) = psi0(w * scale) / scale with scale = e^{-c} frozen per segment.
template <class F>
double integrate_segment(const F& f, double w, double duration, double tol, OdeDiagnostics& diag) {
    static constexpr double a2 = 0.2, a3 = 0.3, a4 = 0.6, a5 = 1.0, a6 = 0.875;
    static constexpr double b21 = 0.2;
    static constexpr double b31 = 3.0 / 40.0, b32 = 9.0 / 40.0;
    static constexpr double b41 = 0.3, b42 = -0.9, b43 = 1.2;
    static constexpr double b51 = -11.0 / 54.0, b52 = 2.5, b53 = -70.0 / 27.0, b54 = 35.0 / 27.0;
    static constexpr double b61 = 1631.0 / 55296.0, b62 = 175.0 / 512.0, b63 = 575.0 / 13824.0,
                            b64 = 44275.0 / 110592.0, b65 = 253.0 / 4096.0;
    static constexpr double c1 = 37.0 / 378.0, c3 = 250.0 / 621.0, c4 = 125.0 / 594.0,
                            c6 = 512.0 / 1771.0;
    static constexpr double d1 = c1 - 2825.0 / 27648.0, d3 = c3 - 18575.0 / 48384.0,
                            d4 = c4 - 13525.0 / 55296.0, d5 = -277.0 / 14336.0,
                            d6 = c6 - 0.25;
    (void)a2; (void)a3; (void)a4; (void)a5; (void)a6;

    double remaining = duration;
    double k1 = -f(w);
    double h = remaining;
    if (k1 != 0.0) h = std::min(remaining, 0.1 * (std::abs(w) + 1e-300) / std::abs(k1));

    while (remaining > 0.0) {
        if (diag.steps + diag.rejects > kStepBudget)
            throw numerical_error("solve_v: step budget exhausted (steps=" +
                                  std::to_string(diag.steps) +
                                  ", rejects=" + std::to_string(diag.rejects) + ")");
        h = std::min(h, remaining);
        const double k2 = -f(w + h * b21 * k1);
        const double k3 = -f(w + h * (b31 * k1 + b32 * k2));
        const double k4 = -f(w + h * (b41 * k1 + b42 * k2 + b43 * k3));
        const double k5 = -f(w + h * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4));
        const double k6 = -f(w + h * (b61 * k1 + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5));
        const double w5 = w + h * (c1 * k1 + c3 * k3 + c4 * k4 + c6 * k6);
        const double err = std::abs(h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6));
        const double scale = tol * std::max(std::abs(w), std::abs(w5)) + 1e-300;
        if (w5 >= 0.0 && err <= scale) {
            remaining -= h;
            w = w5;
            ++diag.steps;
            k1 = -f(w);
            const double grow = err > 0.0 ? 0.9 * std::pow(scale / err, 0.2) : 5.0;
            h *= std::clamp(grow, 0.2, 5.0);
        } else {
            ++diag.rejects;
            if (w5 < 0.0) {
                h *= 0.25;
            } else {
                const double shrink = 0.9 * std::pow(scale / err, 0.25);
                h *= std::clamp(shrink, 0.1, 0.9);
            }
        }
        if (!(h > 0.0) || !std::isfinite(w))
            throw numerical_error("solve_v: step size underflow or non-finite state");
    }
    return w;
}

}  // namespace

double exp_functional(const EnvironmentPath& path, double beta, bool raw) {
    if (!(beta > 0.0)) throw std::domain_error("exp_functional requires beta > 0");
    const double shift = raw ? 0.0 : path.x0;
    double acc = 0.0;
    const Eigen::Index n = path.size();
    for (Eigen::Index i = 0; i + 1 < n; ++i)
        acc += std::exp(-beta * (path.values[i] - shift)) * (path.times[i + 1] - path.times[i]);
    return acc;
}

QuenchedSolution solve_v(const BranchingMechanism& mech, const EnvironmentPath& path,
                         double lambda, double tol, bool raw) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::domain_error("solve_v requires finite lambda >= 0");
    mech.validate();
    QuenchedSolution sol;
    sol.lambda = lambda;
    sol.tol = tol;
    if (lambda == 0.0) return sol;

    const double shift = raw ? 0.0 : path.x0;
    double w = lambda;
    const Eigen::Index n = path.size();
    for (Eigen::Index i = n - 2; i >= 0; --i) {
        const double scale = std::exp(-(path.values[i] - shift));
        const double duration = path.times[i + 1] - path.times[i];
        auto rhs = [&](double v) { return psi0(mech, std::max(v, 0.0) * scale) / scale; };
        w = integrate_segment(rhs, w, duration, tol, sol.diag);
    }
    sol.v0 = w;
    return sol;
}

double stable_v(double c, double beta, double lambda, double exp_int) {
    if (!(c > 0.0) || !(beta > 0.0 && beta <= 1.0))
        throw std::domain_error("stable_v requires C > 0 and beta in (0,1]");
    if (!(exp_int >= 0.0)) throw std::domain_error("stable_v requires a nonnegative functional");
    const double bci = beta * c * exp_int;
    if (std::isinf(lambda)) {
        if (!(exp_int > 0.0)) throw std::domain_error("stable_v at lambda=inf needs I > 0");
        return std::pow(bci, -1.0 / beta);
    }
    if (!(lambda >= 0.0)) throw std::domain_error("stable_v requires lambda >= 0");
    if (lambda == 0.0) return 0.0;
    return std::pow(std::pow(lambda, -beta) + bci, -1.0 / beta);
}

QuenchedSolution v_infinity(const BranchingMechanism& mech, const EnvironmentPath& path,
                            double tol) {
    if (!check_grey(mech))
        throw std::domain_error("v_infinity requires Grey's condition; this mechanism fails it");
    if (mech.kind == MechKind::stable) {
        QuenchedSolution sol;
        sol.lambda_infinite = true;
        sol.tol = tol;
        sol.v0 = stable_v(mech.stable_c, mech.stable_beta, kInf,
                          exp_functional(path, mech.stable_beta));
        return sol;
    }
    return v_infinity_ladder(mech, path, tol);
}

QuenchedSolution v_infinity_ladder(const BranchingMechanism& mech, const EnvironmentPath& path,
                                   double tol) {
    if (!check_grey(mech))
        throw std::domain_error("v_infinity requires Grey's condition; this mechanism fails it");
    constexpr int kMax = 12;
    QuenchedSolution best;
    best.lambda_infinite = true;
    best.tol = tol;

    double v_prev = 0.0, d_prev = 0.0, aitken_prev = 0.0;
    bool have_prev = false, have_aitken = false;
    for (int k = 1; k <= kMax; ++k) {
        const double lambda = std::pow(10.0, k);
        QuenchedSolution s = solve_v(mech, path, lambda, tol);
        best.diag.steps += s.diag.steps;
        best.diag.rejects += s.diag.rejects;
        const double v = s.v0;
        if (have_prev) {
            const double d = v - v_prev;
            if (std::abs(d) <= tol * std::abs(v)) {
                best.v0 = v;
                return best;
            }
            if (d_prev > d && d > 0.0) {
                const double aitken = v + d * d / (d_prev - d);
                if (have_aitken && std::abs(aitken - aitken_prev) <= tol * std::abs(aitken)) {
                    best.v0 = aitken;
                    return best;
                }
                aitken_prev = aitken;
                have_aitken = true;
            }
            d_prev = d;
        } else {
            d_prev = 0.0;
        }
        v_prev = v;
        have_prev = true;
    }
    throw numerical_error("v_infinity: ladder exhausted at lambda = 10^12 without convergence");
}

double survival_prob_quenched(const BranchingMechanism& mech, const EnvironmentPath& path,
                              double z) {
    if (!(z >= 0.0)) throw std::domain_error("survival probability requires z >= 0");
    if (z == 0.0) return 0.0;
    const double v = v_infinity(mech, path).v0;
    return -std::expm1(-z * v);
}

double quenched_laplace(const BranchingMechanism& mech, const EnvironmentPath& path, double z,
                        double lambda) {
    if (!(z >= 0.0)) throw std::domain_error("quenched_laplace requires z >= 0");
    if (lambda == 0.0 || z == 0.0) return 1.0;
    return std::exp(-z * solve_v(mech, path, lambda).v0);
}

bool v_upper_bound_check(const BranchingMechanism& mech, const EnvironmentPath& path, double tol) {
    const RvMetadata rv = rv_metadata(mech);
    if (!(rv.ell_global_lower > 0.0))
        throw std::domain_error("v_upper_bound_check needs a positive global lower bound on ell");
    const double bound =
        stable_v(rv.ell_global_lower, rv.beta, kInf, exp_functional(path, rv.beta));
    const double v = v_infinity(mech, path).v0;
    return v <= bound * (1.0 + tol);
}

}  // namespace cble
