#include "cble/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "cble/config.hpp"
#include "cble/errors.hpp"
#include "cble/fluctuation.hpp"
#include "cble/montecarlo.hpp"
#include "cble/quenched.hpp"
#include "cble/sde.hpp"

namespace cble {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSeed = 20240915;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return buf;
}

void write_points_csv(const std::string& out_dir, const std::string& name,
                      const std::vector<DecayPoint>& pts) {
    if (out_dir.empty()) return;
    std::ofstream f(out_dir + "/" + name);
    if (!f) return;
    f << "t,p_hat,stderr,n,ess,y\n";
    f.precision(17);
    for (const auto& p : pts)
        f << p.t << "," << p.p.mean << "," << p.p.se << "," << p.p.n << "," << p.p.ess << ","
          << std::log(p.p.mean) + 1.5 * std::log(p.t) << "\n";
}

// random piecewise-constant environment for the oracle comparison
EnvironmentPath random_step_path(RngStream& rng) {
    const int segments = 2 + static_cast<int>(rng.uniform() * 63.0);
    const double horizon = 0.5 + 1.5 * rng.uniform();
    Eigen::VectorXd times(segments + 1), values(segments + 1);
    Eigen::VectorXd gaps(segments);
    double total = 0.0;
    for (int i = 0; i < segments; ++i) {
        gaps[i] = 0.05 + rng.uniform();
        total += gaps[i];
    }
    times[0] = 0.0;
    for (int i = 0; i < segments; ++i) times[i + 1] = times[i] + gaps[i] * horizon / total;
    times[segments] = horizon;
    for (int i = 0; i <= segments; ++i) values[i] = -3.0 + 6.0 * rng.uniform();
    return EnvironmentPath::from_grid(std::move(times), std::move(values));
}

struct Ctx {
    int threads = 1;
    std::string out_dir;
    LevyEnvSpec bench = LevyEnvSpec::brownian(-0.5, 1.0);
    BranchingMechanism mech = BranchingMechanism::stable(1.0, 0.5);
    double gamma = 0.0;
    double phi_gamma = 0.0;
    // shared renewal tables for criteria 6 and 9
    RenewalEstimate ratio_table;
    RenewalEstimate mu_table;
    bool have_tables = false;
};

CriterionResult crit1_stable_oracle(Ctx& ctx) {
    Timer timer;
    CriterionResult r{1, "stable-oracle ODE equivalence", "max rel diff <= 1e-6", 0, 1e-6};
    RngStream rng(kSeed, 99, 0);
    const BranchingMechanism& mech = ctx.mech;
    double worst = 0.0;
    for (int e = 0; e < 100; ++e) {
        const EnvironmentPath path = random_step_path(rng);
        const double exp_int = exp_functional(path, mech.stable_beta);
        for (double lambda : {0.1, 1.0, 10.0, kInf}) {
            const double oracle = stable_v(mech.stable_c, mech.stable_beta, lambda, exp_int);
            const double got = std::isinf(lambda)
                                   ? v_infinity_ladder(mech, path, 1e-7).v0
                                   : solve_v(mech, path, lambda, 1e-9).v0;
            worst = std::max(worst, std::abs(got - oracle) / oracle);
        }
    }
    r.achieved = worst;
    r.pass = worst <= r.tolerance && timer.elapsed() < 10.0;
    r.seconds = timer.elapsed();
    r.detail = "runtime limit 10 s";
    return r;
}

CriterionResult crit2_csbp_reduction(Ctx& ctx) {
    Timer timer;
    CriterionResult r{2, "classical CSBP reduction", "|p - (1 - e^-4)| <= 1e-9", 0, 1e-9};
    const LevyEnvSpec frozen = LevyEnvSpec::brownian(0.0, 0.0);
    const McEstimate est =
        estimate_survival_direct(ctx.mech, frozen, 1.0, 1.0, 0.02, 64, kSeed, ctx.threads);
    const double target = -std::expm1(-4.0);
    r.achieved = std::abs(est.mean - target);
    r.pass = r.achieved <= r.tolerance && est.se == 0.0;
    r.seconds = timer.elapsed();
    r.detail = "p=" + fmt(est.mean) + " stderr=" + fmt(est.se);
    return r;
}

CriterionResult crit3_benchmark_constants(Ctx& ctx) {
    Timer timer;
    CriterionResult r{3, "benchmark constants", "gamma, Phi(gamma), A_gamma, regime", 0, 1e-10};
    const RegimeReport rep = classify_regime(ctx.bench);
    const double gamma = rep.gamma.value_or(0.0);
    const double phi_g = rep.phi_gamma.value_or(1.0);
    const double a = a_gamma(ctx.bench, gamma);
    const double e_gamma = std::abs(gamma - 0.5);
    const double e_phi = std::abs(phi_g + 0.125);
    const double e_a = std::abs(a - 0.3989423);
    const bool regime_ok = rep.regime == Regime::weakly_subcritical;
    r.achieved = std::max(e_gamma, e_phi);
    r.pass = e_gamma <= 1e-10 && e_phi <= 1e-10 && e_a <= 1e-6 && regime_ok;
    r.seconds = timer.elapsed();
    r.detail = "gamma=" + fmt(gamma) + " phi=" + fmt(phi_g) + " A=" + fmt(a) + " regime=" +
               to_string(rep.regime);
    ctx.gamma = gamma;
    ctx.phi_gamma = phi_g;
    return r;
}

CriterionResult crit4_esscher_mass(Ctx& ctx) {
    Timer timer;
    CriterionResult r{4, "Esscher total mass", "|mass - 1| <= 4 stderr at T in {10,40}", 0, 0};
    bool pass = true;
    std::ostringstream detail;
    double worst_sigmas = 0.0;
    for (double T : {10.0, 40.0}) {
        const McEstimate m =
            estimate_is_total_mass(ctx.bench, T, 0.02, 100000, ctx.gamma, kSeed + 4, ctx.threads);
        const double sigmas = std::abs(m.mean - 1.0) / m.se;
        worst_sigmas = std::max(worst_sigmas, sigmas);
        pass = pass && sigmas <= 4.0;
        detail << "T=" << T << ": mass=" << fmt(m.mean) << " se=" << fmt(m.se) << "; ";
    }
    r.achieved = worst_sigmas;
    r.tolerance = 4.0;
    r.pass = pass && timer.elapsed() < 60.0;
    r.seconds = timer.elapsed();
    r.detail = detail.str() + "runtime limit 60 s";
    return r;
}

CriterionResult crit5_harmonicity(Ctx& ctx) {
    Timer timer;
    CriterionResult r{5, "harmonicity of U-hat", "|mean - x| <= 4 stderr at x in {0.5,1,2}", 0, 4.0};
    const LevyEnvSpec tilted = esscher_tilt(ctx.bench, ctx.gamma);
    bool pass = true;
    double worst = 0.0;
    std::ostringstream detail;
    for (double x : {0.5, 1.0, 2.0}) {
        const McEstimate m = harmonic_mean_up(tilted, x, 1.0, 1.0 / 512.0, brownian_harmonic(),
                                              100000, kSeed + 5, ctx.threads);
        const double sigmas = std::abs(m.mean - x) / m.se;
        worst = std::max(worst, sigmas);
        pass = pass && sigmas <= 4.0;
        detail << "x=" << x << ": mean=" << fmt(m.mean) << " se=" << fmt(m.se) << "; ";
    }
    r.achieved = worst;
    r.pass = pass;
    r.seconds = timer.elapsed();
    r.detail = detail.str();
    return r;
}

CriterionResult crit6_mu_gamma(Ctx& ctx) {
    Timer timer;
    CriterionResult r{6, "mu_gamma normalization", "mass = 1 +- 0.05 and U-hat(2)/U-hat(1) = 2 +- 4 stderr",
                      0, 0};
    const LevyEnvSpec tilted = esscher_tilt(ctx.bench, ctx.gamma);

    Eigen::VectorXd ratio_grid(10);
    for (int j = 0; j < 10; ++j) ratio_grid[j] = 0.25 * (j + 1);
    ctx.ratio_table =
        renewal_estimate(tilted, ratio_grid, 1e-3, 48.0, 6000, kSeed + 6, ctx.threads);

    Eigen::VectorXd mu_grid(41);
    for (int j = 0; j < 41; ++j) mu_grid[j] = 0.25 * j;
    ctx.mu_table = renewal_estimate(tilted, mu_grid, 2e-3, 64.0, 4000, kSeed + 7, ctx.threads);
    ctx.have_tables = true;

    // ratio test on the descending table (x = 1 and x = 2 are entries 3 and 7)
    const int j1 = 3, j2 = 7;
    const double u1 = ctx.ratio_table.u_hat[j1];
    const double u2 = ctx.ratio_table.u_hat[j2];
    const double ratio = u2 / u1;
    const auto& cov = ctx.ratio_table.cov_u_hat;
    const double var_ratio =
        (cov(j2, j2) - 2.0 * ratio * cov(j1, j2) + ratio * ratio * cov(j1, j1)) / (u1 * u1);
    const double se_ratio = std::sqrt(std::max(0.0, var_ratio));
    const double ratio_sigmas = std::abs(ratio - 2.0) / se_ratio;

    const KappaEstimate kap = kappa_gamma(ctx.mu_table, ctx.gamma);
    const MuGammaSampler mu = mu_gamma(ctx.mu_table, ctx.gamma);
    const double mass = mu.mass_check(kap.kappa);

    r.achieved = ratio_sigmas;
    r.tolerance = 4.0;
    r.pass = ratio_sigmas <= 4.0 && std::abs(mass - 1.0) <= 0.05;
    r.seconds = timer.elapsed();
    r.detail = "ratio=" + fmt(ratio) + " se=" + fmt(se_ratio) + " mass=" + fmt(mass) +
               " kappa=" + fmt(kap.kappa);
    return r;
}

CriterionResult crit7_headline_decay(Ctx& ctx) {
    Timer timer;
    CriterionResult r{7, "headline decay reproduction",
                      "slope = -0.125 +- 0.01, drift < 5%, rel stderr < 5%", 0, 0.01};
    const std::vector<double> t_grid{10, 20, 30, 40, 50, 60, 70, 80};
    const auto pts = survival_decay_study(ctx.mech, ctx.bench, 1.0, t_grid, 0.02, 100000, true,
                                          ctx.gamma, kSeed + 8, ctx.threads);
    write_points_csv(ctx.out_dir, "acceptance_decay.csv", pts);
    const DecayFit fit = decay_fit(pts);
    double worst_rel = 0.0;
    for (const auto& p : pts) worst_rel = std::max(worst_rel, p.p.se / p.p.mean);
    const double slope_err = std::abs(fit.slope + 0.125);
    r.achieved = slope_err;
    r.pass = slope_err <= 0.01 && fit.plateau_drift < 0.05 && worst_rel < 0.05;
    r.seconds = timer.elapsed();
    r.detail = "slope=" + fmt(fit.slope) + " intercept=" + fmt(fit.intercept) + " drift=" +
               fmt(fit.plateau_drift) + " max rel se=" + fmt(worst_rel) +
               " runtime target 600 s";
    return r;
}

CriterionResult crit8_first_passage(Ctx& ctx) {
    Timer timer;
    CriterionResult r{8, "first-passage asymptotic",
                      "slope = -0.125 +- 0.01, intercept ratio = 2 e^0.5 +- 15%", 0, 0.01};
    const std::vector<double> t_grid{10, 20, 30, 40, 50, 60, 70, 80};
    const InfAsymptotic run1 = estimate_inf_asymptotic(ctx.bench, 1.0, t_grid, 0.02, 100000,
                                                       ctx.gamma, kSeed + 9, ctx.threads);
    const InfAsymptotic run2 = estimate_inf_asymptotic(ctx.bench, 2.0, t_grid, 0.02, 100000,
                                                       ctx.gamma, kSeed + 10, ctx.threads);
    write_points_csv(ctx.out_dir, "acceptance_inf_x1.csv", run1.points);
    write_points_csv(ctx.out_dir, "acceptance_inf_x2.csv", run2.points);
    const double slope_err = std::abs(run1.fit.slope + 0.125);
    const double ratio = std::exp(run2.fit.intercept - run1.fit.intercept);
    const double target = 2.0 * std::exp(0.5);
    const double ratio_err = std::abs(ratio / target - 1.0);
    r.achieved = slope_err;
    r.pass = slope_err <= 0.01 && ratio_err <= 0.15;
    r.seconds = timer.elapsed();
    r.detail = "slope=" + fmt(run1.fit.slope) + " ratio=" + fmt(ratio) + " target=" + fmt(target) +
               " ratio err=" + fmt(ratio_err);
    return r;
}

CriterionResult crit9_b_crossvalidation(Ctx& ctx) {
    Timer timer;
    CriterionResult r{9, "b cross-validation (stable case)",
                      "|b_ratio - int G dmu| <= 4 joint stderr at (z=1, x=2, T=40)", 0, 4.0};
    const MuGammaSampler mu = mu_gamma(ctx.mu_table, ctx.gamma);
    const BEstimate b =
        estimate_b(ctx.mech, ctx.bench, 1.0, 2.0, 40.0, 0.01, 20000, ctx.gamma, kSeed + 11,
                   ctx.threads);
    const GEstimate g =
        stable_G_mu(1.0, 2.0, mu, ctx.bench, ctx.gamma, ctx.mech.stable_beta, ctx.mech.stable_c,
                    40.0, 0.01, brownian_harmonic(), brownian_harmonic(), 20000, kSeed + 12,
                    ctx.threads);
    const double joint = std::sqrt(b.value.se * b.value.se + g.est.se * g.est.se);
    const double sigmas = std::abs(b.value.mean - g.est.mean) / joint;
    r.achieved = sigmas;
    r.pass = sigmas <= 4.0;
    r.seconds = timer.elapsed();
    r.detail = "b=" + fmt(b.value.mean) + "(se " + fmt(b.value.se) + ", T/2 " +
               fmt(b.value_half_t) + ") G-route=" + fmt(g.est.mean) + "(se " + fmt(g.est.se) +
               ") tails up/down=" + fmt(g.tail_frac_up) + "/" + fmt(g.tail_frac_down);
    return r;
}

CriterionResult crit10_sde_crosscheck(Ctx& ctx) {
    Timer timer;
    CriterionResult r{10, "quenched martingale and Laplace cross-check",
                      "martingale within band, discrepancy ratio in [1.5,3]", 0, 0};
    const BranchingMechanism feller = BranchingMechanism::diffusive(1.0);
    bool pass = true;
    std::ostringstream detail;
    const double dt_mart = 1e-3;
    for (double z : {1.0, 2.0}) {
        const McEstimate m = martingale_annealed_check(feller, ctx.bench, z, 1.0, dt_mart, 0.02,
                                                       100000, kSeed + 13, ctx.threads);
        // band: 4 stderr plus the O(dt) splitting allowance 10 z dt
        const double band = 4.0 * m.se + 10.0 * z * dt_mart;
        const bool ok = std::abs(m.mean - z) <= band;
        pass = pass && ok;
        detail << "z=" << z << ": mean=" << fmt(m.mean) << " band=" << fmt(band) << "; ";
    }
    // the branching-substep bias is ~ -0.17 dt here; the coarse pair keeps it
    // an order of magnitude above the Monte Carlo noise floor
    const McEstimate d1 = laplace_crosscheck(feller, ctx.bench, 1.0, 1.0, 1.0, 0.08, 0.25, 400000,
                                             kSeed + 14, ctx.threads);
    const McEstimate d2 = laplace_crosscheck(feller, ctx.bench, 1.0, 1.0, 1.0, 0.04, 0.25, 400000,
                                             kSeed + 14, ctx.threads);
    const double ratio = std::abs(d1.mean) / std::abs(d2.mean);
    pass = pass && ratio >= 1.5 && ratio <= 3.0;
    r.achieved = ratio;
    r.pass = pass;
    r.seconds = timer.elapsed();
    r.detail = detail.str() + "d(0.02)=" + fmt(d1.mean) + " d(0.01)=" + fmt(d2.mean) +
               " ratio=" + fmt(ratio);
    return r;
}

CriterionResult crit11_reproducibility(Ctx& ctx) {
    Timer timer;
    CriterionResult r{11, "reproducibility across thread counts", "bitwise-identical CSV", 0, 0};
    auto run_once = [&](int threads) {
        std::ostringstream csv;
        csv.precision(17);
        const McEstimate s = estimate_survival_is(ctx.mech, ctx.bench, 1.0, 5.0, 0.02, 20000,
                                                  ctx.gamma, kSeed + 15, threads);
        csv << s.mean << "," << s.se << "," << s.ess << "\n";
        Eigen::VectorXd grid(4);
        grid << 0.5, 1.0, 1.5, 2.0;
        const LevyEnvSpec tilted = esscher_tilt(ctx.bench, ctx.gamma);
        const RenewalEstimate ren =
            renewal_estimate(tilted, grid, 2e-3, 16.0, 2000, kSeed + 16, threads);
        for (int j = 0; j < 4; ++j) csv << ren.u[j] << "," << ren.u_hat[j] << "\n";
        return csv.str();
    };
    const std::string one = run_once(1);
    const std::string two = run_once(2);
    const std::string four = run_once(4);
    r.pass = one == two && two == four;
    r.achieved = r.pass ? 0.0 : 1.0;
    r.seconds = timer.elapsed();
    r.detail = r.pass ? "1/2/4 threads bitwise identical" : "thread counts disagree";
    return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(int threads, const std::string& out_dir) {
    Ctx ctx;
    ctx.threads = threads;
    ctx.out_dir = out_dir;
    std::vector<CriterionResult> out;
    out.push_back(crit1_stable_oracle(ctx));
    out.push_back(crit2_csbp_reduction(ctx));
    out.push_back(crit3_benchmark_constants(ctx));
    out.push_back(crit4_esscher_mass(ctx));
    out.push_back(crit5_harmonicity(ctx));
    out.push_back(crit6_mu_gamma(ctx));
    out.push_back(crit7_headline_decay(ctx));
    out.push_back(crit8_first_passage(ctx));
    out.push_back(crit9_b_crossvalidation(ctx));
    out.push_back(crit10_sde_crosscheck(ctx));
    out.push_back(crit11_reproducibility(ctx));
    return out;
}

std::string acceptance_report_json(const std::vector<CriterionResult>& results) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : results) {
        doc.push_back({{"criterion", r.id},
                       {"name", r.name},
                       {"target", r.target},
                       {"achieved", r.achieved},
                       {"tolerance", r.tolerance},
                       {"pass", r.pass},
                       {"seconds", r.seconds},
                       {"detail", r.detail}});
    }
    return doc.dump(2);
}

}  // namespace cble
