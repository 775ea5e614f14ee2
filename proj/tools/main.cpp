#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "cble/acceptance.hpp"
#include "cble/config.hpp"
#include "cble/errors.hpp"
#include "cble/fluctuation.hpp"
#include "cble/montecarlo.hpp"
#include "cble/quenched.hpp"
#include "cble/sde.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitStatistical = 4;

struct GlobalArgs {
    std::string config_path;
    std::optional<long> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
};

cble::ExperimentConfig load_config(const GlobalArgs& g) {
    cble::ExperimentConfig cfg;
    if (!g.config_path.empty()) {
        std::ifstream f(g.config_path);
        if (!f) throw cble::config_error("cannot open config file: " + g.config_path, {});
        std::stringstream buf;
        buf << f.rdbuf();
        cfg = cble::parse_config(buf.str());
    } else {
        cfg = cble::ExperimentConfig::benchmark();
    }
    if (g.seed) cfg.seed = static_cast<std::uint64_t>(*g.seed);
    if (g.threads) cfg.threads = *g.threads;
    if (g.out) cfg.out_dir = *g.out;
    return cfg;
}

std::ofstream open_out(const cble::ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream f(cfg.out_dir + "/" + name);
    f.precision(17);
    return f;
}

void echo_config(const cble::ExperimentConfig& cfg) {
    std::ofstream f = open_out(cfg, "resolved_config.txt");
    f << cble::emit_config(cfg);
}

void write_decay_csv(std::ofstream& f, const std::vector<cble::DecayPoint>& pts) {
    f << "t,p_hat,stderr,n,ess,y\n";
    for (const auto& p : pts) {
        const double y = p.p.mean > 0.0 ? std::log(p.p.mean) + 1.5 * std::log(p.t) : 0.0;
        f << p.t << "," << p.p.mean << "," << p.p.se << "," << p.p.n << "," << p.p.ess << "," << y
          << "\n";
    }
}

double require_gamma(const cble::ExperimentConfig& cfg) {
    return cble::find_gamma(cfg.env, cfg.gamma_tol);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-state branching processes in Levy environments"};
    app.require_subcommand(1);
    GlobalArgs g;
    app.add_option("--config", g.config_path, "path to a study config file");
    long seed_opt = 0;
    int threads_opt = 0;
    std::string out_opt;
    auto* so = app.add_option("--seed", seed_opt, "override the config seed");
    auto* to = app.add_option("--threads", threads_opt, "override the worker count");
    auto* oo = app.add_option("--out", out_opt, "override the output directory");

    auto* classify = app.add_subcommand("classify", "regime classification of the environment");
    auto* gamma_cmd = app.add_subcommand("gamma", "root of Phi' on (0,1)");

    auto* survival = app.add_subcommand("survival", "annealed survival probability at one horizon");
    double sv_t = 0;
    long sv_n = 0;
    double sv_z = -1;
    bool sv_is = false;
    survival->add_option("--t", sv_t, "horizon");
    survival->add_option("--n", sv_n, "paths");
    survival->add_option("--z", sv_z, "initial mass");
    survival->add_flag("--is", sv_is, "use the Esscher importance sampler");

    auto* decay = app.add_subcommand("decay-fit", "survival decay study and weighted fit");
    std::string decay_grid;
    long decay_n = 0;
    bool decay_direct = false;
    decay->add_option("--t-grid", decay_grid, "horizons a:b:step");
    decay->add_option("--n", decay_n, "paths per point");
    decay->add_flag("--direct", decay_direct, "use the direct estimator instead of the tilt");

    auto* renewal = app.add_subcommand("renewal", "renewal-function tables of the tilted walk");
    std::string ren_grid;
    double ren_h = 0;
    long ren_paths = 0;
    double ren_tlad = 0;
    renewal->add_option("--x-grid", ren_grid, "grid a:b:step");
    renewal->add_option("--h", ren_h, "skeleton step");
    renewal->add_option("--paths", ren_paths, "walks");
    renewal->add_option("--t-lad", ren_tlad, "walk horizon");

    auto* bconst = app.add_subcommand("b-const", "conditioned survival constant b(z,x)");
    double b_x = 0, b_t = 0;
    long b_n = 0;
    std::string b_grid;
    bconst->add_option("--x", b_x, "environment start");
    bconst->add_option("--t", b_t, "horizon proxy");
    bconst->add_option("--n", b_n, "paths");
    bconst->add_option("--x-grid", b_grid, "x grid a:b:step for the decay-constant sequence");

    auto* infasym = app.add_subcommand("inf-asymp", "running-infimum decay study");
    double inf_x = 0;
    std::string inf_grid;
    long inf_n = 0;
    infasym->add_option("--x", inf_x, "environment start");
    infasym->add_option("--t-grid", inf_grid, "horizons a:b:step");
    infasym->add_option("--n", inf_n, "paths per point");

    auto* simz = app.add_subcommand("simulate-z", "pathwise SDE simulation of Z");
    double simz_dt = 0, simz_t = 0;
    long simz_paths = 0;
    bool simz_dump_env = false;
    simz->add_option("--dt", simz_dt, "branching substep");
    simz->add_option("--t", simz_t, "horizon");
    simz->add_option("--paths", simz_paths, "paths to dump");
    simz->add_flag("--dump-env", simz_dump_env, "also write two-column environment CSVs");

    auto* validate = app.add_subcommand("validate", "run the full validation suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (so->count() > 0) g.seed = seed_opt;
        if (to->count() > 0) g.threads = threads_opt;
        if (oo->count() > 0) g.out = out_opt;
        cble::ExperimentConfig cfg = load_config(g);

        if (classify->parsed()) {
            const cble::RegimeReport rep = cble::classify_regime(cfg.env, cfg.eps_sign,
                                                                 cfg.gamma_tol);
            std::ostringstream line;
            line << cble::to_string(rep.regime);
            if (rep.gamma) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), " gamma=%g phi_gamma=%g", *rep.gamma,
                              *rep.phi_gamma);
                line << buf;
            }
            std::cout << line.str() << "\n";
            return 0;
        }
        if (gamma_cmd->parsed()) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.15g", require_gamma(cfg));
            std::cout << buf << "\n";
            return 0;
        }
        if (survival->parsed()) {
            if (sv_t > 0) cfg.t = sv_t;
            if (sv_n > 0) cfg.n_paths = sv_n;
            if (sv_z >= 0) cfg.z = sv_z;
            echo_config(cfg);
            cble::McEstimate est;
            if (sv_is) {
                est = cble::estimate_survival_is(cfg.mech, cfg.env, cfg.z, cfg.t, cfg.max_step,
                                                 cfg.n_paths, require_gamma(cfg), cfg.seed,
                                                 cfg.threads);
            } else {
                est = cble::estimate_survival_direct(cfg.mech, cfg.env, cfg.z, cfg.t, cfg.max_step,
                                                     cfg.n_paths, cfg.seed, cfg.threads);
            }
            std::ofstream f = open_out(cfg, "survival.csv");
            write_decay_csv(f, {{cfg.t, est}});
            std::printf("survival t=%g z=%g p_hat=%.8g stderr=%.3g ess=%.4g (%.1fs)\n", cfg.t,
                        cfg.z, est.mean, est.se, est.ess, est.wall_s);
            return 0;
        }
        if (decay->parsed()) {
            if (!decay_grid.empty()) cfg.t_grid = cble::parse_range(decay_grid);
            if (decay_n > 0) cfg.n_paths = decay_n;
            echo_config(cfg);
            const double gamma = decay_direct ? 0.0 : require_gamma(cfg);
            const auto pts = cble::survival_decay_study(cfg.mech, cfg.env, cfg.z, cfg.t_grid,
                                                        cfg.max_step, cfg.n_paths, !decay_direct,
                                                        gamma, cfg.seed, cfg.threads);
            std::ofstream f = open_out(cfg, "decay.csv");
            write_decay_csv(f, pts);
            const cble::DecayFit fit = cble::decay_fit(pts);
            std::printf("decay-fit slope=%.6g (se %.2g) intercept=%.6g (se %.2g) drift=%.3g\n",
                        fit.slope, fit.slope_se, fit.intercept, fit.intercept_se,
                        fit.plateau_drift);
            return 0;
        }
        if (renewal->parsed()) {
            if (!ren_grid.empty()) cfg.x_grid = cble::parse_range(ren_grid);
            if (ren_h > 0) cfg.renewal_h = ren_h;
            if (ren_paths > 0) cfg.n_paths = ren_paths;
            if (ren_tlad > 0) cfg.t_lad = ren_tlad;
            echo_config(cfg);
            const double gamma = require_gamma(cfg);
            const cble::LevyEnvSpec tilted = cble::esscher_tilt(cfg.env, gamma);
            Eigen::VectorXd grid(static_cast<Eigen::Index>(cfg.x_grid.size()));
            for (std::size_t i = 0; i < cfg.x_grid.size(); ++i)
                grid[static_cast<Eigen::Index>(i)] = cfg.x_grid[i];
            const cble::RenewalEstimate est = cble::renewal_estimate(
                tilted, grid, cfg.renewal_h, cfg.t_lad, cfg.n_paths, cfg.seed, cfg.threads);
            std::ofstream f = open_out(cfg, "renewal.csv");
            f << "x,u,u_hat,stderr\n";
            for (Eigen::Index j = 0; j < grid.size(); ++j)
                f << est.x[j] << "," << est.u[j] << "," << est.u_hat[j] << "," << est.u_hat_se[j]
                  << "\n";
            std::printf("renewal %s: slopes u=%.5g u_hat=%.5g active=%.3g/%.3g\n",
                        est.norm_tag.c_str(), est.slope_u, est.slope_u_hat, est.active_frac_asc,
                        est.active_frac_desc);
            return 0;
        }
        if (bconst->parsed()) {
            if (b_x > 0) cfg.x = b_x;
            if (b_t > 0) cfg.t = b_t;
            if (b_n > 0) cfg.n_paths = b_n;
            echo_config(cfg);
            const double gamma = require_gamma(cfg);
            if (!b_grid.empty()) {
                cfg.x_grid = cble::parse_range(b_grid);
                Eigen::VectorXd rgrid(41);
                for (int j = 0; j < 41; ++j) rgrid[j] = 0.25 * j;
                const cble::LevyEnvSpec tilted = cble::esscher_tilt(cfg.env, gamma);
                const cble::RenewalEstimate ren = cble::renewal_estimate(
                    tilted, rgrid, cfg.renewal_h, cfg.t_lad, cfg.n_paths / 4 + 1000, cfg.seed + 1,
                    cfg.threads);
                const cble::KappaEstimate kap = cble::kappa_gamma(ren, gamma);
                const auto seq = cble::estimate_B(cfg.mech, cfg.env, cfg.z, cfg.x_grid, cfg.t,
                                                  cfg.max_step, cfg.n_paths, gamma, ren, kap,
                                                  cfg.seed, cfg.threads);
                std::ofstream f = open_out(cfg, "b_const.csv");
                f << "x,value,b,b_stderr\n";
                for (const auto& p : seq)
                    f << p.x << "," << p.value << "," << p.b << "," << p.b_se << "\n";
                std::printf("b-const sequence: final value=%.6g at x=%g\n", seq.back().value,
                            seq.back().x);
            } else {
                const cble::BEstimate b = cble::estimate_b(cfg.mech, cfg.env, cfg.z, cfg.x, cfg.t,
                                                           cfg.max_step, cfg.n_paths, gamma,
                                                           cfg.seed, cfg.threads);
                std::printf("b(z=%g,x=%g) = %.6g (se %.2g, ess %.4g); at T/2: %.6g\n", cfg.z,
                            cfg.x, b.value.mean, b.value.se, b.value.ess, b.value_half_t);
            }
            return 0;
        }
        if (infasym->parsed()) {
            if (inf_x > 0) cfg.x = inf_x;
            if (!inf_grid.empty()) cfg.t_grid = cble::parse_range(inf_grid);
            if (inf_n > 0) cfg.n_paths = inf_n;
            echo_config(cfg);
            const double gamma = require_gamma(cfg);
            const cble::InfAsymptotic run = cble::estimate_inf_asymptotic(
                cfg.env, cfg.x, cfg.t_grid, cfg.max_step, cfg.n_paths, gamma, cfg.seed,
                cfg.threads);
            std::ofstream f = open_out(cfg, "inf_asymp.csv");
            write_decay_csv(f, run.points);
            std::printf("inf-asymp slope=%.6g (se %.2g) intercept=%.6g drift=%.3g\n",
                        run.fit.slope, run.fit.slope_se, run.fit.intercept,
                        run.fit.plateau_drift);
            return 0;
        }
        if (simz->parsed()) {
            if (simz_dt > 0) cfg.dt = simz_dt;
            if (simz_t > 0) cfg.t = simz_t;
            if (simz_paths > 0) cfg.n_paths = simz_paths;
            echo_config(cfg);
            std::ofstream f = open_out(cfg, "zpaths.csv");
            f << "path,t,Z,xi\n";
            for (long p = 0; p < cfg.n_paths; ++p) {
                cble::RngStream env_rng(cfg.seed, cble::stream_tag::env_path,
                                        static_cast<std::uint64_t>(p));
                cble::RngStream b_rng(cfg.seed, cble::stream_tag::branching,
                                      static_cast<std::uint64_t>(p));
                const cble::EnvironmentPath env =
                    cble::simulate_path(cfg.env, cfg.x0, cfg.t, cfg.max_step, env_rng);
                const cble::ZPath zp = cble::simulate_z(cfg.mech, env, cfg.z, cfg.dt, b_rng);
                Eigen::Index ei = 0;
                for (Eigen::Index k = 0; k < zp.t.size(); ++k) {
                    while (ei + 1 < env.size() && env.times[ei + 1] <= zp.t[k]) ++ei;
                    f << p << "," << zp.t[k] << "," << zp.z[k] << "," << env.values[ei] << "\n";
                }
                if (simz_dump_env) {
                    std::ofstream ef = open_out(cfg, "env_" + std::to_string(p) + ".csv");
                    ef << "time,value\n";
                    for (Eigen::Index k = 0; k < env.size(); ++k)
                        ef << env.times[k] << "," << env.values[k] << "\n";
                }
            }
            std::printf("simulate-z wrote %ld paths to %s/zpaths.csv\n", cfg.n_paths,
                        cfg.out_dir.c_str());
            return 0;
        }
        if (validate->parsed()) {
            echo_config(cfg);
            const auto results = cble::run_acceptance(cfg.threads, cfg.out_dir);
            bool all = true;
            for (const auto& r : results) {
                all = all && r.pass;
                std::printf("[%s] criterion %2d %-42s achieved=%.4g tol=%.4g (%.1fs)\n",
                            r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.achieved,
                            r.tolerance, r.seconds);
                if (!r.detail.empty()) std::printf("        %s\n", r.detail.c_str());
            }
            std::ofstream f = open_out(cfg, "validate_report.json");
            f << cble::acceptance_report_json(results) << "\n";
            return all ? 0 : kExitStatistical;
        }
    } catch (const cble::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const cble::numerical_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    } catch (const cble::boundary_regime_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return 0;
}
