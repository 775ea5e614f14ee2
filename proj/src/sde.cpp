#include "cble/sde.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cble/errors.hpp"
#include "cble/parallel.hpp"
#include "cble/quenched.hpp"

namespace cble {

namespace {

struct MechCoeffs {
    double rho2 = 0.0;
    double comp_drift = 0.0;  // sum mass * size, compensates atom births
    const std::vector<BranchAtom>* atoms = nullptr;
};

MechCoeffs split_coeffs(const BranchingMechanism& mech) {
    MechCoeffs c;
    if (mech.kind == MechKind::stable) {
        if (mech.stable_beta < 1.0)
            throw std::invalid_argument(
                "simulate_z: stable beta < 1 has infinite-activity branching noise; "
                "use the quenched kernel instead");
        c.rho2 = mech.stable_c;  // beta = 1 is the Feller diffusion
        return c;
    }
    c.rho2 = mech.rho2;
    c.atoms = &mech.atoms;
    for (const auto& a : mech.atoms) c.comp_drift += a.mass * a.size;
    return c;
}

}  // namespace

ZPath simulate_z(const BranchingMechanism& mech, const EnvironmentPath& env, double z0, double dt,
                 RngStream& rng) {
    if (!(z0 >= 0.0)) throw std::invalid_argument("simulate_z requires z0 >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("simulate_z requires dt > 0");
    const MechCoeffs mc = split_coeffs(mech);

    // refine the environment grid to step <= dt; Z and xi share this grid
    std::vector<double> grid;
    grid.push_back(0.0);
    const Eigen::Index m = env.size();
    for (Eigen::Index i = 0; i + 1 < m; ++i) {
        const double t0 = env.times[i], t1 = env.times[i + 1];
        const int pieces = std::max(1, static_cast<int>(std::ceil((t1 - t0) / dt)));
        const double step = (t1 - t0) / pieces;
        for (int p = 1; p <= pieces; ++p)
            grid.push_back(p == pieces ? t1 : t0 + p * step);
    }

    // State y = Z e^{-(xi - xi_0)} so the environment flow is exact by
    // construction; the branching substep sees Z = y E with E the current
    // environment multiplier, frozen per segment.
    ZPath zp;
    zp.t = Eigen::Map<Eigen::VectorXd>(grid.data(), static_cast<Eigen::Index>(grid.size()));
    zp.z.resize(zp.t.size());
    double y = z0;
    double mult = 1.0;  // e^{xi(t) - xi_0}
    zp.z[0] = z0;
    Eigen::Index env_i = 0;
    for (Eigen::Index k = 1; k < zp.t.size(); ++k) {
        const double step = zp.t[k] - zp.t[k - 1];
        if (y > 0.0) {
            const double z_abs = y * mult;
            double ynew = y - mc.comp_drift * y * step;
            if (mc.rho2 > 0.0)
                ynew += std::sqrt(2.0 * mc.rho2 * y * step / mult) * rng.gaussian();
            if (mc.atoms != nullptr) {
                for (const auto& a : *mc.atoms) {
                    const double p_birth = std::min(1.0, a.mass * z_abs * step);
                    if (rng.uniform() < p_birth) ynew += a.size / mult;
                }
            }
            if (ynew < 0.0) {
                ynew = 0.0;
                ++zp.clamp_events;
            }
            y = ynew;
            if (y == 0.0 && zp.absorbed_idx < 0) zp.absorbed_idx = k;
        }
        if (env_i + 1 < m && zp.t[k] == env.times[env_i + 1]) {
            ++env_i;
            mult = std::exp(env.values[env_i] - env.x0);
        }
        zp.z[k] = y * mult;
    }
    return zp;
}

McEstimate laplace_crosscheck(const BranchingMechanism& mech, const LevyEnvSpec& spec, double z0,
                              double lambda, double horizon, double dt, double max_step, long n,
                              std::uint64_t seed, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> vals(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        RngStream env_rng(seed, stream_tag::env_path, i);
        RngStream b_rng(seed, stream_tag::branching, i);
        const EnvironmentPath path = simulate_path(spec, 0.0, horizon, max_step, env_rng);
        const ZPath zp = simulate_z(mech, path, z0, dt, b_rng);
        const double zt = zp.z[zp.z.size() - 1];
        const double a = std::exp(-lambda * zt * std::exp(-(path.terminal() - path.x0)));
        const double b = quenched_laplace(mech, path, z0, lambda);
        vals[i] = a - b;
    });
    Neumaier s1, s2;
    for (double v : vals) {
        s1.add(v);
        s2.add(v * v);
    }
    McEstimate e;
    e.mean = s1.value() / n;
    const double var = std::max(0.0, s2.value() / n - e.mean * e.mean);
    e.se = std::sqrt(var / static_cast<double>(n));
    e.n = n;
    e.seed = seed;
    e.ess = static_cast<double>(n);
    e.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return e;
}

}  // namespace cble
