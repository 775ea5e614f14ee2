#include "cble/branching.hpp"

#include <cmath>
#include <stdexcept>

namespace cble {

namespace {

// e^{-u} - 1 + u, accurate for small u
double expm1_plus(double u) {
    if (u < 1e-4) return u * u * (0.5 - u / 6.0 + u * u / 24.0);
    return std::expm1(-u) + u;
}

}  // namespace

void BranchingMechanism::validate() const {
    if (kind == MechKind::stable) {
        if (!(stable_c > 0.0)) throw std::invalid_argument("stable mechanism needs C > 0");
        if (!(stable_beta > 0.0 && stable_beta <= 1.0))
            throw std::invalid_argument("stable mechanism needs beta in (0,1]");
    } else {
        // rho2 = 0 with no atoms is the degenerate mechanism (psi0 = 0),
        // kept for pure-environment-flow checks
        if (!(rho2 >= 0.0)) throw std::invalid_argument("rho2 must be >= 0");
        for (const auto& a : atoms) {
            if (!(a.size > 0.0)) throw std::invalid_argument("atom sizes must be > 0");
            if (!(a.mass > 0.0)) throw std::invalid_argument("atom masses must be > 0");
        }
    }
}

BranchingMechanism BranchingMechanism::stable(double c, double beta) {
    BranchingMechanism m;
    m.kind = MechKind::stable;
    m.stable_c = c;
    m.stable_beta = beta;
    m.validate();
    return m;
}

BranchingMechanism BranchingMechanism::finite_atoms(double rho2, std::vector<BranchAtom> atoms) {
    BranchingMechanism m;
    m.kind = MechKind::finite_atoms;
    m.rho2 = rho2;
    m.atoms = std::move(atoms);
    m.validate();
    return m;
}

double psi0(const BranchingMechanism& mech, double lambda) {
    if (!(lambda >= 0.0)) throw std::domain_error("psi0 requires lambda >= 0");
    if (mech.kind == MechKind::stable)
        return mech.stable_c * std::pow(lambda, 1.0 + mech.stable_beta);
    double v = mech.rho2 * lambda * lambda;
    for (const auto& a : mech.atoms) v += a.mass * expm1_plus(lambda * a.size);
    return v;
}

double big_psi0(const BranchingMechanism& mech, double lambda) {
    if (!(lambda >= 0.0)) throw std::domain_error("Psi0 requires lambda >= 0");
    if (lambda == 0.0) return 0.0;
    if (mech.kind == MechKind::stable) return mech.stable_c * std::pow(lambda, mech.stable_beta);
    return psi0(mech, lambda) / lambda;
}

bool check_grey(const BranchingMechanism& mech) {
    if (mech.kind == MechKind::stable) return true;  // beta > 0 always
    // psi0 ~ rho2 l^2 at infinity when rho2 > 0; otherwise psi0(l)/l is bounded
    return mech.rho2 > 0.0;
}

RvMetadata rv_metadata(const BranchingMechanism& mech) {
    RvMetadata r;
    if (mech.kind == MechKind::stable) {
        r.beta = mech.stable_beta;
        r.ell_at_zero = mech.stable_c;
        r.ell_global_lower = mech.stable_c;
        r.lower_bound_holds = true;
        return r;
    }
    r.beta = 1.0;
    double second_moment = 0.0;
    for (const auto& a : mech.atoms) second_moment += a.mass * a.size * a.size;
    r.ell_at_zero = mech.rho2 + 0.5 * second_moment;
    r.ell_global_lower = mech.rho2;  // the atom part of ell decays to 0 at infinity
    r.lower_bound_holds = mech.rho2 > 0.0;
    return r;
}

}  // namespace cble
