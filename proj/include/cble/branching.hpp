#pragma once

#include <vector>

namespace cble {

enum class MechKind { stable, finite_atoms };

struct BranchAtom {
    double size = 0.0;  // x > 0
    double mass = 0.0;  // mu({x}) > 0
};

// Branching mechanism psi0 with the linear term removed:
//   stable:       psi0(l) = C l^{1+beta},   beta in (0,1]
//   finite_atoms: psi0(l) = rho2 l^2 + sum mass (e^{-l x} - 1 + l x)
// A pure diffusion is the stable mechanism with beta = 1, C = rho2.
struct BranchingMechanism {
    MechKind kind = MechKind::stable;
    double stable_c = 1.0;
    double stable_beta = 1.0;
    double rho2 = 0.0;
    std::vector<BranchAtom> atoms;
    double psi_prime0 = 0.0;  // metadata, unused by psi0

    void validate() const;

    static BranchingMechanism stable(double c, double beta);
    static BranchingMechanism diffusive(double rho2) { return stable(rho2, 1.0); }
    static BranchingMechanism finite_atoms(double rho2, std::vector<BranchAtom> atoms);
};

double psi0(const BranchingMechanism& mech, double lambda);

// Psi0(lambda) = psi0(lambda)/lambda, the subordinator exponent; Psi0(0) = 0.
double big_psi0(const BranchingMechanism& mech, double lambda);

// Grey's condition int^inf dl/psi0(l) < inf, decided analytically per variant.
bool check_grey(const BranchingMechanism& mech);

struct RvMetadata {
    double beta = 1.0;              // regular-variation index of psi0 at 0
    double ell_at_zero = 0.0;       // lim_{l->0} psi0(l)/l^{1+beta}
    double ell_global_lower = 0.0;  // inf over all l, 0 when no positive bound exists
    bool lower_bound_holds = false; // hypothesis ell > C > 0 of the decay theorem
    bool xlog2x_ok = true;          // x log^2 x moment, automatic for supported variants
};

RvMetadata rv_metadata(const BranchingMechanism& mech);

}  // namespace cble
