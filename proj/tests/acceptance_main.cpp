#include <cstdio>

#include "cble/acceptance.hpp"

int main() {
    const auto results = cble::run_acceptance(1, "");
    bool all = true;
    for (const auto& r : results) {
        all = all && r.pass;
        std::printf("[%s] criterion %2d %-42s achieved=%.4g tol=%.4g (%.1fs)\n",
                    r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.achieved, r.tolerance,
                    r.seconds);
        if (!r.detail.empty()) std::printf("        %s\n", r.detail.c_str());
    }
    return all ? 0 : 1;
}
