#pragma once

#include <string>
#include <vector>

namespace cble {

struct CriterionResult {
    int id = 0;
    std::string name;
    std::string target;
    double achieved = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    double seconds = 0.0;
    std::string detail;
};

// Runs the full validation suite with pinned seeds, grids and tolerances.
// CSV artifacts land in out_dir when it is nonempty.
std::vector<CriterionResult> run_acceptance(int threads, const std::string& out_dir);

std::string acceptance_report_json(const std::vector<CriterionResult>& results);

}  // namespace cble
