#pragma once

#include <cstdint>

namespace cble {

// Monte Carlo output record. Reproducible: identical inputs and seed give
// identical fields regardless of thread count.
struct McEstimate {
    double mean = 0.0;
    double se = 0.0;       // standard error of the mean
    long n = 0;            // sample count
    std::uint64_t seed = 0;
    double ess = 0.0;      // effective sample size for weighted estimators
    double wall_s = 0.0;
    long failures = 0;     // per-path numerical failures, excluded from the mean
};

}  // namespace cble
