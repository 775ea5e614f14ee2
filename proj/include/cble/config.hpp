#pragma once

#include <string>
#include <vector>

#include "cble/branching.hpp"
#include "cble/levy_env.hpp"

namespace cble {

// Declarative description of a study; parsed from the flat sectioned
// key-value format and echoed back fully resolved.
struct ExperimentConfig {
    LevyEnvSpec env;
    double x0 = 0.0;
    BranchingMechanism mech;

    double z = 1.0;
    double x = 1.0;
    double t = 10.0;
    std::vector<double> t_grid;
    std::vector<double> x_grid;
    long n_paths = 100000;
    std::uint64_t seed = 12345;
    int threads = 1;
    double max_step = 0.02;
    double dt = 1e-3;
    double ode_tol = 1e-9;
    double eps_sign = 1e-10;
    double gamma_tol = 1e-12;
    double renewal_h = 1e-3;
    double t_lad = 48.0;

    std::string out_dir = ".";

    bool operator==(const ExperimentConfig& other) const;

    // the Brownian benchmark study
    static ExperimentConfig benchmark();
};

// Parses the documented config format; collects all problems and throws a
// config_error listing (line, key, reason) triples when any are found.
ExperimentConfig parse_config(const std::string& text);

// Fully resolved echo; parse(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& cfg);

// "a:b:step" inclusive range
std::vector<double> parse_range(const std::string& text);

}  // namespace cble
