#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cble {

// Thrown when an iterative routine fails to meet its tolerance within budget.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a regime/sign test cannot be resolved within the sign tolerance.
class boundary_regime_error : public std::runtime_error {
public:
    explicit boundary_regime_error(const std::string& what) : std::runtime_error(what) {}
};

struct config_issue {
    int line = 0;            // 1-based, 0 when not tied to a line
    std::string key;
    std::string reason;
};

class config_error : public std::runtime_error {
public:
    config_error(std::string what, std::vector<config_issue> issues)
        : std::runtime_error(std::move(what)), issues_(std::move(issues)) {}
    const std::vector<config_issue>& issues() const { return issues_; }

private:
    std::vector<config_issue> issues_;
};

}  // namespace cble
