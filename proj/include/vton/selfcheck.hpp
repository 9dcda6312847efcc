#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vton {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SuiteResult {
    std::string name;
    std::vector<CheckResult> checks;
    double seconds = 0.0;
    double limit_seconds = 0.0;

    bool within_limit() const { return seconds < limit_seconds; }
    /// Every check passed and the suite finished inside its time limit.
    bool passed() const;
    nlohmann::json to_json() const;
};

/// Mock-backend property suites: "ofr", "mask", "ranf", "cspe_sdi", "metrics".
const std::vector<std::string>& selfcheck_suite_names();

/// Throws InputError for an unknown suite name.
SuiteResult run_selfcheck_suite(std::string_view name);

/// Runs the named suites, or all of them when `names` is empty.
std::vector<SuiteResult> run_selfcheck(std::span<const std::string> names = {});

/// One line per check plus a summary line per suite.
std::string format_selfcheck(const std::vector<SuiteResult>& results);

}  // namespace vton
