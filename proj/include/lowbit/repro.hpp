#pragma once

#include <string>
#include <vector>

#include "lowbit/report.hpp"

namespace lowbit {

/// Outcome of one acceptance criterion.
struct CriterionResult {
    int id = 0;
    std::string title;
    bool checks_passed = false;
    double seconds = 0.0;
    double time_limit = 0.0; ///< seconds; 0 means unbounded
    std::string detail;      ///< one-line summary, e.g. the worst deviation
    Json data = Json::object();

    bool within_time() const { return time_limit <= 0.0 || seconds <= time_limit; }
    bool passed() const { return checks_passed && within_time(); }
};

inline constexpr int kCriterionCount = 11;

/// Runs criterion `id` (1 to kCriterionCount); throws std::out_of_range otherwise.
CriterionResult run_criterion(int id);

Json to_json(const CriterionResult& result);
/// "[PASS] 3 swamping thresholds (0.41 s / 10 s): ..."
std::string summary_line(const CriterionResult& result);

} // namespace lowbit
