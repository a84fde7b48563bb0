// SPDX-License-Identifier: Apache-2.0
//
// Registry of the invariant and oracle checks run by `altlora verify`.
#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace altlora {

struct CheckResult {
  std::string name;
  int instances = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  bool informational = false;  // reported, never counted as a failure
  std::string detail;
  nlohmann::json data = nlohmann::json::object();
  double seconds = 0.0;
};

struct CheckInfo {
  std::string name;
  std::string summary;
  std::function<CheckResult()> run;
};

const std::vector<CheckInfo>& check_registry();

/// Shell-style glob match (`*`, `?`, `[...]`).
bool glob_match(std::string_view pattern, std::string_view name);

std::vector<const CheckInfo*> select_checks(std::string_view pattern);

/// Runs one check, filling in its name and wall time. Exceptions thrown by
/// the check propagate.
CheckResult run_check(const CheckInfo& info);

/// Runs a check by registry name; throws std::out_of_range if unknown.
CheckResult run_check(std::string_view name);

nlohmann::json report_json(const std::vector<CheckResult>& results);

int failure_count(const std::vector<CheckResult>& results);

}  // namespace altlora
