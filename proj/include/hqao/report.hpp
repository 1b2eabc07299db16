#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace hqao {

/// One checked inequality "lhs <= rhs" (or a named identity residual).
struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  /// rhs - lhs, including any declared slack.
  double margin = 0.0;
  bool pass = false;
  /// Informational checks are reported but do not fail a report.
  bool gating = true;
};

struct BoundReport {
  std::vector<BoundCheck> checks;

  bool all_pass() const;
  /// Appends a "lhs <= rhs + slack" check.
  BoundCheck& add_le(std::string name, double lhs, double rhs, double slack = 0.0, bool gating = true);
  const BoundCheck* find(const std::string& name) const;
};

nlohmann::json to_json(const BoundCheck& check);
nlohmann::json to_json(const BoundReport& report);

}  // namespace hqao
