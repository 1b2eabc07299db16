#include "hqao/report.hpp"

namespace hqao {

bool BoundReport::all_pass() const {
  for (const auto& c : checks)
    if (c.gating && !c.pass) return false;
  return true;
}

BoundCheck& BoundReport::add_le(std::string name, double lhs, double rhs, double slack, bool gating) {
  BoundCheck c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.margin = rhs - lhs;
  c.pass = lhs <= rhs + slack;
  c.gating = gating;
  checks.push_back(std::move(c));
  return checks.back();
}

const BoundCheck* BoundReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

nlohmann::json to_json(const BoundCheck& c) {
  return {{"name", c.name}, {"lhs", c.lhs},   {"rhs", c.rhs},
          {"margin", c.margin}, {"pass", c.pass}, {"gating", c.gating}};
}

nlohmann::json to_json(const BoundReport& report) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : report.checks) arr.push_back(to_json(c));
  return {{"checks", arr}, {"all_pass", report.all_pass()}};
}

}  // namespace hqao
