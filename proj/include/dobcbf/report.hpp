#pragma once

#include <string>
#include <vector>

namespace dobcbf {

// One pass/fail line of a diagnostic report. `margin` is signed: positive
// means the condition holds with room to spare.
struct Check {
  std::string name;
  bool pass = false;
  double margin = 0.0;
  std::string detail;
  // Advisory checks are reported but do not fail validation.
  bool advisory = false;
};

struct Report {
  std::vector<Check> checks;

  void add(Check c) { checks.push_back(std::move(c)); }

  // True when every non-advisory check passes.
  bool pass() const {
    for (const auto& c : checks) {
      if (!c.advisory && !c.pass) return false;
    }
    return true;
  }

  bool all_pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }

  const Check* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

}  // namespace dobcbf
