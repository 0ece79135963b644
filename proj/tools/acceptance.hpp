#pragma once
// The acceptance criteria, shared by the acceptance test binary and the CLI.
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

namespace wflow::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

/// Criteria in their fixed order; criterion k is criteria()[k - 1].
const std::vector<Criterion>& criteria();

/// Runs the selected criteria (all when `only` is empty), printing one
/// PASS/FAIL line each. Returns the number of failures.
int run(const std::set<std::size_t>& only, std::FILE* out);

}  // namespace wflow::acceptance
