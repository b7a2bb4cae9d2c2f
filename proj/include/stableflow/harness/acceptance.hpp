#pragma once

#include <functional>
#include <string>
#include <vector>

namespace stableflow {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

// Criteria are numbered 1..kCriteria.
inline constexpr int kCriteria = 10;

CriterionResult run_criterion(int id);

// Runs the selected criteria (all when empty) on up to `threads` workers;
// results come back ordered by id. `on_result` sees each one as it finishes.
std::vector<CriterionResult> run_acceptance(std::vector<int> only = {}, int threads = 1,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

// "PASS [ 4] name (12.3 s): detail"
std::string format_result(const CriterionResult& r);

// STABLEFLOW_THREADS when set to a positive integer, else 1.
int threads_from_env();

}  // namespace stableflow
