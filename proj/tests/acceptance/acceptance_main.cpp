// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Arguments, if any, select criterion ids.

#include <cstdlib>
#include <iostream>

#include "stableflow/harness/acceptance.hpp"

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto results = stableflow::run_acceptance(only, stableflow::threads_from_env(),
                                            [](const stableflow::CriterionResult& r) {
                                              std::cout << stableflow::format_result(r) << std::endl;
                                            });
  int failed = 0;
  for (const auto& r : results) failed += !r.pass;
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
