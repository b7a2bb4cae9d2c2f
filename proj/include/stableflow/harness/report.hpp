#pragma once

// Human tables and JSON records for the CLI subcommands.

#include <string>
#include <vector>

#include "json.hpp"
#include "stableflow/harness/scenario.hpp"

namespace stableflow {

struct AnalyzeResult {
  StabilityReport report;
  std::vector<std::string> mismatches;  // expected values not met
};

// Margin, Jacobi spectrum and classification, compared with the scenario's
// expected values. Throws NotMinimal for a non-geodesic Sigma.
AnalyzeResult analyze_scenario(const Scenario& sc, int nodes = 256, int eigenvalues = 4);

std::string format_analysis(const Scenario& sc, const AnalyzeResult& r);
nlohmann::json analysis_record(const Scenario& sc, const AnalyzeResult& r);

std::string format_probe(const Scenario& sc, const ProbeReport& r);
nlohmann::json probe_record(const Scenario& sc, const ProbeReport& r);

struct SuiteRow {
  std::string name;
  double worst = 0;
  double tolerance = 0;
  bool pass = false;
};

// G2 identity suite: cross product, curvature identities and coassociative
// relations on generated samples, Q against its Gauss-equation form, and
// adapted-frame reconstruction. `seeds` random samples per check.
std::vector<SuiteRow> g2_suite(int seeds = 1000);
std::string format_suite(const std::vector<SuiteRow>& rows);

}  // namespace stableflow
