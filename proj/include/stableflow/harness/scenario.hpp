#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stableflow/flow/flow.hpp"
#include "stableflow/harness/config.hpp"
#include "stableflow/stability/stability.hpp"

namespace stableflow {

struct ExpectedValue {
  std::string name;
  double value = 0;
  double tolerance = 0;
  std::string provenance;
};

struct Scenario {
  Scenario(std::string id_, std::string description_, ChartMetric metric_)
      : id(std::move(id_)), description(std::move(description_)), metric(std::move(metric_)) {}

  std::string id;
  std::string description;
  ChartMetric metric;
  // Sigma as the coordinate line origin + s * direction, s in [0, length),
  // or, when circle_radius > 0, the coordinate circle of that radius about
  // the origin in the first two coordinates (not a geodesic unless the
  // metric makes it one).
  Vec origin;
  Vec direction;
  double length = 0;
  double circle_radius = 0;
  double eps = 0.3;
  FlowConfig flow;
  std::optional<Classification> expected_class;
  std::vector<ExpectedValue> expected;

  ReferenceCurve reference(int frame_nodes = 1024) const;
  TubularChart tube(int frame_nodes = 1024) const;
  const ExpectedValue* find_expected(const std::string& name) const;
};

std::vector<std::string> builtin_scenario_ids();
// Throws UnknownScenario listing the builtins.
Scenario builtin_scenario(const std::string& id);

// Scenario from a config file body; see README for the keys. Throws
// ConfigParse with line and column.
Scenario scenario_from_config(const std::string& text);

// Builtin id, or a path to a config file when the argument names one.
Scenario load_scenario(const std::string& id_or_path);

Classification parse_classification(const std::string& s);

// Curve shortening of a non-minimal Sigma (no tube): only t, volume and
// sup_H are recorded; the other columns are NaN.
FlowTrace run_free_flow(const Scenario& sc, const FlowConfig& cfg);

}  // namespace stableflow
