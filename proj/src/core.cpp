#include "stableflow/core.hpp"

namespace stableflow {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateMetric: return "degenerate-metric";
    case ErrorCode::Discretization: return "discretization-failure";
    case ErrorCode::ChartExit: return "chart-exit";
    case ErrorCode::OutsideTube: return "outside-tube";
    case ErrorCode::Rank: return "rank";
    case ErrorCode::ExpansionMismatch: return "expansion-mismatch";
    case ErrorCode::ReparametrizeFirst: return "reparametrize-first";
    case ErrorCode::GraphicalRegime: return "graphical-regime-violation";
    case ErrorCode::NotMinimal: return "not-minimal";
    case ErrorCode::IterationLimit: return "iteration-limit";
    case ErrorCode::InvalidCurvature: return "invalid-curvature";
    case ErrorCode::NotCoassociative: return "not-coassociative";
    case ErrorCode::ConstraintViolation: return "constraint-violation";
    case ErrorCode::GridMismatch: return "grid-mismatch";
    case ErrorCode::Solver: return "solver";
    case ErrorCode::NonPositiveWindow: return "non-positive-window";
    case ErrorCode::Inconclusive: return "inconclusive";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::ConfigParse: return "config-parse";
    case ErrorCode::UnknownScenario: return "unknown-scenario";
  }
  return "unknown";
}

}  // namespace stableflow
