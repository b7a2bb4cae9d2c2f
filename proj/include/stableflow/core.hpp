#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace stableflow {

// Chart dimension is capped so that per-point vectors and matrices live on
// the stack in the hot geodesic and flow loops.
inline constexpr int kMaxChartDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxChartDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxChartDim, kMaxChartDim>;

enum class ErrorCode {
  DegenerateMetric,
  Discretization,
  ChartExit,
  OutsideTube,
  Rank,
  ExpansionMismatch,
  ReparametrizeFirst,
  GraphicalRegime,
  NotMinimal,
  IterationLimit,
  InvalidCurvature,
  NotCoassociative,
  ConstraintViolation,
  GridMismatch,
  Solver,
  NonPositiveWindow,
  Inconclusive,
  InvalidArgument,
  ConfigParse,
  UnknownScenario,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stableflow
