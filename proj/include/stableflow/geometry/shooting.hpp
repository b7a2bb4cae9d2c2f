#pragma once

#include "stableflow/geometry/curvature.hpp"

namespace stableflow {

// Geodesic on tau in [0, 1] integrated together with vectors parallel along
// it and, optionally, the linearized geodesic flow (Jacobi fields). Since the
// variations are integrated with the same RK4 steps, they are the exact
// derivatives of the discrete endpoint map.
struct ShootResult {
  Vec x;
  Vec v;
  Mat transported;  // columns parallel along the geodesic
  Mat dx;           // endpoint variation for each column of (dx0, dv0)
  Mat dv;
  bool left_chart = false;
};

ShootResult shoot(const ChartMetric& m, const Vec& x0, const Vec& v0, const Mat& transported0,
                  const Mat& dx0, const Mat& dv0, int steps);

}  // namespace stableflow
