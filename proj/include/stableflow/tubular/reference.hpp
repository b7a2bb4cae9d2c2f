#pragma once

#include <functional>
#include <vector>

#include "stableflow/geometry/curvature.hpp"

namespace stableflow {

struct CurveJet {
  Vec x;    // position
  Vec dx;   // d/ds
  Vec ddx;  // d^2/ds^2
};

// Closed unit-speed curve Sigma in a chart with a normal frame that is
// parallel for the normal connection. The frame is integrated once around
// the loop; its failure to close up is the normal holonomy.
class ReferenceCurve {
 public:
  // `param` must be unit speed and L-periodic modulo the chart periods.
  ReferenceCurve(ChartMetric m, std::function<CurveJet(double)> param, double length, int nodes = 4096);

  // Straight coordinate line x0 + s * dir; dir must have constant unit length.
  static ReferenceCurve coordinate_line(ChartMetric m, Vec origin, Vec direction, double length,
                                        int nodes = 4096);

  const ChartMetric& metric() const { return m_; }
  double length() const { return length_; }
  int dim() const { return m_.dim(); }
  int codim() const { return m_.dim() - 1; }
  int nodes() const { return static_cast<int>(frames_.size()); }

  double wrap(double s) const;
  CurveJet at(double s) const;
  // Covariant acceleration nabla_T T; zero for a geodesic.
  Vec curvature(double s) const;
  // Columns: T, E_1, ..., E_m at s (chart components).
  Mat frame(double s) const;
  // Coordinate derivative d/ds of the frame columns.
  Mat frame_derivative(double s, const Mat& frame) const;
  // Hol(a, b) = <E_a(L), E_b(0)>.
  const Mat& holonomy() const { return holonomy_; }
  // sup |nabla_T T| over the frame nodes.
  double minimality_defect() const { return defect_; }
  double node_s(int k) const { return k * length_ / nodes(); }
  Vec node_point(int k) const { return at(node_s(k)).x; }

 private:
  Mat rhs(double s, const Mat& frame) const;

  ChartMetric m_;
  std::function<CurveJet(double)> param_;
  double length_;
  std::vector<Mat> frames_;
  Mat holonomy_;
  double defect_ = 0;
};

}  // namespace stableflow
