#pragma once

#include <functional>
#include <vector>

#include "stableflow/tubular/tubular.hpp"

namespace stableflow {

// Closed polygon in chart coordinates, sampled at uniform parameter
// u = k / N. Periodic chart coordinates are unwrapped so that finite
// differences see a continuous curve.
class DiscreteCurve {
 public:
  DiscreteCurve(ChartMetric m, std::vector<Vec> points, int orientation = 1);

  const ChartMetric& metric() const { return m_; }
  int size() const { return static_cast<int>(pts_.size()); }
  const std::vector<Vec>& points() const { return pts_; }
  const Vec& point(int k) const { return pts_[index(k)]; }
  int orientation() const { return orient_; }

  // Unwrapped position of node k for any integer k; lifted(k + N) = lifted(k) + lap().
  Vec lifted(int k) const;
  const Vec& lap() const { return lap_; }

  // Derivatives with respect to u, 4th-order periodic stencils.
  Vec d1(int k) const;
  Vec d2(int k) const;

  // Chord lengths |x_{k+1} - x_k| measured with the metric at the midpoint.
  std::vector<double> segment_lengths() const;
  double spacing_ratio() const;
  double length() const;

  // Same curve resampled at uniform arc length (periodic monotone cubic).
  DiscreteCurve reparametrized(int nodes = 0) const;

 private:
  int index(int k) const;

  ChartMetric m_;
  std::vector<Vec> pts_;
  std::vector<Vec> lifted_;
  Vec lap_;
  int orient_;
};

struct CurveNode {
  double speed = 0;  // |dx/du|
  Vec tangent;       // unit, oriented
  Mat normal;        // orthonormal normal frame
  Vec h;             // second fundamental form h_{a11} in the normal frame
  Vec H;             // mean curvature vector (chart components)
  double ii_norm2 = 0;
  double weight = 0;  // arc-length quadrature weight
};

struct ExtrinsicData {
  std::vector<CurveNode> nodes;
  double length = 0;
  double sup_H() const;
};

// Throws Discretization below 16 nodes and ReparametrizeFirst when the
// spacing ratio exceeds 10.
ExtrinsicData extrinsic(const DiscreteCurve& c);

// Gauss and Codazzi residuals at the centre of a surface patch X(u, v) in a
// 3-dimensional chart. Derivatives along the patch use central differences
// of step h.
struct GaussCodazziResidual {
  double gauss = 0;           // R^Gamma_1212 - R_1212 - (h11 h22 - h12^2), orthonormal frame
  double codazzi[2] = {0, 0};    // Codazzi equation for (X, Y, Z) = (e_1, e_2, e_c)
  double codazzi3[2] = {0, 0};   // sum_i (nabla_i h)_{ji} - R(nu, e_i, e_i, e_j); zero if minimal
  double mean_curvature = 0;
  double intrinsic_k = 0;
  double max() const;
};

GaussCodazziResidual gauss_codazzi_residual(const ChartMetric& m, const std::function<Vec(double, double)>& X,
                                            double u0, double v0, double h);

// Data of Sigma at a foot point in its parallel frame (E_0 = T, E_a normal).
struct SigmaData {
  Vec h;     // h_a = <nabla_T T, E_a>
  Mat rnrn;  // R(E_a, T, E_b, T)
};

SigmaData sigma_data(const ReferenceCurve& ref, double s);

// Comparison of Gamma with the parallel extensions of II^Sigma and S^Sigma.
// Components are in the adapted bases of the principal-angle construction.
struct ExtendedNode {
  FermiPoint foot;
  PrincipalAngles angles;
  Vec ii_gamma;   // h~_a = II^Gamma(e~_1, e~_1, e~_a)
  Vec ii_sigma;   // II^Sigma(e~_1, e~_1, e~_a)
  Vec s_sigma;    // S^Sigma(e~_1, e~_1, e~_a)
  Vec h_frame;    // h_a(p) in the rotated vertical basis
  Vec s_frame;    // y^b (R_a1b1 + h_a h_b)(p) in the rotated vertical basis
  double pairing1 = 0;        // <II^Gamma, II^Sigma>
  double pairing2 = 0;        // <II^Gamma, S^Sigma>
  double pairing1_frame = 0;  // sum h~_a h_a(p), adapted components
  double pairing2_frame = 0;
  double ii_gamma_norm = 0;
  double ii_diff2 = 0;  // |II^Gamma - II^Sigma|^2
};

// feet: optional precomputed foot points (same order as the nodes); Newton
// is used otherwise, warm-started from the previous node. Throws
// GraphicalRegime when *Omega <= 1/2 at a node.
std::vector<ExtendedNode> extended_tensors(const TubularChart& tc, const DiscreteCurve& c,
                                           const ExtrinsicData& ex, const std::vector<FermiPoint>* feet = nullptr,
                                           const std::vector<SigmaData>* sigma = nullptr);

}  // namespace stableflow
