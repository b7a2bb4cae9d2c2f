#include "stableflow/tubular/reference.hpp"

#include <cmath>

namespace stableflow {

ReferenceCurve::ReferenceCurve(ChartMetric m, std::function<CurveJet(double)> param, double length,
                               int nodes)
    : m_(std::move(m)), param_(std::move(param)), length_(length) {
  if (!(length > 0)) throw Error(ErrorCode::InvalidArgument, "reference curve length must be positive");
  if (nodes < 16) throw Error(ErrorCode::InvalidArgument, "reference curve needs at least 16 nodes");
  const int n = m_.dim();

  // Unit speed and curvature check on the node grid.
  for (int k = 0; k < nodes; ++k) {
    double s = k * length_ / nodes;
    CurveJet c = param_(s);
    double speed = std::sqrt(inner(m_.g(c.x), c.dx, c.dx));
    if (std::abs(speed - 1) > 1e-9)
      throw Error(ErrorCode::InvalidArgument, "reference curve is not unit speed (|x'| = " +
                                                  std::to_string(speed) + ")");
    Vec kappa = curvature(s);
    defect_ = std::max(defect_, std::sqrt(inner(m_.g(c.x), kappa, kappa)));
  }

  // Initial frame: T followed by coordinate directions, orthonormalized.
  CurveJet c0 = param_(0.0);
  Mat g0 = m_.g(c0.x);
  Mat start(n, n);
  start.col(0) = c0.dx;
  for (int filled = 1; filled < n; ++filled) {
    // Greedily add the coordinate direction least aligned with the span so far.
    double best_norm = -1;
    Vec best_vec;
    for (int i = 0; i < n; ++i) {
      Vec e = Vec::Unit(n, i);
      for (int k = 0; k < filled; ++k)
        e -= inner(g0, start.col(k), e) / inner(g0, start.col(k), start.col(k)) * start.col(k);
      double nrm = std::sqrt(inner(g0, e, e));
      if (nrm > best_norm) {
        best_norm = nrm;
        best_vec = e;
      }
    }
    start.col(filled) = best_vec / best_norm;
  }
  start = orthonormalize(g0, start);

  frames_.resize(nodes);
  frames_[0] = start;
  const double h = length_ / nodes;
  Mat F = start;
  for (int k = 0; k < nodes; ++k) {
    double s = k * h;
    Mat k1 = rhs(s, F);
    Mat k2 = rhs(s + h / 2, F + h / 2 * k1);
    Mat k3 = rhs(s + h / 2, F + h / 2 * k2);
    Mat k4 = rhs(s + h, F + h * k3);
    F += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (k + 1 < nodes) frames_[k + 1] = F;
  }
  // F is now the frame transported once around the loop.
  const int cd = n - 1;
  holonomy_.resize(cd, cd);
  for (int a = 0; a < cd; ++a)
    for (int b = 0; b < cd; ++b) holonomy_(a, b) = inner(g0, F.col(a + 1), start.col(b + 1));
}

ReferenceCurve ReferenceCurve::coordinate_line(ChartMetric m, Vec origin, Vec direction, double length,
                                               int nodes) {
  auto param = [origin, direction](double s) {
    CurveJet c;
    c.x = origin + s * direction;
    c.dx = direction;
    c.ddx = Vec::Zero(origin.size());
    return c;
  };
  return ReferenceCurve(std::move(m), param, length, nodes);
}

double ReferenceCurve::wrap(double s) const {
  double r = std::fmod(s, length_);
  if (r < 0) r += length_;
  if (r >= length_) r = 0;
  return r;
}

CurveJet ReferenceCurve::at(double s) const { return param_(wrap(s)); }

Vec ReferenceCurve::curvature(double s) const {
  CurveJet c = param_(s);
  return c.ddx + christoffel(m_, c.x).contract(c.dx, c.dx);
}

Mat ReferenceCurve::rhs(double s, const Mat& frame) const {
  CurveJet c = param_(s);
  Christoffel G = christoffel(m_, c.x);
  Vec kappa = c.ddx + G.contract(c.dx, c.dx);
  Mat g = m_.g(c.x);
  Mat out(frame.rows(), frame.cols());
  // Column 0 follows T itself; normal columns obey nabla_T E = -<E, kappa> T.
  out.col(0) = c.ddx;
  for (int j = 1; j < frame.cols(); ++j)
    out.col(j) = -G.contract(c.dx, frame.col(j)) - inner(g, frame.col(j), kappa) * c.dx;
  return out;
}

Mat ReferenceCurve::frame_derivative(double s, const Mat& frame) const { return rhs(wrap(s), frame); }

Mat ReferenceCurve::frame(double s) const {
  s = wrap(s);
  const int N = nodes();
  const double h = length_ / N;
  int k = std::min(N - 1, static_cast<int>(std::floor(s / h)));
  double s0 = k * h;
  double ds = s - s0;
  Mat F = frames_[k];
  if (ds > 0) {
    const int sub = 2;
    double step = ds / sub;
    for (int i = 0; i < sub; ++i) {
      double t = s0 + i * step;
      Mat k1 = rhs(t, F);
      Mat k2 = rhs(t + step / 2, F + step / 2 * k1);
      Mat k3 = rhs(t + step / 2, F + step / 2 * k2);
      Mat k4 = rhs(t + step, F + step * k3);
      F += step / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
  }
  F.col(0) = param_(s).dx;
  return F;
}

}  // namespace stableflow
