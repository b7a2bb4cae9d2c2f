#pragma once

#include <array>
#include <vector>

#include "stableflow/geometry/metric.hpp"

namespace stableflow {

// Gamma^a_{bc}: G[a][b][c].
struct Christoffel {
  int n = 0;
  double G[kMaxChartDim][kMaxChartDim][kMaxChartDim] = {};

  // Gamma(u, v)^a = Gamma^a_{bc} u^b v^c.
  Vec contract(const Vec& u, const Vec& v) const;
};

// Christoffel symbols together with their partial derivatives
// dG[e][a][b][c] = d_e Gamma^a_{bc}.
struct ChristoffelJet {
  Christoffel gamma;
  double dG[kMaxChartDim][kMaxChartDim][kMaxChartDim][kMaxChartDim] = {};
  Mat g;
};

// R[a][b][c][d] = <R(e_c, e_d) e_b, e_a> in coordinate components.
struct Tensor4 {
  int n = 0;
  double R[kMaxChartDim][kMaxChartDim][kMaxChartDim][kMaxChartDim] = {};

  double operator()(int a, int b, int c, int d) const { return R[a][b][c][d]; }
  double& operator()(int a, int b, int c, int d) { return R[a][b][c][d]; }
  // R(X, Y, Z, W) for vectors given in coordinate components.
  double eval(const Vec& x, const Vec& y, const Vec& z, const Vec& w) const;
};

struct CurvatureResiduals {
  double antisym_ab = 0;
  double antisym_cd = 0;
  double pair = 0;
  double bianchi = 0;
  double max() const;
};

struct CurvaturePoint {
  Tensor4 R;
  Mat ric;
  Mat g;
  Vec point;
  CurvatureResiduals residuals;
};

Christoffel christoffel(const ChartMetric& m, const Vec& x);
Christoffel christoffel_from(const Mat& g, const std::array<Mat, kMaxChartDim>& dg);
ChristoffelJet christoffel_jet(const ChartMetric& m, const Vec& x);

// Residual of d_c g_ab - g(Gamma(e_c, e_a), e_b) - g(e_a, Gamma(e_c, e_b)).
double metric_compatibility_residual(const ChartMetric& m, const Vec& x);

// Riemann tensor with symmetry and Bianchi residuals. Residuals are measured
// relative to max(1, |R|); above `tol` a Discretization error is thrown.
CurvaturePoint riemann(const ChartMetric& m, const Vec& x, double tol = 1e-6);
CurvatureResiduals curvature_residuals(const Tensor4& R);

// Sectional curvature of the plane spanned by u, v.
double sectional(const CurvaturePoint& cp, const Vec& u, const Vec& v);

struct GeodesicPath {
  std::vector<Vec> points;
  std::vector<Vec> velocities;
  double dt = 0;
  bool left_chart = false;
};

// Classical RK4 with `steps` fixed steps on [0, T].
GeodesicPath geodesic(const ChartMetric& m, const Vec& x0, const Vec& v0, double T, int steps);

// Parallel transport of V0 along a sampled path (points and velocities at a
// uniform parameter step). Mid-step path data come from cubic Hermite
// interpolation, so the scheme stays 4th order.
std::vector<Vec> parallel_transport(const ChartMetric& m, const GeodesicPath& path, const Vec& V0);

// Gram-Schmidt in the metric g.
Mat orthonormalize(const Mat& g, const Mat& vectors);
inline double inner(const Mat& g, const Vec& u, const Vec& v) { return u.dot(g * v); }

}  // namespace stableflow
