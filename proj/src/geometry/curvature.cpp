#include "stableflow/geometry/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stableflow {

Vec Christoffel::contract(const Vec& u, const Vec& v) const {
  Vec r = Vec::Zero(n);
  for (int a = 0; a < n; ++a) {
    double s = 0;
    for (int b = 0; b < n; ++b) {
      if (u[b] == 0) continue;
      for (int c = 0; c < n; ++c) s += G[a][b][c] * u[b] * v[c];
    }
    r[a] = s;
  }
  return r;
}

double Tensor4::eval(const Vec& x, const Vec& y, const Vec& z, const Vec& w) const {
  double s = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) s += R[a][b][c][d] * x[a] * y[b] * z[c] * w[d];
  return s;
}

double CurvatureResiduals::max() const { return std::max({antisym_ab, antisym_cd, pair, bianchi}); }

Christoffel christoffel_from(const Mat& g, const std::array<Mat, kMaxChartDim>& dg) {
  const int n = static_cast<int>(g.rows());
  Christoffel c;
  c.n = n;
  Mat gi = g.inverse();
  double low[kMaxChartDim][kMaxChartDim][kMaxChartDim];
  for (int d = 0; d < n; ++d)
    for (int b = 0; b < n; ++b)
      for (int e = b; e < n; ++e) {
        low[d][b][e] = 0.5 * (dg[b](d, e) + dg[e](d, b) - dg[d](b, e));
        low[d][e][b] = low[d][b][e];
      }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int e = b; e < n; ++e) {
        double s = 0;
        for (int d = 0; d < n; ++d) s += gi(a, d) * low[d][b][e];
        c.G[a][b][e] = s;
        c.G[a][e][b] = s;
      }
  return c;
}

Christoffel christoffel(const ChartMetric& m, const Vec& x) {
  Mat g;
  std::array<Mat, kMaxChartDim> dg;
  m.first(x, g, dg);
  return christoffel_from(g, dg);
}

ChristoffelJet christoffel_jet(const ChartMetric& m, const Vec& x) {
  const int n = m.dim();
  MetricJet mj = m.second(x);
  ChristoffelJet cj;
  cj.g = mj.g;
  cj.gamma = christoffel_from(mj.g, mj.dg);
  Mat gi = mj.g.inverse();
  // d_e g^{ad} = -g^{ap} d_e g_pq g^{qd}
  std::array<Mat, kMaxChartDim> dgi;
  for (int e = 0; e < n; ++e) dgi[e] = -gi * mj.dg[e] * gi;
  for (int e = 0; e < n; ++e)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = b; c < n; ++c) {
          double s = 0;
          for (int d = 0; d < n; ++d) {
            double low = 0.5 * (mj.dg[b](d, c) + mj.dg[c](d, b) - mj.dg[d](b, c));
            double dlow = 0.5 * (mj.d2g[e][b](d, c) + mj.d2g[e][c](d, b) - mj.d2g[e][d](b, c));
            s += dgi[e](a, d) * low + gi(a, d) * dlow;
          }
          cj.dG[e][a][b][c] = s;
          cj.dG[e][a][c][b] = s;
        }
  return cj;
}

double metric_compatibility_residual(const ChartMetric& m, const Vec& x) {
  const int n = m.dim();
  Mat g;
  std::array<Mat, kMaxChartDim> dg;
  m.first(x, g, dg);
  Christoffel c = christoffel_from(g, dg);
  double worst = 0;
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double s = dg[k](a, b);
        for (int e = 0; e < n; ++e) s -= c.G[e][k][a] * g(e, b) + c.G[e][k][b] * g(a, e);
        worst = std::max(worst, std::abs(s));
      }
  return worst;
}

CurvatureResiduals curvature_residuals(const Tensor4& T) {
  const int n = T.n;
  CurvatureResiduals r;
  double scale = 1.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) scale = std::max(scale, std::abs(T.R[a][b][c][d]));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          const double v = T.R[a][b][c][d];
          r.antisym_ab = std::max(r.antisym_ab, std::abs(v + T.R[b][a][c][d]) / scale);
          r.antisym_cd = std::max(r.antisym_cd, std::abs(v + T.R[a][b][d][c]) / scale);
          r.pair = std::max(r.pair, std::abs(v - T.R[c][d][a][b]) / scale);
          r.bianchi = std::max(r.bianchi, std::abs(v + T.R[a][c][d][b] + T.R[a][d][b][c]) / scale);
        }
  return r;
}

CurvaturePoint riemann(const ChartMetric& m, const Vec& x, double tol) {
  const int n = m.dim();
  ChristoffelJet cj = christoffel_jet(m, x);
  const auto& G = cj.gamma.G;
  CurvaturePoint cp;
  cp.point = x;
  cp.g = cj.g;
  cp.R.n = n;
  double up[kMaxChartDim][kMaxChartDim][kMaxChartDim][kMaxChartDim];
  for (int e = 0; e < n; ++e)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double s = cj.dG[c][e][d][b] - cj.dG[d][e][c][b];
          for (int f = 0; f < n; ++f) s += G[e][c][f] * G[f][d][b] - G[e][d][f] * G[f][c][b];
          up[e][b][c][d] = s;
        }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double s = 0;
          for (int e = 0; e < n; ++e) s += cj.g(a, e) * up[e][b][c][d];
          cp.R.R[a][b][c][d] = s;
        }
  Mat gi = cj.g.inverse();
  cp.ric = Mat::Zero(n, n);
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) {
      double s = 0;
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) s += gi(a, c) * cp.R.R[a][b][c][d];
      cp.ric(b, d) = s;
    }
  cp.residuals = curvature_residuals(cp.R);
  if (cp.residuals.max() > tol) {
    std::ostringstream os;
    os << "curvature symmetry residuals at chart point exceed " << tol << ": antisym_ab="
       << cp.residuals.antisym_ab << " antisym_cd=" << cp.residuals.antisym_cd
       << " pair=" << cp.residuals.pair << " bianchi=" << cp.residuals.bianchi;
    throw Error(ErrorCode::Discretization, os.str());
  }
  return cp;
}

double sectional(const CurvaturePoint& cp, const Vec& u, const Vec& v) {
  double num = cp.R.eval(u, v, u, v);
  double den = inner(cp.g, u, u) * inner(cp.g, v, v) - std::pow(inner(cp.g, u, v), 2);
  return num / den;
}

GeodesicPath geodesic(const ChartMetric& m, const Vec& x0, const Vec& v0, double T, int steps) {
  if (steps <= 0) throw Error(ErrorCode::InvalidArgument, "geodesic needs at least one step");
  GeodesicPath path;
  path.dt = T / steps;
  path.points.reserve(steps + 1);
  path.velocities.reserve(steps + 1);
  Vec x = x0, v = v0;
  path.points.push_back(x);
  path.velocities.push_back(v);
  const double h = path.dt;
  auto acc = [&](const Vec& p, const Vec& w) -> Vec {
    if (!m.inside(p)) throw Error(ErrorCode::ChartExit, "geodesic left the chart");
    return -christoffel(m, p).contract(w, w);
  };
  try {
    for (int i = 0; i < steps; ++i) {
      Vec k1x = v, k1v = acc(x, v);
      Vec k2x = v + 0.5 * h * k1v, k2v = acc(x + 0.5 * h * k1x, k2x);
      Vec k3x = v + 0.5 * h * k2v, k3v = acc(x + 0.5 * h * k2x, k3x);
      Vec k4x = v + h * k3v, k4v = acc(x + h * k3x, k4x);
      Vec xn = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
      Vec vn = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
      if (!m.inside(xn)) throw Error(ErrorCode::ChartExit, "geodesic left the chart");
      x = xn;
      v = vn;
      path.points.push_back(x);
      path.velocities.push_back(v);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ChartExit && e.code() != ErrorCode::DegenerateMetric) throw;
    path.left_chart = true;
  }
  return path;
}

std::vector<Vec> parallel_transport(const ChartMetric& m, const GeodesicPath& path, const Vec& V0) {
  std::vector<Vec> out;
  out.reserve(path.points.size());
  out.push_back(V0);
  const double h = path.dt;
  Vec W = V0;
  for (size_t i = 0; i + 1 < path.points.size(); ++i) {
    const Vec& p0 = path.points[i];
    const Vec& v0 = path.velocities[i];
    const Vec& v1 = path.velocities[i + 1];
    Vec dp = m.wrap_delta(path.points[i + 1] - p0);
    Vec pm = p0 + 0.5 * dp + h * (v0 - v1) / 8;
    Vec vm = 1.5 * dp / h - 0.25 * (v0 + v1);
    Vec p1 = p0 + dp;
    Christoffel c0 = christoffel(m, p0), cm = christoffel(m, pm), c1 = christoffel(m, p1);
    Vec k1 = -c0.contract(v0, W);
    Vec k2 = -cm.contract(vm, W + 0.5 * h * k1);
    Vec k3 = -cm.contract(vm, W + 0.5 * h * k2);
    Vec k4 = -c1.contract(v1, W + h * k3);
    W += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    out.push_back(W);
  }
  return out;
}

Mat orthonormalize(const Mat& g, const Mat& vectors) {
  Mat q = vectors;
  for (int j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < j; ++k) q.col(j) -= inner(g, q.col(k), q.col(j)) * q.col(k);
    double nrm = std::sqrt(inner(g, q.col(j), q.col(j)));
    if (!(nrm > 1e-300)) throw Error(ErrorCode::Rank, "dependent vectors in orthonormalization");
    q.col(j) /= nrm;
  }
  return q;
}

}  // namespace stableflow
