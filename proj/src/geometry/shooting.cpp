#include "stableflow/geometry/shooting.hpp"

namespace stableflow {

namespace {

struct State {
  Vec x, v;
  Mat W, dx, dv;
};

struct Deriv {
  Vec x, v;
  Mat W, dx, dv;
};

State axpy(const State& s, double h, const Deriv& d) {
  State r{s.x + h * d.x, s.v + h * d.v, s.W, s.dx, s.dv};
  if (s.W.cols()) r.W += h * d.W;
  if (s.dx.cols()) {
    r.dx += h * d.dx;
    r.dv += h * d.dv;
  }
  return r;
}

Deriv eval(const ChartMetric& m, const State& s) {
  if (!m.inside(s.x)) throw Error(ErrorCode::ChartExit, "shooting geodesic left the chart");
  const int n = m.dim();
  Deriv d;
  d.x = s.v;
  const bool var = s.dx.cols() > 0;
  ChristoffelJet cj;
  Christoffel G;
  if (var) {
    cj = christoffel_jet(m, s.x);
    G = cj.gamma;
  } else {
    G = christoffel(m, s.x);
  }
  d.v = -G.contract(s.v, s.v);
  d.W.resize(n, s.W.cols());
  for (int j = 0; j < s.W.cols(); ++j) d.W.col(j) = -G.contract(s.v, s.W.col(j));
  if (var) {
    const int k = static_cast<int>(s.dx.cols());
    d.dx = s.dv;
    d.dv.resize(n, k);
    // d(Gamma(v, v)) = (d_e Gamma)(v, v) dx^e + 2 Gamma(v, dv)
    double dGvv[kMaxChartDim][kMaxChartDim];
    for (int e = 0; e < n; ++e)
      for (int a = 0; a < n; ++a) {
        double acc = 0;
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c) acc += cj.dG[e][a][b][c] * s.v[b] * s.v[c];
        dGvv[e][a] = acc;
      }
    for (int j = 0; j < k; ++j) {
      Vec r = -2 * G.contract(s.v, s.dv.col(j));
      for (int a = 0; a < n; ++a)
        for (int e = 0; e < n; ++e) r[a] -= dGvv[e][a] * s.dx(e, j);
      d.dv.col(j) = r;
    }
  }
  return d;
}

}  // namespace

ShootResult shoot(const ChartMetric& m, const Vec& x0, const Vec& v0, const Mat& transported0,
                  const Mat& dx0, const Mat& dv0, int steps) {
  State s{x0, v0, transported0, dx0, dv0};
  const double h = 1.0 / steps;
  ShootResult out;
  try {
    for (int i = 0; i < steps; ++i) {
      Deriv k1 = eval(m, s);
      Deriv k2 = eval(m, axpy(s, h / 2, k1));
      Deriv k3 = eval(m, axpy(s, h / 2, k2));
      Deriv k4 = eval(m, axpy(s, h, k3));
      s.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
      s.v += h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
      if (s.W.cols()) s.W += h / 6 * (k1.W + 2 * k2.W + 2 * k3.W + k4.W);
      if (s.dx.cols()) {
        s.dx += h / 6 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
        s.dv += h / 6 * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv);
      }
    }
    if (!m.inside(s.x)) throw Error(ErrorCode::ChartExit, "shooting geodesic left the chart");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ChartExit && e.code() != ErrorCode::DegenerateMetric) throw;
    out.left_chart = true;
  }
  out.x = s.x;
  out.v = s.v;
  out.transported = s.W;
  out.dx = s.dx;
  out.dv = s.dv;
  return out;
}

}  // namespace stableflow
