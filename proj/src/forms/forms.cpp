#include "stableflow/forms/forms.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <math.h>  // pchip.hpp calls isnan unqualified

#include <boost/math/interpolators/pchip.hpp>
#include <cmath>

namespace stableflow {

DiscreteCurve::DiscreteCurve(ChartMetric m, std::vector<Vec> points, int orientation)
    : m_(std::move(m)), pts_(std::move(points)), orient_(orientation >= 0 ? 1 : -1) {
  const int N = size();
  if (N < 3) throw Error(ErrorCode::Discretization, "a closed curve needs at least 3 nodes");
  for (const Vec& p : pts_)
    if (p.size() != m_.dim() || !p.allFinite())
      throw Error(ErrorCode::InvalidArgument, "curve node has wrong dimension or is not finite");
  lifted_.resize(N);
  lifted_[0] = pts_[0];
  for (int k = 1; k < N; ++k) lifted_[k] = lifted_[k - 1] + m_.wrap_delta(pts_[k] - pts_[k - 1]);
  lap_ = lifted_[N - 1] + m_.wrap_delta(pts_[0] - pts_[N - 1]) - lifted_[0];
}

int DiscreteCurve::index(int k) const {
  const int N = size();
  int r = k % N;
  return r < 0 ? r + N : r;
}

Vec DiscreteCurve::lifted(int k) const {
  const int N = size();
  int q = k >= 0 ? k / N : -((-k + N - 1) / N);
  return lifted_[k - q * N] + static_cast<double>(q) * lap_;
}

Vec DiscreteCurve::d1(int k) const {
  const double h = 1.0 / size();
  return (-lifted(k + 2) + 8 * lifted(k + 1) - 8 * lifted(k - 1) + lifted(k - 2)) / (12 * h);
}

Vec DiscreteCurve::d2(int k) const {
  const double h = 1.0 / size();
  return (-lifted(k + 2) + 16 * lifted(k + 1) - 30 * lifted(k) + 16 * lifted(k - 1) - lifted(k - 2)) / (12 * h * h);
}

std::vector<double> DiscreteCurve::segment_lengths() const {
  const int N = size();
  std::vector<double> out(N);
  for (int k = 0; k < N; ++k) {
    Vec a = lifted(k), b = lifted(k + 1);
    Vec d = b - a;
    out[k] = std::sqrt(inner(m_.g(0.5 * (a + b)), d, d));
  }
  return out;
}

double DiscreteCurve::spacing_ratio() const {
  auto seg = segment_lengths();
  auto [lo, hi] = std::minmax_element(seg.begin(), seg.end());
  if (*lo <= 0) return std::numeric_limits<double>::infinity();
  return *hi / *lo;
}

double DiscreteCurve::length() const {
  double L = 0;
  for (double s : segment_lengths()) L += s;
  return L;
}

DiscreteCurve DiscreteCurve::reparametrized(int nodes) const {
  const int N = size();
  const int M = nodes > 0 ? nodes : N;
  auto seg = segment_lengths();
  double total = 0;
  for (double s : seg) total += s;
  // Cumulative chord length with two ghost nodes on each side.
  const int pad = 2;
  std::vector<double> t(N + 2 * pad + 1);
  {
    std::vector<double> cum(N + 1, 0.0);
    for (int k = 0; k < N; ++k) cum[k + 1] = cum[k] + seg[k];
    for (int k = -pad; k <= N + pad; ++k) {
      int kk = ((k % N) + N) % N;
      double shift = std::floor(static_cast<double>(k) / N) * total;
      t[k + pad] = cum[kk] + shift;
    }
  }
  const int dim = m_.dim();
  std::vector<Vec> out(M, Vec::Zero(dim));
  for (int i = 0; i < dim; ++i) {
    std::vector<double> x = t, y(t.size());
    for (int k = -pad; k <= N + pad; ++k) y[k + pad] = lifted(k)[i];
    boost::math::interpolators::pchip<std::vector<double>> spline(std::move(x), std::move(y));
    for (int j = 0; j < M; ++j) out[j][i] = spline(total * j / M);
  }
  for (Vec& p : out)
    for (int i = 0; i < dim; ++i) {
      double P = m_.period(i);
      if (P > 0) p[i] -= P * std::floor(p[i] / P);
    }
  return DiscreteCurve(m_, std::move(out), orient_);
}

double ExtrinsicData::sup_H() const {
  double s = 0;
  for (const auto& n : nodes) s = std::max(s, std::sqrt(n.ii_norm2));
  return s;
}

namespace {

// Orthonormal basis of the g-orthogonal complement of t, oriented so that
// (t, normal) has positive coordinate determinant.
Mat normal_frame(const Mat& g, const Vec& t) {
  const int n = static_cast<int>(t.size());
  Mat basis(n, n);
  basis.col(0) = t;
  for (int filled = 1; filled < n; ++filled) {
    double best = -1;
    Vec best_vec;
    for (int i = 0; i < n; ++i) {
      Vec e = Vec::Unit(n, i);
      for (int k = 0; k < filled; ++k) e -= inner(g, basis.col(k), e) * basis.col(k);
      double nrm = std::sqrt(inner(g, e, e));
      if (nrm > best) {
        best = nrm;
        best_vec = e / nrm;
      }
    }
    basis.col(filled) = best_vec;
  }
  if (basis.determinant() < 0) basis.col(n - 1) *= -1;
  return basis.rightCols(n - 1);
}

}  // namespace

ExtrinsicData extrinsic(const DiscreteCurve& c) {
  const int N = c.size();
  if (N < 16) throw Error(ErrorCode::Discretization, "extrinsic data needs at least 16 nodes");
  double ratio = c.spacing_ratio();
  if (ratio > 10)
    throw Error(ErrorCode::ReparametrizeFirst, "node spacing ratio " + std::to_string(ratio) + " exceeds 10");
  const ChartMetric& m = c.metric();
  ExtrinsicData out;
  out.nodes.resize(N);
  for (int k = 0; k < N; ++k) {
    CurveNode& nd = out.nodes[k];
    const Vec& x = c.point(k);
    Vec x1 = c.d1(k), x2 = c.d2(k);
    Mat g = m.g(x);
    double s2 = inner(g, x1, x1);
    nd.speed = std::sqrt(s2);
    nd.tangent = c.orientation() * x1 / nd.speed;
    Vec a = x2 + christoffel(m, x).contract(x1, x1);
    nd.H = (a - inner(g, a, x1) / s2 * x1) / s2;
    nd.normal = normal_frame(g, nd.tangent);
    nd.h.resize(nd.normal.cols());
    for (int al = 0; al < nd.normal.cols(); ++al) nd.h[al] = inner(g, nd.H, nd.normal.col(al));
    nd.ii_norm2 = inner(g, nd.H, nd.H);
    nd.weight = nd.speed / N;
    out.length += nd.weight;
  }
  return out;
}

double GaussCodazziResidual::max() const {
  return std::max({std::abs(gauss), std::abs(codazzi[0]), std::abs(codazzi[1])});
}

namespace {

struct PatchPoint {
  Vec P;
  Mat J;       // 3 x 2 tangent vectors
  Mat gamma;   // induced metric
  Mat hh;      // second fundamental form, coordinate components
  Vec nu;
};

PatchPoint patch_point(const ChartMetric& m, const std::function<Vec(double, double)>& X, double u, double v) {
  const double d = 1e-3;
  auto Xu = [&](double a, double b) {
    return (-X(a + 2 * d, b) + 8 * X(a + d, b) - 8 * X(a - d, b) + X(a - 2 * d, b)) / (12 * d);
  };
  auto Xv = [&](double a, double b) {
    return (-X(a, b + 2 * d) + 8 * X(a, b + d) - 8 * X(a, b - d) + X(a, b - 2 * d)) / (12 * d);
  };
  PatchPoint pp;
  pp.P = X(u, v);
  const int n = static_cast<int>(pp.P.size());
  pp.J.resize(n, 2);
  pp.J.col(0) = Xu(u, v);
  pp.J.col(1) = Xv(u, v);
  Vec Xuu = (-X(u + 2 * d, v) + 16 * X(u + d, v) - 30 * pp.P + 16 * X(u - d, v) - X(u - 2 * d, v)) / (12 * d * d);
  Vec Xvv = (-X(u, v + 2 * d) + 16 * X(u, v + d) - 30 * pp.P + 16 * X(u, v - d) - X(u, v - 2 * d)) / (12 * d * d);
  Vec Xuv = (-Xu(u, v + 2 * d) + 8 * Xu(u, v + d) - 8 * Xu(u, v - d) + Xu(u, v - 2 * d)) / (12 * d);
  Mat g = m.g(pp.P);
  pp.gamma = pp.J.transpose() * g * pp.J;
  pp.gamma = 0.5 * (pp.gamma + pp.gamma.transpose()).eval();
  // Normal covector: cross product of the tangent vectors.
  Vec a = pp.J.col(0), b = pp.J.col(1);
  Vec cov(3);
  cov << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0];
  Vec nu = g.inverse() * cov;
  pp.nu = nu / std::sqrt(inner(g, nu, nu));
  Christoffel G = christoffel(m, pp.P);
  const Vec* second[2][2] = {{&Xuu, &Xuv}, {&Xuv, &Xvv}};
  pp.hh.resize(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      pp.hh(i, j) = inner(g, *second[i][j] + G.contract(pp.J.col(i), pp.J.col(j)), pp.nu);
  return pp;
}

}  // namespace

GaussCodazziResidual gauss_codazzi_residual(const ChartMetric& m, const std::function<Vec(double, double)>& X,
                                            double u0, double v0, double h) {
  if (m.dim() != 3) throw Error(ErrorCode::InvalidArgument, "Gauss-Codazzi check expects a 3-dimensional chart");
  PatchPoint c = patch_point(m, X, u0, v0);
  PatchPoint pu = patch_point(m, X, u0 + h, v0), mu = patch_point(m, X, u0 - h, v0);
  PatchPoint pv = patch_point(m, X, u0, v0 + h), mv = patch_point(m, X, u0, v0 - h);
  Mat dh[2] = {(pu.hh - mu.hh) / (2 * h), (pv.hh - mv.hh) / (2 * h)};
  Mat dgam[2] = {(pu.gamma - mu.gamma) / (2 * h), (pv.gamma - mv.gamma) / (2 * h)};
  Mat ginv = c.gamma.inverse();
  // Intrinsic Christoffel symbols of the induced metric.
  double Gi[2][2][2];
  for (int e = 0; e < 2; ++e)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double acc = 0;
        for (int f = 0; f < 2; ++f) acc += ginv(e, f) * (dgam[a](f, b) + dgam[b](f, a) - dgam[f](a, b));
        Gi[e][a][b] = 0.5 * acc;
      }
  CurvaturePoint cp = riemann(m, c.P);
  auto R = [&](const Vec& a, const Vec& b, const Vec& cc, const Vec& d) { return cp.R.eval(a, b, cc, d); };
  const Vec Xa[2] = {c.J.col(0), c.J.col(1)};
  const double det = c.gamma.determinant();

  GaussCodazziResidual out;
  // Intrinsic curvature from the induced metric as a chart metric of its own.
  auto induced = [&](const Vec& uv) {
    PatchPoint p = patch_point(m, X, uv[0], uv[1]);
    return Mat(p.gamma);
  };
  ChartMetric im = ChartMetric::central_difference("induced", 2, induced, {}, h / 1e-3);
  Vec uv(2);
  uv << u0, v0;
  CurvaturePoint ip = riemann(im, uv, 1e-3);
  out.intrinsic_k = ip.R(0, 1, 0, 1) / det;
  double amb = R(Xa[0], Xa[1], Xa[0], Xa[1]) / det;
  out.gauss = out.intrinsic_k - amb - c.hh.determinant() / det;
  out.mean_curvature = (ginv * c.hh).trace();

  // Orthonormal frame e = X gamma^{-1/2}.
  Eigen::SelfAdjointEigenSolver<Mat> es(c.gamma);
  Mat isq = es.operatorInverseSqrt();
  // Codazzi: C_c = (nabla_u h)_{vc} - (nabla_v h)_{uc} - R(nu, X_c, X_u, X_v).
  double C[2];
  for (int cc = 0; cc < 2; ++cc) {
    double acc = dh[0](1, cc) - dh[1](0, cc);
    for (int d = 0; d < 2; ++d) acc += -Gi[d][0][cc] * c.hh(1, d) + Gi[d][1][cc] * c.hh(0, d);
    acc -= R(c.nu, Xa[cc], Xa[0], Xa[1]);
    C[cc] = acc;
  }
  for (int cc = 0; cc < 2; ++cc) out.codazzi[cc] = (isq(0, cc) * C[0] + isq(1, cc) * C[1]) / std::sqrt(det);
  // Contracted form: D_j = gamma^{ab} [(nabla_a h)_{jb} - R(nu, X_a, X_b, X_j)].
  double D[2];
  for (int j = 0; j < 2; ++j) {
    double acc = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        double nab = dh[a](j, b);
        for (int d = 0; d < 2; ++d) nab -= Gi[d][a][j] * c.hh(d, b) + Gi[d][a][b] * c.hh(j, d);
        acc += ginv(a, b) * (nab - R(c.nu, Xa[a], Xa[b], Xa[j]));
      }
    D[j] = acc;
  }
  for (int j = 0; j < 2; ++j) out.codazzi3[j] = isq(0, j) * D[0] + isq(1, j) * D[1];
  return out;
}

SigmaData sigma_data(const ReferenceCurve& ref, double s) {
  s = ref.wrap(s);
  const ChartMetric& m = ref.metric();
  CurveJet c = ref.at(s);
  Mat F = ref.frame(s);
  Mat g = m.g(c.x);
  Vec kappa = ref.curvature(s);
  const int cd = ref.codim();
  SigmaData sd;
  sd.h.resize(cd);
  for (int a = 0; a < cd; ++a) sd.h[a] = inner(g, kappa, F.col(a + 1));
  CurvaturePoint cp = riemann(m, c.x);
  sd.rnrn.resize(cd, cd);
  for (int a = 0; a < cd; ++a)
    for (int b = 0; b < cd; ++b) sd.rnrn(a, b) = cp.R.eval(F.col(a + 1), F.col(0), F.col(b + 1), F.col(0));
  return sd;
}

std::vector<ExtendedNode> extended_tensors(const TubularChart& tc, const DiscreteCurve& c, const ExtrinsicData& ex,
                                           const std::vector<FermiPoint>* feet,
                                           const std::vector<SigmaData>* sigma) {
  const int N = c.size();
  const int cd = tc.codim();
  const ChartMetric& m = tc.metric();
  std::vector<ExtendedNode> out(N);
  for (int k = 0; k < N; ++k) {
    ExtendedNode& en = out[k];
    if (feet) {
      en.foot = (*feet)[k];
    } else {
      en.foot = tc.foot_point(c.point(k), k > 0 ? &out[k - 1].foot : nullptr);
    }
    Mat g = m.g(en.foot.q);
    const CurveNode& nd = ex.nodes[k];
    Mat L = nd.tangent;
    en.angles = principal_angles(g, en.foot.horizontal(), en.foot.vertical(), L);
    if (en.angles.star_omega <= 0.5)
      throw Error(ErrorCode::GraphicalRegime,
                  "*Omega = " + std::to_string(en.angles.star_omega) + " <= 1/2 at node " + std::to_string(k));
    SigmaData sd = sigma ? (*sigma)[k] : sigma_data(tc.reference(), en.foot.s);
    // Frame components of the parallel extensions: both tensors are T*(x)T*(x)N.
    Vec s_comp = sd.h * 0.0;
    for (int a = 0; a < cd; ++a)
      for (int b = 0; b < cd; ++b) s_comp[a] += en.foot.y[b] * (sd.rnrn(a, b) + sd.h[a] * sd.h[b]);
    const Vec e1 = en.foot.frame.col(0);
    const Vec t1 = en.angles.tangent.col(0);
    const double c1 = inner(g, e1, t1);
    en.ii_gamma.resize(cd);
    en.ii_sigma.resize(cd);
    en.s_sigma.resize(cd);
    en.h_frame.resize(cd);
    en.s_frame.resize(cd);
    for (int a = 0; a < cd; ++a) {
      const Vec ta = en.angles.normal.col(a);
      const Vec va = en.angles.vertical.col(a);
      en.ii_gamma[a] = inner(g, nd.H, ta);
      double is = 0, ss = 0, hf = 0, sf = 0;
      for (int b = 0; b < cd; ++b) {
        const Vec eb = en.foot.frame.col(b + 1);
        double proj = inner(g, eb, ta);
        is += sd.h[b] * proj;
        ss += s_comp[b] * proj;
        double vproj = inner(g, eb, va);
        hf += sd.h[b] * vproj;
        sf += s_comp[b] * vproj;
      }
      en.ii_sigma[a] = c1 * c1 * is;
      en.s_sigma[a] = c1 * c1 * ss;
      en.h_frame[a] = hf;
      en.s_frame[a] = sf;
    }
    en.pairing1 = en.ii_gamma.dot(en.ii_sigma);
    en.pairing2 = en.ii_gamma.dot(en.s_sigma);
    en.pairing1_frame = en.ii_gamma.dot(en.h_frame);
    en.pairing2_frame = en.ii_gamma.dot(en.s_frame);
    en.ii_gamma_norm = std::sqrt(nd.ii_norm2);
    // Difference tensor in the orthonormal basis (e~_1, e~_a), summed directly.
    const int n = tc.dim();
    Vec a(n), w(n), gam = Vec::Zero(n);
    for (int A = 0; A < n; ++A) {
      const Vec tA = A == 0 ? t1 : Vec(en.angles.normal.col(A - 1));
      a[A] = inner(g, e1, tA);
      w[A] = 0;
      for (int b = 0; b < cd; ++b) w[A] += sd.h[b] * inner(g, en.foot.frame.col(b + 1), tA);
      if (A > 0) gam[A] = en.ii_gamma[A - 1];
    }
    double d2 = 0;
    for (int A = 0; A < n; ++A)
      for (int B = 0; B < n; ++B)
        for (int C = 0; C < n; ++C) {
          double v = (A == 0 && B == 0 ? gam[C] : 0.0) - a[A] * a[B] * w[C];
          d2 += v * v;
        }
    en.ii_diff2 = d2;
  }
  return out;
}

}  // namespace stableflow
