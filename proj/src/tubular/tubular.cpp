#include "stableflow/tubular/tubular.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "stableflow/geometry/shooting.hpp"

namespace stableflow {

TubularChart::TubularChart(ReferenceCurve ref, double eps, int shoot_steps)
    : ref_(std::move(ref)), eps_(eps), steps_(shoot_steps) {
  if (!(eps > 0)) throw Error(ErrorCode::InvalidArgument, "tube radius must be positive");
  nodes_.reserve(ref_.nodes());
  for (int k = 0; k < ref_.nodes(); ++k) nodes_.push_back(ref_.node_point(k));
}

FermiPoint TubularChart::fermi_point(double s, const Vec& y, bool with_jacobian) const {
  const int n = dim(), m = codim();
  FermiPoint fp;
  fp.s = ref_.wrap(s);
  fp.y = y;
  // Crossing s = 0 changes the normal frame by the holonomy.
  const double turns = std::floor(s / ref_.length());
  if (turns != 0 && codim() > 0) {
    const Mat& hol = ref_.holonomy();
    int k = static_cast<int>(turns);
    for (; k > 0; --k) fp.y = hol.transpose() * fp.y;
    for (; k < 0; ++k) fp.y = hol * fp.y;
  }
  fp.psi = fp.y.squaredNorm();
  CurveJet c = ref_.at(fp.s);
  Mat F = ref_.frame(fp.s);
  fp.foot = c.x;
  Vec v0 = F.rightCols(m) * fp.y;
  Mat dx0(n, 0), dv0(n, 0);
  if (with_jacobian) {
    Mat dF = ref_.frame_derivative(fp.s, F);
    dx0 = Mat::Zero(n, n);
    dv0 = Mat::Zero(n, n);
    dx0.col(0) = c.dx;
    dv0.col(0) = dF.rightCols(m) * fp.y;
    dv0.rightCols(m) = F.rightCols(m);
  }
  ShootResult r = shoot(metric(), c.x, v0, F, dx0, dv0, steps_);
  if (r.left_chart) throw Error(ErrorCode::ChartExit, "normal geodesic left the chart");
  fp.q = r.x;
  fp.frame = r.transported;
  if (with_jacobian) fp.jacobian = r.dx;
  return fp;
}

Mat TubularChart::fermi_metric(double s, const Vec& y) const {
  FermiPoint fp = fermi_point(s, y, true);
  return fp.jacobian.transpose() * metric().g(fp.q) * fp.jacobian;
}

FermiPoint TubularChart::foot_point(const Vec& q, const FermiPoint* hint) const {
  const ChartMetric& m = metric();
  const int cd = codim();
  double s;
  Vec y(cd);
  if (hint) {
    s = hint->s;
    y = hint->y;
  } else {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < nodes_.size(); ++k) {
      double d = m.wrap_delta(q - nodes_[k]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    double sk = ref_.node_s(best);
    Vec delta = m.wrap_delta(q - nodes_[best]);
    Mat F = ref_.frame(sk);
    Mat g = m.g(nodes_[best]);
    s = sk + inner(g, delta, F.col(0));
    for (int a = 0; a < cd; ++a) y[a] = inner(g, delta, F.col(a + 1));
  }
  const int max_iter = 50;
  for (int it = 1; it <= max_iter; ++it) {
    FermiPoint fp;
    try {
      fp = fermi_point(s, y, true);
    } catch (const Error& e) {
      throw Error(ErrorCode::OutsideTube, std::string("foot point shooting failed: ") + e.what());
    }
    Vec r = m.wrap_delta(fp.q - q);
    Vec du = fp.jacobian.partialPivLu().solve(r);
    if (!du.allFinite()) throw Error(ErrorCode::OutsideTube, "singular Fermi Jacobian");
    y -= du.tail(cd);
    s -= du[0];
    if (s < 0 || s >= ref_.length()) {
      // Re-express y in the frame at the wrapped parameter.
      FermiPoint moved = fermi_point(s, y);
      s = moved.s;
      y = moved.y;
    }
    if (y.norm() > 3 * eps_) throw Error(ErrorCode::OutsideTube, "foot point iteration left the tube");
    if (du.lpNorm<Eigen::Infinity>() <= 1e-12) {
      if (y.norm() > eps_)
        throw Error(ErrorCode::OutsideTube, "point at distance " + std::to_string(y.norm()) +
                                                " is outside the tube of radius " + std::to_string(eps_));
      FermiPoint out = fermi_point(s, y);
      out.iterations = it;
      return out;
    }
  }
  throw Error(ErrorCode::OutsideTube, "foot point Newton iteration did not converge");
}

double estimate_tube_radius(const TubularChart& tc, double max_radius, int grid) {
  const int cd = tc.codim();
  const double L = tc.reference().length();
  for (double r = max_radius; r > max_radius * 1e-3; r /= 2) {
    TubularChart trial(tc.reference(), r * 1.0000001);
    bool ok = true;
    for (int i = 0; i < grid && ok; ++i) {
      double s = (i + 0.5) * L / grid;
      for (int d = 0; d < 2 * cd && ok; ++d) {
        Vec y = Vec::Zero(cd);
        if (cd == 1) {
          y[0] = d == 0 ? r : -r;
        } else {
          double a = std::numbers::pi * d / cd;
          y[0] = r * std::cos(a);
          y[1] = r * std::sin(a);
        }
        try {
          Vec q = trial.fermi_map(s, y);
          FermiPoint fp = trial.foot_point(q);
          double ds = std::abs(fp.s - s);
          ds = std::min(ds, L - ds);
          if (ds > 1e-8 || (fp.y - y).norm() > 1e-8) ok = false;
        } catch (const Error&) {
          ok = false;
        }
      }
    }
    if (ok) return r / 2;
  }
  throw Error(ErrorCode::OutsideTube, "no tube radius found at which foot points are recovered");
}

PrincipalAngles principal_angles(const Mat& g, const Mat& H, const Mat& V, const Mat& L) {
  const int n = static_cast<int>(H.cols());
  const int m = static_cast<int>(V.cols());
  if (L.cols() != n) throw Error(ErrorCode::InvalidArgument, "plane dimension must match horizontal space");
  // Rank test before orthonormalization.
  Mat gram = L.transpose() * g * L;
  Eigen::SelfAdjointEigenSolver<Mat> es(gram);
  if (es.eigenvalues().minCoeff() <= 1e-24 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw Error(ErrorCode::Rank, "plane spanned by dependent vectors");
  Mat Lo = orthonormalize(g, L);
  Mat P = H.transpose() * g * Lo;  // P(i, j) = <e_i, l_j>
  Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat U = svd.matrixU(), W = svd.matrixV();
  Vec sv = svd.singularValues();
  if (W.determinant() < 0) {
    W.col(n - 1) *= -1;
    U.col(n - 1) *= -1;
  }
  PrincipalAngles pa;
  pa.star_omega = P.determinant();
  pa.tangent = Lo * W;
  pa.horizontal = H * U;
  const int dim = static_cast<int>(g.rows());
  pa.vertical = Mat::Zero(dim, m);
  pa.normal = Mat::Zero(dim, m);
  pa.angles.resize(n);
  pa.sines.resize(n);
  Mat Vg = V.transpose() * g;
  for (int j = 0; j < n; ++j) {
    Vec vert = V * (Vg * pa.tangent.col(j));
    double sn = std::sqrt(std::max(0.0, inner(g, vert, vert)));
    double cs = sv[j];
    pa.sines[j] = sn;
    pa.angles[j] = std::atan2(sn, cs);
    pa.fs = std::max(pa.fs, sn);
    if (j < m && sn > 1e-14) pa.vertical.col(j) = vert / sn;
  }
  // Complete the vertical basis: unpaired slots by Gram-Schmidt over V.
  for (int a = 0; a < m; ++a) {
    if (pa.vertical.col(a).squaredNorm() > 0) continue;
    for (int b = 0; b < m; ++b) {
      Vec cand = V.col(b);
      for (int c = 0; c < m; ++c)
        if (pa.vertical.col(c).squaredNorm() > 0) cand -= inner(g, pa.vertical.col(c), cand) * pa.vertical.col(c);
      double nrm = std::sqrt(inner(g, cand, cand));
      if (nrm > 1e-6) {
        pa.vertical.col(a) = cand / nrm;
        break;
      }
    }
  }
  for (int a = 0; a < m; ++a) {
    if (a < n)
      pa.normal.col(a) = -std::sin(pa.angles[a]) * pa.horizontal.col(a) + std::cos(pa.angles[a]) * pa.vertical.col(a);
    else
      pa.normal.col(a) = pa.vertical.col(a);
  }
  // 1 - prod cos(phi_j) without cancellation: 1 - cos = sin^2 / (1 + cos).
  double log_prod = 0;
  for (int j = 0; j < n; ++j) {
    double c = std::cos(pa.angles[j]);
    double one_minus = pa.sines[j] * pa.sines[j] / (1 + c);
    log_prod += std::log1p(-one_minus);
  }
  pa.one_minus_star_omega = pa.star_omega > 0 ? -std::expm1(log_prod) : 1 - pa.star_omega;
  return pa;
}

PrincipalAngles principal_angles(const TubularChart& tc, const FermiPoint& fp, const Mat& L) {
  return principal_angles(tc.metric().g(fp.q), fp.horizontal(), fp.vertical(), L);
}

double hessian_psi(const TubularChart& tc, const FermiPoint& at, const Vec& X, double h) {
  const ChartMetric& m = tc.metric();
  GeodesicPath fwd = geodesic(m, at.q, X, h, 1);
  GeodesicPath bwd = geodesic(m, at.q, -X, h, 1);
  if (fwd.left_chart || bwd.left_chart) throw Error(ErrorCode::OutsideTube, "probe geodesic left the chart");
  double pp = tc.foot_point(fwd.points.back(), &at).psi;
  double pm = tc.foot_point(bwd.points.back(), &at).psi;
  return (pp - 2 * at.psi + pm) / (h * h);
}

namespace {

double halton(std::uint64_t i, int base) {
  double f = 1, r = 0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace

ProbeReport hessian_psi_probe(const TubularChart& tc, int samples, std::uint64_t seed, double inner_fraction) {
  const int cd = tc.codim();
  const double L = tc.reference().length();
  const double h = 1e-3;
  const double outer = tc.eps() - 2 * h;
  const double inner_r = inner_fraction * tc.eps();
  static constexpr int kBases[] = {2, 3, 5, 7, 11, 13};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double shift[6];
  for (double& s : shift) s = unif(rng);
  auto coord = [&](std::uint64_t i, int d) {
    double v = halton(i, kBases[d]) + shift[d];
    return v - std::floor(v);
  };

  ProbeReport rep;
  rep.radius = tc.eps();
  rep.inner_radius = inner_r;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    std::uint64_t i = static_cast<std::uint64_t>(k) + 1;
    double s = coord(i, 0) * L;
    // Area-uniform radius on the annulus.
    double u = coord(i, 1);
    double r = std::sqrt(inner_r * inner_r + u * (outer * outer - inner_r * inner_r));
    Vec dir = Vec::Zero(cd);
    if (cd == 1) {
      dir[0] = coord(i, 2) < 0.5 ? -1.0 : 1.0;
    } else if (cd == 2) {
      double a = 2 * std::numbers::pi * coord(i, 2);
      dir << std::cos(a), std::sin(a);
    } else {
      double z = 2 * coord(i, 2) - 1, a = 2 * std::numbers::pi * coord(i, 4);
      double rho = std::sqrt(1 - z * z);
      dir << rho * std::cos(a), rho * std::sin(a), z;
    }
    ProbeSample smp;
    try {
      smp.point = tc.fermi_point(s, r * dir);
      // Direction in T_qM: angle theta between the horizontal e_1 and a vertical unit vector.
      double theta = std::numbers::pi * coord(i, 3);
      Vec vert = smp.point.vertical() * dir;
      smp.direction = std::cos(theta) * smp.point.frame.col(0) + std::sin(theta) * vert;
      smp.trace_hess = hessian_psi(tc, smp.point, smp.direction, h);
      Mat Lm = smp.direction;
      smp.fs = principal_angles(tc, smp.point, Lm).fs;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutsideTube && e.code() != ErrorCode::ChartExit) throw;
      ++rep.skipped;
      continue;
    }
    smp.ratio = smp.trace_hess / (smp.fs * smp.fs + smp.point.psi);
    ++rep.samples;
    if (smp.ratio <= 0) ++rep.violations;
    if (smp.ratio < rep.min_ratio) {
      rep.min_ratio = smp.ratio;
      rep.worst = smp;
    }
  }
  return rep;
}

double ExpansionReport::min_slope() const {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& t : terms) s = std::min(s, t.slope);
  return s;
}

namespace {

// Exact (roundoff-level) residuals are excluded from the slope fit.
constexpr double kExactFloor = 1e-10;

double fit_slope(const std::vector<double>& radii, const std::vector<double>& res) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < radii.size(); ++i)
    if (res[i] > kExactFloor) {
      lx.push_back(std::log(radii[i]));
      ly.push_back(std::log(res[i]));
    }
  if (lx.size() < 2) return std::numeric_limits<double>::infinity();
  double mx = 0, my = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

ExpansionReport expansion_check(const TubularChart& tc, double s_p, std::vector<double> radii,
                                bool throw_on_mismatch) {
  if (tc.metric().mode() != DerivMode::Analytic)
    throw Error(ErrorCode::InvalidArgument, "expansion check needs an analytic-derivative metric");
  if (radii.empty()) radii = {0.2, 0.1, 0.05, 0.025};
  const ChartMetric& m = tc.metric();
  const ReferenceCurve& ref = tc.reference();
  const int n = tc.dim(), cd = tc.codim();

  // Reference data along Sigma in the transported frame.
  auto sigma_data = [&](double s, std::vector<double>& h, Tensor4& Rf) {
    CurveJet c = ref.at(s);
    Mat F = ref.frame(s);
    Mat g = m.g(c.x);
    Vec kappa = ref.curvature(ref.wrap(s));
    h.assign(cd, 0.0);
    for (int a = 0; a < cd; ++a) h[a] = inner(g, kappa, F.col(a + 1));
    CurvaturePoint cp = riemann(m, c.x);
    Rf.n = n;
    for (int A = 0; A < n; ++A)
      for (int B = 0; B < n; ++B)
        for (int C = 0; C < n; ++C)
          for (int D = 0; D < n; ++D) Rf(A, B, C, D) = cp.R.eval(F.col(A), F.col(B), F.col(C), F.col(D));
  };
  std::vector<double> hp;
  Tensor4 Rp;
  sigma_data(s_p, hp, Rp);
  // d/ds of h along Sigma by central differences.
  std::vector<double> hs_plus, hs_minus;
  Tensor4 dummy;
  const double ds = 1e-4;
  sigma_data(s_p + ds, hs_plus, dummy);
  sigma_data(s_p - ds, hs_minus, dummy);

  std::vector<ExpansionTerm> terms = {{"conn02:theta_1^a(e_1)", {}, 0}, {"conn03:theta_1^a(e_b)", {}, 0},
                                      {"conn03:theta_b^a(e_1)", {}, 0}, {"conn03:theta_b^a(e_c)", {}, 0},
                                      {"vf:<d_x,e_1>", {}, 0},          {"vf:<d_y,e_b>", {}, 0},
                                      {"vf:<d_x,e_b>", {}, 0},          {"vf:<d_y,e_1>", {}, 0},
                                      {"graph1:g_xx", {}, 0},           {"graph1:g_xy", {}, 0},
                                      {"graph1:g_yy", {}, 0}};
  const int ndir = 8;
  for (double rho : radii) {
    std::vector<double> worst(terms.size(), 0.0);
    for (int d = 0; d < ndir; ++d) {
      double a = 2 * std::numbers::pi * (d + 0.25) / ndir;
      double x = rho * std::cos(a);
      Vec y = Vec::Zero(cd);
      if (cd == 1) {
        y[0] = rho * std::sin(a);
      } else {
        double b = 0.7 + 1.3 * d;
        y[0] = rho * std::sin(a) * std::cos(b);
        y[1] = rho * std::sin(a) * std::sin(b);
      }
      const double s = s_p + x;
      FermiPoint fp = tc.fermi_point(s, y, true);
      Mat g = m.g(fp.q);
      const Mat& E = fp.frame;
      // Derivatives of the frame field along Fermi coordinates (4th-order).
      const double du = 1e-3;
      std::vector<Mat> dE(n);
      for (int k = 0; k < n; ++k) {
        auto at = [&](double t) {
          double ss = s + (k == 0 ? t : 0.0);
          Vec yy = y;
          if (k > 0) yy[k - 1] += t;
          return tc.fermi_point(ss, yy).frame;
        };
        dE[k] = (-at(2 * du) + 8 * at(du) - 8 * at(-du) + at(-2 * du)) / (12 * du);
      }
      Christoffel G = christoffel(m, fp.q);
      Mat Jinv = fp.jacobian.inverse();
      // theta_A^B(e_C) = <nabla_{e_C} e_A, e_B>
      auto theta = [&](int A, int B, int C) {
        Vec c = Jinv * E.col(C);
        Vec dir = G.contract(E.col(C), E.col(A));
        for (int k = 0; k < n; ++k) dir += c[k] * dE[k].col(A);
        return inner(g, dir, E.col(B));
      };
      // Coefficients at (x, 0) for the metric expansion.
      std::vector<double> hx;
      Tensor4 Rx;
      sigma_data(s, hx, Rx);
      Mat Gf = fp.jacobian.transpose() * g * fp.jacobian;

      auto upd = [&](int t, double v) { worst[t] = std::max(worst[t], std::abs(v)); };
      for (int al = 1; al <= cd; ++al) {
        const int ai = al - 1;
        double expect = hp[ai] + x * (hs_plus[ai] - hs_minus[ai]) / (2 * ds);
        for (int be = 1; be <= cd; ++be) expect += y[be - 1] * (Rp(al, 0, be, 0) + hp[ai] * hp[be - 1]);
        upd(0, theta(0, al, 0) - expect);
        for (int be = 1; be <= cd; ++be) {
          double e1 = 0, e2 = 0, e3 = 0;
          for (int ga = 1; ga <= cd; ++ga) {
            e1 += 0.5 * y[ga - 1] * Rp(al, 0, ga, be);
            e2 += y[ga - 1] * Rp(al, be, ga, 0);
          }
          upd(1, theta(0, al, be) - e1);
          upd(2, theta(be, al, 0) - e2);
          for (int gm = 1; gm <= cd; ++gm) {
            for (int de = 1; de <= cd; ++de) e3 += 0.5 * y[de - 1] * Rp(al, be, de, gm);
            upd(3, theta(be, al, gm) - e3);
            e3 = 0;
          }
        }
      }
      // Coordinate vector fields against the frame.
      double vx1 = 1;
      for (int al = 0; al < cd; ++al) vx1 -= y[al] * hp[al];
      upd(4, inner(g, fp.jacobian.col(0), E.col(0)) - vx1);
      for (int mu = 1; mu <= cd; ++mu) {
        upd(7, inner(g, fp.jacobian.col(mu), E.col(0)));
        for (int be = 1; be <= cd; ++be) {
          upd(5, inner(g, fp.jacobian.col(mu), E.col(be)) - (mu == be ? 1.0 : 0.0));
          if (mu == 1) upd(6, inner(g, fp.jacobian.col(0), E.col(be)));
        }
      }
      // Fermi metric against its quadratic expansion in y (coefficients at (x, 0)).
      double gxx = 1;
      for (int be = 0; be < cd; ++be) gxx -= 2 * y[be] * hx[be];
      for (int mu = 0; mu < cd; ++mu)
        for (int nu = 0; nu < cd; ++nu) gxx -= y[mu] * y[nu] * (Rx(0, mu + 1, 0, nu + 1) - hx[mu] * hx[nu]);
      upd(8, Gf(0, 0) - gxx);
      for (int mu = 1; mu <= cd; ++mu) {
        upd(9, Gf(0, mu));
        for (int nu = 1; nu <= cd; ++nu) upd(10, Gf(mu, nu) - (mu == nu ? 1.0 : 0.0));
      }
    }
    for (size_t t = 0; t < terms.size(); ++t) terms[t].residuals.push_back(worst[t]);
  }
  ExpansionReport rep;
  rep.radii = radii;
  std::string worst_name;
  double worst_slope = std::numeric_limits<double>::infinity();
  for (auto& t : terms) {
    t.slope = fit_slope(radii, t.residuals);
    if (t.slope < worst_slope) {
      worst_slope = t.slope;
      worst_name = t.name;
    }
  }
  rep.terms = std::move(terms);
  if (throw_on_mismatch && worst_slope < 1.8)
    throw Error(ErrorCode::ExpansionMismatch,
                "residual of " + worst_name + " scales with slope " + std::to_string(worst_slope));
  return rep;
}

}  // namespace stableflow
