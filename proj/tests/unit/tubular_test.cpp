#include <gtest/gtest.h>

#include <Eigen/QR>
#include <cmath>
#include <numbers>
#include <random>

#include "stableflow/geometry/models.hpp"
#include "stableflow/tubular/tubular.hpp"

using namespace stableflow;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> v) {
  Vec r(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

ReferenceCurve waist_curve(int nodes = 1024) {
  return ReferenceCurve::coordinate_line(models::hyperbolic_cylinder(), vec({0, 0}), vec({0, 1}), 2 * kPi,
                                         nodes);
}

ReferenceCurve waist3d_curve() {
  return ReferenceCurve::coordinate_line(models::hyperbolic_3d_waist(), vec({0, 0, 0}), vec({1, 0, 0}),
                                         2 * kPi, 1024);
}

// Determinant of [omega^a(v_b)] for covectors given as rows in an orthonormal basis.
double wedge(const std::vector<Vec>& covectors, const std::vector<Vec>& vectors) {
  const int k = static_cast<int>(covectors.size());
  Eigen::MatrixXd M(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) M(a, b) = covectors[a].dot(vectors[b]);
  return M.determinant();
}

Mat random_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  return qr.householderQ();
}

}  // namespace

TEST(ReferenceCurve, TwistedFlatHolonomyIsRotation) {
  const double a = 0.25;
  ReferenceCurve ref =
      ReferenceCurve::coordinate_line(models::twisted_flat(a), vec({0, 0, 0}), vec({1, 0, 0}), 2 * kPi, 2048);
  const Mat& hol = ref.holonomy();
  EXPECT_NEAR(std::abs(hol(0, 0)), std::abs(std::cos(2 * kPi * a)), 1e-9);
  EXPECT_NEAR(std::abs(hol(0, 1)), std::abs(std::sin(2 * kPi * a)), 1e-9);
  EXPECT_NEAR(hol.determinant(), 1.0, 1e-9);
  EXPECT_LT(ref.minimality_defect(), 1e-12);
}

TEST(FootPoint, OnSigmaGivesZero) {
  TubularChart tc(waist_curve(), 0.5);
  FermiPoint fp = tc.foot_point(vec({0, 1.3}));
  EXPECT_NEAR(fp.y[0], 0, 1e-12);
  EXPECT_NEAR(fp.s, 1.3, 1e-12);
  EXPECT_EQ(fp.psi, fp.y.squaredNorm());
}

TEST(FootPoint, HyperbolicWaist) {
  TubularChart tc(waist_curve(), 0.5);
  for (double r0 : {0.3, -0.2, 0.05})
    for (double th : {0.0, 1.0, 6.2}) {
      FermiPoint fp = tc.foot_point(vec({r0, th}));
      EXPECT_NEAR(fp.s, th, 1e-10);
      EXPECT_NEAR(fp.y[0], r0, 1e-10);
      EXPECT_NEAR(fp.psi, r0 * r0, 1e-10);
      EXPECT_NEAR((fp.foot - vec({0, th})).norm(), 0, 1e-10);
      EXPECT_LT((tc.metric().wrap_delta(fp.q - vec({r0, th}))).norm(), 1e-8);
    }
}

TEST(FootPoint, Hyperbolic3dWaist) {
  TubularChart tc(waist3d_curve(), 0.5);
  FermiPoint fp = tc.foot_point(vec({2.0, 0.2, -0.15}));
  EXPECT_NEAR(fp.s, 2.0, 1e-10);
  EXPECT_NEAR(fp.psi, 0.2 * 0.2 + 0.15 * 0.15, 1e-10);
}

TEST(FootPoint, InitialVelocityIsNormalAndHitsTarget) {
  ReferenceCurve ref = ReferenceCurve::coordinate_line(models::twisted_flat(0.3), vec({0, 0, 0}),
                                                       vec({1, 0, 0}), 2 * kPi, 1024);
  TubularChart tc(ref, 0.4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  for (int i = 0; i < 20; ++i) {
    Vec q = vec({0.3 * i, u(rng), u(rng)});
    FermiPoint fp = tc.foot_point(q);
    Mat F = ref.frame(fp.s);
    Vec v0 = F.rightCols(2) * fp.y;
    EXPECT_NEAR(inner(tc.metric().g(fp.foot), v0, F.col(0)), 0, 1e-8);
    EXPECT_LT(tc.metric().wrap_delta(tc.fermi_map(fp.s, fp.y) - q).norm(), 1e-8);
    // Flat space: distance to the axis is the Euclidean distance in unrotated coordinates.
    EXPECT_NEAR(fp.psi, q[1] * q[1] + q[2] * q[2], 1e-9);
  }
}

TEST(FootPoint, AcrossTheSeamWithHolonomy) {
  ReferenceCurve ref = ReferenceCurve::coordinate_line(models::twisted_flat(0.3), vec({0, 0, 0}),
                                                       vec({1, 0, 0}), 2 * kPi, 1024);
  TubularChart tc(ref, 0.4);
  Vec y = vec({0.1, -0.2});
  FermiPoint a = tc.fermi_point(2 * kPi - 1e-3, y);
  FermiPoint b = tc.foot_point(tc.metric().wrap_delta(a.q) + vec({2e-3, 0, 0}));
  EXPECT_NEAR(b.psi, y.squaredNorm(), 1e-9);
}

TEST(FootPoint, OutsideTubeThrows) {
  TubularChart tc(waist_curve(), 0.2);
  try {
    tc.foot_point(vec({0.35, 1.0}));
    FAIL() << "expected OutsideTube";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutsideTube);
  }
}

TEST(FootPoint, SqrtPsiIsDistanceOnTheSphere) {
  // Tube around the equator of S^2: distance to the equator is |latitude|.
  auto param = [](double s) {
    CurveJet c;
    c.x = vec({0, s});
    c.dx = vec({0, 1});
    c.ddx = vec({0, 0});
    return c;
  };
  ChartMetric m = models::sphere_equator();
  ReferenceCurve ref(m, param, 2 * kPi, 1024);
  TubularChart tc(ref, 0.6);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ur(-0.55, 0.55), ut(0, 2 * kPi);
  for (int i = 0; i < 100; ++i) {
    Vec q = vec({ur(rng), ut(rng)});
    EXPECT_NEAR(std::sqrt(tc.foot_point(q).psi), std::abs(q[0]), 1e-9);
  }
}

TEST(FootPoint, GradientOfPsiIsRadial) {
  TubularChart tc(waist3d_curve(), 0.5);
  FermiPoint fp = tc.fermi_point(1.0, vec({0.2, 0.1}));
  const ChartMetric& m = tc.metric();
  Mat g = m.g(fp.q);
  // Coordinate gradient of psi by central differences, raised with g^{-1}.
  Vec dpsi(3);
  const double h = 1e-5;
  for (int i = 0; i < 3; ++i) {
    Vec e = Vec::Unit(3, i) * h;
    dpsi[i] = (tc.foot_point(fp.q + e, &fp).psi - tc.foot_point(fp.q - e, &fp).psi) / (2 * h);
  }
  Vec grad = g.inverse() * dpsi;
  Vec radial = 2 * (fp.vertical() * fp.y);
  EXPECT_LT(std::sqrt(inner(g, grad - radial, grad - radial)), 1e-6);
  EXPECT_NEAR(std::sqrt(inner(g, grad, grad)), 2 * std::sqrt(fp.psi), 1e-6);
}

TEST(TubeRadius, EstimateIsPositiveAndBounded) {
  TubularChart tc(waist_curve(256), 1.0);
  double r = estimate_tube_radius(tc, 0.8, 8);
  EXPECT_GT(r, 0.05);
  EXPECT_LE(r, 0.4);
}

TEST(PrincipalAngles, HorizontalPlaneAndTiltedLine) {
  Mat g = Mat::Identity(2, 2);
  Mat H = Mat::Identity(2, 2).leftCols(1), V = Mat::Identity(2, 2).rightCols(1);
  PrincipalAngles pa = principal_angles(g, H, V, H);
  EXPECT_NEAR(pa.star_omega, 1, 1e-15);
  EXPECT_NEAR(pa.fs, 0, 1e-15);
  EXPECT_NEAR(pa.one_minus_star_omega, 0, 1e-15);
  for (double phi : {0.1, 0.7, 1.3, 1e-9}) {
    Mat L(2, 1);
    L << std::cos(phi), std::sin(phi);
    pa = principal_angles(g, H, V, L);
    EXPECT_NEAR(pa.star_omega, std::cos(phi), 1e-15);
    EXPECT_NEAR(pa.fs, std::sin(phi), 1e-15);
    EXPECT_NEAR(pa.one_minus_star_omega, 1 - std::cos(phi), 1e-16 + 1e-14 * (1 - std::cos(phi)));
  }
}

TEST(PrincipalAngles, DependentVectorsThrowRank) {
  Mat g = Mat::Identity(4, 4);
  Mat H = g.leftCols(2), V = g.rightCols(2);
  Mat L(4, 2);
  L.col(0) = vec({1, 2, 3, 4});
  L.col(1) = 2 * L.col(0);
  try {
    principal_angles(g, H, V, L);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Rank);
  }
}

TEST(PrincipalAngles, RandomTwoPlanesAgainstSvdOracle) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Mat g = Mat::Identity(4, 4);
  Mat H = g.leftCols(2), V = g.rightCols(2);
  for (int t = 0; t < 1000; ++t) {
    Mat L(4, 2);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) L(i, j) = nd(rng);
    PrincipalAngles pa = principal_angles(g, H, V, L);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(L);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(4, 2);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Q.topRows(2));
    Vec cosines = svd.singularValues();
    double fs = std::sqrt(std::max(0.0, 1 - cosines.minCoeff() * cosines.minCoeff()));
    EXPECT_NEAR(pa.fs, fs, 1e-10);
    EXPECT_NEAR(std::abs(pa.star_omega), cosines.prod(), 1e-12);
    // Adapted bases are orthonormal and L-tangent vectors split as cos e_j + sin e_{n+j}.
    for (int j = 0; j < 2; ++j) {
      Vec expect = std::cos(pa.angles[j]) * pa.horizontal.col(j) + std::sin(pa.angles[j]) * pa.vertical.col(j);
      EXPECT_LT((pa.tangent.col(j) - expect).norm(), 1e-10);
    }
    EXPECT_LT((pa.normal.transpose() * pa.tangent).norm(), 1e-10);
  }
}

TEST(PrincipalAngles, BoundsOnRandomPlanes) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int n : {1, 2}) {
    const int m = 2, N = n + m;
    for (int t = 0; t < 1000; ++t) {
      Mat Qf = random_orthogonal(N, rng);
      Mat g = Mat::Identity(N, N);
      Mat H = Qf.leftCols(n), V = Qf.rightCols(m);
      Mat L(N, n);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < n; ++j) L(i, j) = (i < n ? 3.0 : 1.0) * nd(rng);
      PrincipalAngles pa = principal_angles(g, H, V, L);
      const double fs = pa.fs;
      if (pa.star_omega > 0.5) EXPECT_GE(pa.one_minus_star_omega, 0.5 * fs * fs - 1e-12);
      if (pa.star_omega > 0) EXPECT_LE(pa.one_minus_star_omega, n * fs * fs + 1e-12);
      // Coframe of the rotated frame and the adapted bases of L and its complement.
      std::vector<Vec> om(N), te(N);
      for (int j = 0; j < n; ++j) {
        om[j] = pa.horizontal.col(j);
        te[j] = pa.tangent.col(j);
      }
      for (int a = 0; a < m; ++a) {
        om[n + a] = pa.vertical.col(a);
        te[n + a] = pa.normal.col(a);
      }
      std::vector<Vec> omega_n(om.begin(), om.begin() + n);
      double prod_cos = 1;
      for (int k = 0; k < n; ++k) prod_cos *= std::cos(pa.angles[k]);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          double s1 = 0, s2 = 0;
          for (int k = 0; k < n; ++k) {
            s1 += std::abs(om[j].dot(te[i]) * om[k].dot(te[i]));
          }
          for (int a = n; a < N; ++a) s2 = std::max(s2, std::abs(om[a].dot(te[i]) * om[j].dot(te[i])));
          EXPECT_LE(s1, n + 1e-12);
          EXPECT_LE(s2, n * fs + 1e-12);
        }
        for (int a = n; a < N; ++a) {
          // Omega on (e~_a, e~_1, ..., omit i, ..., e~_n).
          std::vector<Vec> args{te[a]};
          for (int k = 0; k < n; ++k)
            if (k != i) args.push_back(te[k]);
          double w7 = wedge(omega_n, args);
          double expect7 = (a == n + i) ? std::pow(-1.0, i + 1) * std::tan(pa.angles[i]) * prod_cos : 0.0;
          // Indices here are 0-based, so (-1)^i with 1-based i becomes (-1)^(i+1).
          EXPECT_NEAR(w7, expect7, 1e-10);
          EXPECT_LE(std::abs(w7), fs + 1e-12);
          std::vector<Vec> co{om[a]};
          for (int k = 0; k < n; ++k)
            if (k != i) co.push_back(om[k]);
          std::vector<Vec> tl(te.begin(), te.begin() + n);
          double w8 = wedge(co, tl);
          double expect8 = (a == n + i) ? std::pow(-1.0, i) * std::tan(pa.angles[i]) * prod_cos : 0.0;
          EXPECT_NEAR(w8, expect8, 1e-10);
          EXPECT_LE(std::abs(w8), n * fs + 1e-12);
          for (int b = n; b < N; ++b) {
            for (int j = 0; j < n; ++j) {
              std::vector<Vec> args2{te[b]};
              for (int k = 0; k < n; ++k)
                if (k != j) args2.push_back(te[k]);
              double w = wedge(co, args2);
              EXPECT_LE(std::abs(w), 1 + 1e-12);
              if (a == b && j == i) {
                double target = std::cos(a - n < n ? pa.angles[a - n] : 0.0) / std::cos(pa.angles[j]) * prod_cos;
                EXPECT_LE(std::abs(w - target), (n - 1) * fs * fs + 1e-10);
              }
            }
          }
        }
      }
    }
  }
}

TEST(HessianProbe, VerticalHessianOnSigmaIsTwo) {
  TubularChart tc(waist_curve(), 0.3);
  FermiPoint fp = tc.fermi_point(1.0, vec({0.0}));
  EXPECT_NEAR(hessian_psi(tc, fp, fp.frame.col(1)), 2.0, 1e-6);
  EXPECT_NEAR(hessian_psi(tc, fp, fp.frame.col(0)), 0.0, 1e-6);
}

TEST(HessianProbe, WaistCircleTangent) {
  TubularChart tc(waist_curve(), 0.3);
  for (double r0 : {0.1, 0.25}) {
    FermiPoint fp = tc.fermi_point(2.0, vec({r0}));
    Vec X = fp.frame.col(0);
    EXPECT_NEAR(hessian_psi(tc, fp, X), 2 * r0 * std::tanh(r0), 1e-4);
  }
}

TEST(HessianProbe, WaistRatioIsBoundedBelow) {
  TubularChart tc(waist_curve(), 0.3);
  ProbeReport rep = hessian_psi_probe(tc, 200, 42);
  EXPECT_EQ(rep.samples + rep.skipped, 200);
  EXPECT_EQ(rep.violations, 0);
  EXPECT_GT(rep.min_ratio, 1.8);
  ProbeReport again = hessian_psi_probe(tc, 200, 42);
  EXPECT_EQ(again.min_ratio, rep.min_ratio);
}

TEST(Expansion, FlatLineIsExact) {
  ReferenceCurve ref =
      ReferenceCurve::coordinate_line(models::flat(3, {2 * kPi, 0, 0}), vec({0, 0, 0}), vec({1, 0, 0}), 2 * kPi, 256);
  TubularChart tc(ref, 0.5);
  ExpansionReport rep = expansion_check(tc, 1.0);
  for (const auto& t : rep.terms)
    for (double r : t.residuals) EXPECT_LT(r, 1e-9) << t.name;
}

TEST(Expansion, HyperbolicWaistSlopes) {
  TubularChart tc(waist_curve(), 0.5);
  ExpansionReport rep = expansion_check(tc, 1.0);
  EXPECT_GE(rep.min_slope(), 1.8);
  // g_xx = cosh^2 y matches 1 + y^2 to fourth order.
  Mat G = tc.fermi_metric(1.0, vec({0.1}));
  EXPECT_NEAR(G(0, 0), std::cosh(0.1) * std::cosh(0.1), 1e-10);
}

TEST(Expansion, Hyperbolic3dAndSphereEquator) {
  TubularChart tc3(waist3d_curve(), 0.5);
  EXPECT_GE(expansion_check(tc3, 2.0).min_slope(), 1.8);
  ReferenceCurve s3 =
      ReferenceCurve::coordinate_line(models::round_s3(), vec({kPi / 2, kPi / 2, 0}), vec({0, 0, 1}), 2 * kPi, 1024);
  TubularChart tcs(s3, 0.4);
  EXPECT_GE(expansion_check(tcs, 1.0).min_slope(), 1.8);
}
