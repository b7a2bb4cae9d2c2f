#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stableflow/forms/forms.hpp"
#include "stableflow/geometry/models.hpp"

using namespace stableflow;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> v) {
  Vec r(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

// Curve r = f(theta) on the hyperbolic cylinder, sampled at uniform theta.
DiscreteCurve polar_graph(const ChartMetric& m, int N, const std::function<double(double)>& f) {
  std::vector<Vec> pts;
  for (int k = 0; k < N; ++k) {
    double th = 2 * kPi * k / N;
    pts.push_back(vec({f(th), th}));
  }
  return DiscreteCurve(m, pts);
}

ReferenceCurve waist(int nodes = 1024) {
  return ReferenceCurve::coordinate_line(models::hyperbolic_cylinder(), vec({0, 0}), vec({0, 1}), 2 * kPi, nodes);
}

}  // namespace

TEST(DiscreteCurve, UnwrapsPeriodicCoordinate) {
  DiscreteCurve c = polar_graph(models::hyperbolic_cylinder(), 32, [](double) { return 0.1; });
  EXPECT_NEAR(c.lap()[1], 2 * kPi, 1e-14);
  EXPECT_NEAR(c.lifted(33)[1], c.point(1)[1] + 2 * kPi, 1e-14);
  EXPECT_NEAR(c.lifted(-1)[1], c.point(31)[1] - 2 * kPi, 1e-14);
  EXPECT_NEAR(c.length(), 2 * kPi * std::cosh(0.1), 1e-2);
}

TEST(Extrinsic, WaistIsGeodesic) {
  ExtrinsicData ex = extrinsic(polar_graph(models::hyperbolic_cylinder(), 64, [](double) { return 0.0; }));
  EXPECT_LT(ex.sup_H(), 1e-13);
  EXPECT_NEAR(ex.length, 2 * kPi, 1e-12);
}

TEST(Extrinsic, LevelCircleCurvatureIsTanhInward) {
  const double r0 = 0.4;
  ExtrinsicData ex = extrinsic(polar_graph(models::hyperbolic_cylinder(), 64, [&](double) { return r0; }));
  for (const auto& n : ex.nodes) {
    EXPECT_NEAR(std::sqrt(n.ii_norm2), std::tanh(r0), 1e-12);
    EXPECT_LT(n.H[0], 0);  // points toward the waist
    EXPECT_NEAR(n.H[1], 0, 1e-12);
  }
}

TEST(Extrinsic, FlatCircle) {
  const double rho = 0.7;
  std::vector<Vec> pts;
  const int N = 128;
  for (int k = 0; k < N; ++k) pts.push_back(vec({rho * std::cos(2 * kPi * k / N), rho * std::sin(2 * kPi * k / N)}));
  ExtrinsicData ex = extrinsic(DiscreteCurve(models::flat(2), pts));
  for (const auto& n : ex.nodes) EXPECT_NEAR(std::sqrt(n.ii_norm2), 1 / rho, 1e-6);
}

TEST(Extrinsic, TiltedGreatCircleConverges) {
  // Great circle through the equator at inclination i: tan r = tan i sin theta.
  const double inc = 0.5;
  auto f = [&](double th) { return std::atan(std::tan(inc) * std::sin(th)); };
  double prev = 0;
  for (int N : {64, 128, 256}) {
    double sup = extrinsic(polar_graph(models::sphere_equator(), N, f)).sup_H();
    if (prev > 0) EXPECT_GT(prev / sup, 4.0);
    prev = sup;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Extrinsic, TooFewNodesAndBadSpacing) {
  try {
    extrinsic(polar_graph(models::hyperbolic_cylinder(), 8, [](double) { return 0.0; }));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Discretization);
  }
  std::vector<Vec> pts;
  const int N = 64;
  for (int k = 0; k < N; ++k) {
    double u = static_cast<double>(k) / N;
    double th = 2 * kPi * std::pow(u, 3.0);
    pts.push_back(vec({0.2, th}));
  }
  DiscreteCurve bad(models::hyperbolic_cylinder(), pts);
  EXPECT_GT(bad.spacing_ratio(), 10);
  try {
    extrinsic(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ReparametrizeFirst);
  }
  DiscreteCurve good = bad.reparametrized(128);
  EXPECT_LT(good.spacing_ratio(), 1.05);
  ExtrinsicData ex = extrinsic(good);
  for (const auto& n : ex.nodes) EXPECT_NEAR(std::sqrt(n.ii_norm2), std::tanh(0.2), 1e-4);
}

TEST(GaussCodazzi, PlaneInFlatSpace) {
  auto X = [](double u, double v) { return vec({u, v, 0.3 * u - 0.2 * v}); };
  GaussCodazziResidual r = gauss_codazzi_residual(models::flat(3), X, 0.1, 0.2, 1e-2);
  EXPECT_LT(r.max(), 1e-8);
  EXPECT_NEAR(r.mean_curvature, 0, 1e-8);
}

TEST(GaussCodazzi, EquatorialSphereInS3) {
  auto X = [](double u, double v) { return vec({kPi / 2, u, v}); };
  GaussCodazziResidual r = gauss_codazzi_residual(models::round_s3(), X, 1.0, 0.5, 1e-2);
  EXPECT_NEAR(r.intrinsic_k, 1.0, 1e-6);
  EXPECT_LT(r.max(), 1e-6);
}

TEST(GaussCodazzi, SaddleHasCurvatureMinusOne) {
  auto X = [](double u, double v) { return vec({u, v, 0.5 * (u * u - v * v)}); };
  GaussCodazziResidual r = gauss_codazzi_residual(models::flat(3), X, 0.0, 0.0, 1e-2);
  EXPECT_NEAR(r.intrinsic_k, -1.0, 1e-5);
  EXPECT_LT(std::abs(r.gauss), 1e-5);
}

TEST(GaussCodazzi, ScherkSurfaceContractedCodazzi) {
  auto X = [](double u, double v) { return vec({u, v, std::log(std::cos(v) / std::cos(u))}); };
  GaussCodazziResidual r = gauss_codazzi_residual(models::flat(3), X, 0.3, 0.2, 1e-2);
  EXPECT_NEAR(r.mean_curvature, 0, 1e-8);
  EXPECT_LT(std::abs(r.codazzi3[0]) + std::abs(r.codazzi3[1]), 1e-3);
  EXPECT_LT(r.max(), 1e-3);
}

TEST(GaussCodazzi, CurvedAmbientResidualsShrinkQuadratically) {
  auto X = [](double u, double v) { return vec({u, 0.3 * u + 0.2 * v * v + 0.1, v}); };
  ChartMetric m = models::hyperbolic_3d_waist();
  GaussCodazziResidual a = gauss_codazzi_residual(m, X, 0.2, 0.3, 4e-2);
  GaussCodazziResidual b = gauss_codazzi_residual(m, X, 0.2, 0.3, 2e-2);
  EXPECT_LT(b.max(), 1e-3);
  EXPECT_LT(b.max(), a.max() / 3);
}

TEST(ExtendedTensors, SigmaItself) {
  TubularChart tc(waist(), 0.3);
  DiscreteCurve c = polar_graph(tc.metric(), 64, [](double) { return 0.0; });
  ExtrinsicData ex = extrinsic(c);
  auto nodes = extended_tensors(tc, c, ex);
  for (const auto& n : nodes) {
    EXPECT_LT(n.ii_diff2, 1e-24);
    EXPECT_LT(n.s_sigma.norm(), 1e-12);
    EXPECT_NEAR(n.angles.star_omega, 1, 1e-12);
  }
}

TEST(ExtendedTensors, LevelCircleAroundWaist) {
  TubularChart tc(waist(), 0.3);
  const double r0 = 0.2;
  DiscreteCurve c = polar_graph(tc.metric(), 64, [&](double) { return r0; });
  ExtrinsicData ex = extrinsic(c);
  auto nodes = extended_tensors(tc, c, ex);
  for (const auto& n : nodes) {
    EXPECT_NEAR(n.ii_sigma.norm(), 0, 1e-12);
    EXPECT_NEAR(std::abs(n.s_sigma[0]), r0, 1e-9);
    EXPECT_NEAR(n.s_sigma[0] * n.ii_gamma[0], r0 * std::tanh(r0), 1e-9);
    EXPECT_NEAR(n.pairing2, r0 * std::tanh(r0), 1e-9);
    EXPECT_NEAR(n.ii_diff2, std::tanh(r0) * std::tanh(r0), 1e-9);
  }
}

TEST(ExtendedTensors, SteepCurveLeavesGraphicalRegime) {
  TubularChart tc(waist(), 0.3);
  DiscreteCurve c = polar_graph(tc.metric(), 256, [](double th) { return 0.2 * std::sin(10 * th); });
  ExtrinsicData ex = extrinsic(c);
  try {
    extended_tensors(tc, c, ex);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GraphicalRegime);
  }
}

TEST(ExtendedTensors, PairingDeviationIsQuadraticInTilt) {
  // Sigma: the non-geodesic level circle r = rho0, so h(p) != 0.
  const double rho0 = 0.3;
  ChartMetric m = models::hyperbolic_cylinder();
  const double ch = std::cosh(rho0);
  auto param = [=](double s) {
    CurveJet c;
    c.x = vec({rho0, s / ch});
    c.dx = vec({0, 1 / ch});
    c.ddx = vec({0, 0});
    return c;
  };
  TubularChart tc(ReferenceCurve(m, param, 2 * kPi * ch, 1024), 0.3);
  std::vector<double> constants;
  for (double amp : {0.08, 0.04, 0.02}) {
    DiscreteCurve c = polar_graph(m, 128, [&](double th) { return rho0 + amp * std::sin(2 * th); });
    ExtrinsicData ex = extrinsic(c);
    double C = 0;
    for (const auto& n : extended_tensors(tc, c, ex)) {
      double fs2 = n.angles.fs * n.angles.fs;
      if (fs2 < 1e-8 || n.ii_gamma_norm < 1e-12) continue;
      C = std::max(C, std::abs(n.pairing1 - n.pairing1_frame) / (fs2 * n.ii_gamma_norm));
    }
    constants.push_back(C);
  }
  EXPECT_GT(constants[0], 0);
  for (double C : constants) EXPECT_LT(C, 2 * std::tanh(rho0) + 1e-3);
  EXPECT_NEAR(constants[2] / constants[0], 1.0, 0.2);
}
