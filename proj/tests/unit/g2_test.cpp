#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <random>

#include "stableflow/core.hpp"
#include "stableflow/g2/g2.hpp"

using namespace stableflow;
using namespace stableflow::g2;

namespace {

Vec7 e(int i) { return Vec7::Unit(i - 1); }

Vec7 random_vec(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vec7 v;
  for (int i = 0; i < 7; ++i) v[i] = nd(rng);
  return v;
}

Eigen::Matrix<double, 7, 4> model_plane() { return Frame7::Identity().leftCols<4>(); }

// Lie algebra of G2: skew matrices A with A.phi = 0.
Eigen::MatrixXd g2_algebra() {
  const G2Structure& g = model();
  Eigen::MatrixXd C(343, 21);
  int col = 0;
  for (int p = 0; p < 7; ++p)
    for (int q = p + 1; q < 7; ++q, ++col) {
      Frame7 A = Frame7::Zero();
      A(p, q) = 1;
      A(q, p) = -1;
      for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b)
          for (int c = 0; c < 7; ++c)
            C((a * 7 + b) * 7 + c, col) = g.phi(A.col(a), e(b + 1), e(c + 1)) + g.phi(e(a + 1), A.col(b), e(c + 1)) +
                                           g.phi(e(a + 1), e(b + 1), A.col(c));
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10) ++rank;
  return svd.matrixV().rightCols(21 - rank);
}

Frame7 skew_from(const Eigen::VectorXd& x) {
  Frame7 A = Frame7::Zero();
  int col = 0;
  for (int p = 0; p < 7; ++p)
    for (int q = p + 1; q < 7; ++q, ++col) {
      A(p, q) = x[col];
      A(q, p) = -x[col];
    }
  return A;
}

}  // namespace

TEST(G2Cross, ModelProducts) {
  const G2Structure& g = model();
  EXPECT_LT((g.cross(e(1), e(2)) - e(5)).norm(), 1e-15);
  EXPECT_LT((g.cross(e(6), e(7)) - e(5)).norm(), 1e-15);
  EXPECT_LT(g.cross(e(3), e(3)).norm(), 1e-15);
}

TEST(G2Cross, NormIdentity) {
  const G2Structure& g = model();
  std::mt19937_64 rng(7);
  for (int t = 0; t < 1000; ++t) {
    Vec7 x = random_vec(rng), y = random_vec(rng);
    Vec7 c = g.cross(x, y);
    double expect = x.squaredNorm() * y.squaredNorm() - std::pow(x.dot(y), 2);
    EXPECT_NEAR(c.squaredNorm(), expect, 1e-12 * std::max(1.0, expect));
    EXPECT_NEAR(c.dot(x), 0, 1e-12 * x.squaredNorm() * y.norm());
    EXPECT_LT((c + g.cross(y, x)).norm(), 1e-13);
  }
}

TEST(G2Structure, SevenComponentsAndHodgeDual) {
  const G2Structure& g = model();
  std::array<double, 343> phi{};
  int independent = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      for (int c = 0; c < 7; ++c) {
        phi[(a * 7 + b) * 7 + c] = g.phi(a, b, c);
        if (a < b && b < c && g.phi(a, b, c) != 0) ++independent;
      }
  EXPECT_EQ(independent, 7);
  auto star = hodge_star3(phi);
  double worst = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      for (int c = 0; c < 7; ++c)
        for (int d = 0; d < 7; ++d)
          worst = std::max(worst, std::abs(star[((a * 7 + b) * 7 + c) * 7 + d] - g.star_phi(a, b, c, d)));
  EXPECT_EQ(worst, 0.0);
  EXPECT_EQ(g.star_phi(0, 1, 2, 3), 1.0);
}

TEST(G2Frame, ModelPlaneGivesModelFrame) {
  Frame7 f = coassoc_frame(model_plane(), e(5), e(1));
  EXPECT_LT((f - Frame7::Identity()).norm(), 1e-14);
  const G2Structure& g = model();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) EXPECT_EQ(g.phi(i, j, k), 0.0);
  // (e5 contracted with phi) restricted to Sigma is w12 - w34.
  EXPECT_EQ(g.phi(4, 0, 1), 1.0);
  EXPECT_EQ(g.phi(4, 2, 3), -1.0);
  EXPECT_EQ(g.phi(4, 0, 2), 0.0);
}

TEST(G2Frame, RotatedPlaneReproducesModelForm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(0, 2 * M_PI);
  const Eigen::MatrixXd alg = g2_algebra();
  ASSERT_EQ(alg.cols(), 14);
  for (int t = 0; t < 50; ++t) {
    // In-plane rotation mixing {1,2} with {3,4}.
    double th = ud(rng);
    Frame7 rot = Frame7::Identity();
    rot(0, 0) = rot(2, 2) = std::cos(th);
    rot(0, 2) = -std::sin(th);
    rot(2, 0) = std::sin(th);
    // Followed by a group element moving the plane.
    Eigen::VectorXd c = Eigen::VectorXd::Random(14);
    Frame7 G = skew_from(alg * c).exp();
    Eigen::Matrix<double, 7, 4> L = G * rot * model_plane();
    Vec7 n = G * (std::cos(th) * e(5) + std::sin(th) * e(7));
    Vec7 t1 = L.col(1);
    Frame7 f = coassoc_frame(L, n, t1);
    EXPECT_LT(model_form_residual(f), 1e-10);
    EXPECT_LT((f.transpose() * f - Frame7::Identity()).norm(), 1e-12);
  }
}

TEST(G2Frame, RejectsAssociativeDirections) {
  Eigen::Matrix<double, 7, 4> L;
  L << e(1), e(2), e(5), e(3);
  try {
    coassoc_frame(L, e(4), e(1));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::NotCoassociative);
  }
  EXPECT_THROW(coassoc_frame(model_plane(), e(1), e(2)), Error);
}

TEST(G2Curvature, KernelDimension) {
  EXPECT_EQ(curvature_kernel_dimension(), 77);
  EXPECT_EQ(second_form_kernel_dimension(), 15);
}

TEST(G2Curvature, SamplesSatisfyConstraintsAndAreRicciFlat) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    Curvature7 R = random_curvature(rng);
    EXPECT_LT(curvature_symmetry_residual(R), 1e-12);
    EXPECT_LT(curvature_identity_residual(R).max(), 1e-12);
    EXPECT_LT(ricci_residual(R), 1e-10);
    double norm = 0;
    for (double x : R.v) norm = std::max(norm, std::abs(x));
    EXPECT_GT(norm, 1e-2);
  }
  Curvature7 zero;
  EXPECT_EQ(curvature_identity_residual(zero).max(), 0.0);
}

TEST(G2Curvature, ConstantCurvatureViolatesIdentities) {
  Curvature7 R;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      if (a != b) {
        R(a, b, a, b) = 1;
        R(a, b, b, a) = -1;
      }
  EXPECT_LT(curvature_symmetry_residual(R), 1e-15);
  EXPECT_GT(curvature_identity_residual(R).max(), 0.5);
  EXPECT_GT(ricci_residual(R), 1);
}

TEST(G2SecondForm, RelationsImplyTraceFreeAndEncapsulation) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    SecondForm h = random_second_form(rng);
    EXPECT_LT(coassociative_h_residual(h), 1e-12);
    EXPECT_LT(mean_curvature(h), 1e-12);
    EXPECT_LT(encapsulation_residual(h), 1e-12);
  }
  SecondForm bad;
  bad.h[0][0][0] = bad.h[0][1][1] = 1;
  EXPECT_GT(coassociative_h_residual(bad), 0.5);
  EXPECT_GT(encapsulation_residual(bad), 0.5);
}

TEST(G2Q, ZeroSample) {
  QComparison q = q_equals_qtilde(Curvature7{}, SecondForm{}, e(5));
  EXPECT_EQ(q.q, 0.0);
  EXPECT_EQ(q.qtilde, 0.0);
}

TEST(G2Q, PureCurvature) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 100; ++t) {
    Curvature7 R = random_curvature(rng);
    Vec7 v = Vec7::Zero();
    v.tail<3>() = random_vec(rng).head<3>().normalized();
    QComparison q = q_equals_qtilde(R, SecondForm{}, v);
    EXPECT_LT(q.residual, 1e-9) << q.q << " vs " << q.qtilde;
  }
}

TEST(G2Q, RandomSamples) {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    std::mt19937_64 rng(seed);
    Curvature7 R = random_curvature(rng);
    SecondForm h = random_second_form(rng);
    Vec7 v = Vec7::Zero();
    v.tail<3>() = random_vec(rng).head<3>().normalized();
    worst = std::max(worst, q_equals_qtilde(R, h, v).residual);
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(G2Q, RejectsConstraintViolation) {
  Curvature7 R;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      if (a != b) {
        R(a, b, a, b) = 1;
        R(a, b, b, a) = -1;
      }
  try {
    q_equals_qtilde(R, SecondForm{}, e(5));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::ConstraintViolation);
  }
}
