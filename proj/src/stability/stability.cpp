#include "stableflow/stability/stability.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>

namespace stableflow {

std::string to_string(Classification c) {
  switch (c) {
    case Classification::StronglyStable:
      return "strongly-stable";
    case Classification::StableOnly:
      return "stable-only";
    case Classification::Unstable:
      return "unstable";
    case Classification::Inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

namespace {

NodeMargin node_margin(const ReferenceCurve& ref, double s, const CurvaturePoint& cp, const Vec& h) {
  const int cd = ref.codim();
  Mat F = ref.frame(s);
  NodeMargin nm;
  nm.s = s;
  nm.W.resize(cd, cd);
  for (int a = 0; a < cd; ++a)
    for (int b = 0; b < cd; ++b) {
      double rab = cp.R.eval(F.col(0), F.col(a + 1), F.col(0), F.col(b + 1));
      double rba = cp.R.eval(F.col(0), F.col(b + 1), F.col(0), F.col(a + 1));
      nm.asymmetry = std::max(nm.asymmetry, std::abs(rab - rba));
      nm.W(a, b) = -0.5 * (rab + rba) - h[a] * h[b];
    }
  nm.min_eig = Eigen::SelfAdjointEigenSolver<Mat>(nm.W, Eigen::EigenvaluesOnly).eigenvalues()[0];
  return nm;
}

Vec normal_curvature(const ReferenceCurve& ref, double s) {
  const int cd = ref.codim();
  Mat F = ref.frame(s);
  Vec kappa = ref.curvature(s);
  Mat g = ref.metric().g(ref.at(s).x);
  Vec h(cd);
  for (int a = 0; a < cd; ++a) h[a] = inner(g, kappa, F.col(a + 1));
  return h;
}

}  // namespace

StabilityReport strong_stability_margin(const ReferenceCurve& ref, int nodes) {
  StabilityReport rep;
  rep.sup_H = ref.minimality_defect();
  if (rep.sup_H > kMinimalityTolerance)
    throw Error(ErrorCode::NotMinimal, "reference curve is not minimal: sup|H| = " + std::to_string(rep.sup_H));
  rep.c0 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < nodes; ++k) {
    double s = k * ref.length() / nodes;
    CurvaturePoint cp = riemann(ref.metric(), ref.at(s).x);
    NodeMargin nm = node_margin(ref, s, cp, normal_curvature(ref, s));
    rep.c0 = std::min(rep.c0, nm.min_eig);
    rep.max_asymmetry = std::max(rep.max_asymmetry, nm.asymmetry);
    rep.nodes.push_back(std::move(nm));
  }
  if (rep.max_asymmetry > 1e-8)
    throw Error(ErrorCode::InvalidCurvature,
                "(R - A) asymmetry " + std::to_string(rep.max_asymmetry) + " exceeds 1e-8");
  if (rep.c0 > kMarginTolerance) {
    rep.classification = Classification::StronglyStable;
  } else {
    rep.classification = Classification::Inconclusive;
    rep.hint = "pointwise margin is not positive; the Jacobi spectrum decides stability";
  }
  return rep;
}

JacobiOperator::JacobiOperator(const ReferenceCurve& ref, int nodes)
    : N_(nodes), m_(ref.codim()), h_(ref.length() / nodes), hol_(ref.holonomy()) {
  if (nodes < 8) throw Error(ErrorCode::Discretization, "Jacobi operator needs at least 8 nodes");
  const int n = N_ * m_;
  W_.resize(N_);
  for (int k = 0; k < N_; ++k) {
    double s = k * h_;
    CurvaturePoint cp = riemann(ref.metric(), ref.at(s).x);
    W_[k] = node_margin(ref, s, cp, normal_curvature(ref, s)).W;
  }
  std::vector<Eigen::Triplet<double>> trip;
  const double inv = 1.0 / (h_ * h_);
  auto add_block = [&](int bi, int bj, const Mat& B) {
    for (int a = 0; a < m_; ++a)
      for (int b = 0; b < m_; ++b)
        if (B(a, b) != 0) trip.emplace_back(bi * m_ + a, bj * m_ + b, B(a, b));
  };
  const Mat I = Mat::Identity(m_, m_);
  for (int k = 0; k < N_; ++k) add_block(k, k, 2 * inv * I + W_[k]);
  for (int k = 0; k + 1 < N_; ++k) {
    add_block(k, k + 1, -inv * I);
    add_block(k + 1, k, -inv * I);
  }
  // |Hol v_0 - v_{N-1}|^2 couples the last node to the first through the holonomy.
  add_block(N_ - 1, 0, -inv * hol_);
  add_block(0, N_ - 1, -inv * hol_.transpose());
  A_.resize(n, n);
  A_.setFromTriplets(trip.begin(), trip.end());
}

double JacobiOperator::second_variation(const Eigen::VectorXd& v) const {
  if (v.size() != size())
    throw Error(ErrorCode::GridMismatch, "normal field has " + std::to_string(v.size()) + " entries, expected " +
                                             std::to_string(size()));
  double e = 0;
  for (int k = 0; k < N_; ++k) {
    Vec vk = v.segment(k * m_, m_);
    Vec next = k + 1 < N_ ? Vec(v.segment((k + 1) * m_, m_)) : Vec(hol_ * v.segment(0, m_));
    e += (next - vk).squaredNorm() / h_ + h_ * vk.dot(W_[k] * vk);
  }
  return e;
}

Eigenpairs lowest_eigenpairs(const Eigen::SparseMatrix<double>& A, int k, double tol, int max_iterations,
                             std::uint64_t seed) {
  const int n = static_cast<int>(A.rows());
  k = std::min(k, n);
  const int b = std::min(n, k + 4);
  Eigenpairs out;
  if (n <= 2 * b) {
    // Small problems: dense solve.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(A)};
    out.values = es.eigenvalues().head(k);
    out.vectors = es.eigenvectors().leftCols(k);
    return out;
  }
  // Shift below the Gershgorin bound so that A - sigma is positive definite.
  double lower = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    double diag = 0, off = 0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, i); it; ++it) {
      if (it.row() == i)
        diag = it.value();
      else
        off += std::abs(it.value());
    }
    lower = std::min(lower, diag - off);
  }
  const double sigma = lower - 1.0;
  Eigen::SparseMatrix<double> B = A;
  for (int i = 0; i < n; ++i) B.coeffRef(i, i) -= sigma;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(B);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::Solver, "factorization of the shifted operator failed");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(n, b);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < b; ++j) X(i, j) = nd(rng);
  auto orth = [&](const Eigen::MatrixXd& Y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
    return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(n, b));
  };
  X = orth(X);
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::MatrixXd Q = orth(solver.solve(X));
    Eigen::MatrixXd AQ = A * Q;
    Eigen::MatrixXd H = Q.transpose() * AQ;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
    X = Q * es.eigenvectors();
    Eigen::MatrixXd AX = AQ * es.eigenvectors();
    double worst = 0;
    for (int j = 0; j < k; ++j) {
      double lam = es.eigenvalues()[j];
      worst = std::max(worst, (AX.col(j) - lam * X.col(j)).norm() / std::max(std::abs(lam), 1.0));
    }
    if (worst <= tol) {
      out.values = es.eigenvalues().head(k);
      out.vectors = X.leftCols(k);
      out.iterations = it;
      out.max_residual = worst;
      return out;
    }
  }
  throw Error(ErrorCode::IterationLimit, "block inverse iteration did not converge in " +
                                             std::to_string(max_iterations) + " iterations");
}

StabilityReport analyze_stability(const ReferenceCurve& ref, int nodes, int k) {
  StabilityReport rep = strong_stability_margin(ref, nodes);
  JacobiOperator J(ref, nodes);
  Eigenpairs ep = lowest_eigenpairs(J.matrix(), k);
  rep.jacobi_spectrum.assign(ep.values.data(), ep.values.data() + ep.values.size());
  if (rep.classification != Classification::StronglyStable) {
    const double lmin = rep.jacobi_spectrum.front();
    if (lmin >= -kMarginTolerance) {
      rep.classification = Classification::StableOnly;
      rep.hint = "";
    } else {
      rep.classification = Classification::Unstable;
      rep.hint = "";
    }
  }
  return rep;
}

double lagrangian_margin(const std::vector<Mat>& ricci, double einstein_constant) {
  double out = std::numeric_limits<double>::infinity();
  for (const Mat& r : ricci) {
    Mat sym = 0.5 * (r + r.transpose());
    sym -= einstein_constant * Mat::Identity(r.rows(), r.cols());
    out = std::min(out, Eigen::SelfAdjointEigenSolver<Mat>(sym, Eigen::EigenvaluesOnly).eigenvalues()[0]);
  }
  return out;
}

CoassociativeMargin coassociative_margin(const Tensor4& R) {
  if (R.n != 4) throw Error(ErrorCode::InvalidArgument, "coassociative margin needs a 4-dimensional curvature");
  CurvatureResiduals res = curvature_residuals(R);
  if (res.max() > 1e-8)
    throw Error(ErrorCode::InvalidCurvature, "curvature symmetries fail (residual " + std::to_string(res.max()) + ")");
  // Anti-self-dual basis as antisymmetric coefficient matrices.
  Eigen::Matrix4d b[3];
  for (auto& m : b) m.setZero();
  auto set = [](Eigen::Matrix4d& m, int i, int j, double v) {
    m(i, j) = v;
    m(j, i) = -v;
  };
  set(b[0], 0, 1, 1);
  set(b[0], 2, 3, -1);
  set(b[1], 0, 2, 1);
  set(b[1], 1, 3, 1);
  set(b[2], 0, 3, 1);
  set(b[2], 1, 2, -1);
  CoassociativeMargin out;
  out.block = Mat::Zero(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int p = 0; p < 4; ++p)
        for (int q = p + 1; q < 4; ++q)
          for (int r = 0; r < 4; ++r)
            for (int s = r + 1; s < 4; ++s) acc += b[i](p, q) * R(p, q, r, s) * b[j](r, s);
      out.block(i, j) = 0.5 * acc;
    }
  double s = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) s += R(i, j, i, j);
  out.scalar = 2 * s;
  Mat op = -2 * out.block + 0.5 * out.scalar * Mat::Identity(3, 3);
  out.margin = Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (op + op.transpose()), Eigen::EigenvaluesOnly).eigenvalues()[0];
  return out;
}

}  // namespace stableflow
