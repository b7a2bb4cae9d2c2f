#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <string>
#include <vector>

#include "stableflow/tubular/tubular.hpp"

namespace stableflow {

enum class Classification { StronglyStable, StableOnly, Unstable, Inconclusive };
std::string to_string(Classification c);

// Threshold on c0 below which positivity is not claimed.
constexpr double kMarginTolerance = 1e-6;
// Reference curves with sup |H| above this are rejected as non-minimal.
constexpr double kMinimalityTolerance = 1e-8;

struct NodeMargin {
  double s = 0;
  Mat W;  // (R - A)_{ab} = -R(T, E_a, T, E_b) - h_a h_b
  double min_eig = 0;
  double asymmetry = 0;
};

struct StabilityReport {
  std::vector<NodeMargin> nodes;
  double c0 = 0;
  double max_asymmetry = 0;
  double sup_H = 0;
  std::vector<double> jacobi_spectrum;
  Classification classification = Classification::Inconclusive;
  std::string hint;
};

// Pointwise part: (R - A) on `nodes` uniformly spaced points of Sigma.
// Throws NotMinimal when the reference curve is not a geodesic.
StabilityReport strong_stability_margin(const ReferenceCurve& ref, int nodes = 256);
inline StabilityReport strong_stability_margin(const TubularChart& tc, int nodes = 256) {
  return strong_stability_margin(tc.reference(), nodes);
}

// Discrete Jacobi operator on normal fields along Sigma written in the
// parallel normal frame: A = (stiffness)/h + W with lumped mass h = L/N.
// The quadratic form h * v^T A v is the second variation
//   sum_k |v_{k+1} - v_k|^2 / h + h sum_k v_k^T W_k v_k,
// where the wrap-around difference uses v_N = Hol v_0.
class JacobiOperator {
 public:
  JacobiOperator(const ReferenceCurve& ref, int nodes);

  int nodes() const { return N_; }
  int codim() const { return m_; }
  int size() const { return N_ * m_; }
  double spacing() const { return h_; }
  const Mat& holonomy() const { return hol_; }
  const std::vector<Mat>& potential() const { return W_; }
  const Eigen::SparseMatrix<double>& matrix() const { return A_; }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(A_); }

  // Second variation of a normal field sampled on the grid (components in the parallel frame).
  double second_variation(const Eigen::VectorXd& v) const;
  // Discrete L2 norm squared h * |v|^2.
  double mass(const Eigen::VectorXd& v) const { return h_ * v.squaredNorm(); }

 private:
  int N_, m_;
  double h_;
  Mat hol_;
  std::vector<Mat> W_;
  Eigen::SparseMatrix<double> A_;
};

struct Eigenpairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, orthonormal in the Euclidean inner product
  int iterations = 0;
  double max_residual = 0;
};

// k lowest eigenpairs by shifted block inverse iteration with Rayleigh-Ritz.
// Convergence: |A v - lambda v| / max(|lambda|, 1) <= tol for every pair.
Eigenpairs lowest_eigenpairs(const Eigen::SparseMatrix<double>& A, int k, double tol = 1e-8,
                             int max_iterations = 5000, std::uint64_t seed = 1);

// Full report: pointwise margin, k lowest Jacobi eigenvalues and the classification.
StabilityReport analyze_stability(const ReferenceCurve& ref, int nodes = 256, int k = 8);

// min over the grid of lambda_min(Ric^L - c id); Ric^L in orthonormal frames.
double lagrangian_margin(const std::vector<Mat>& ricci, double einstein_constant);

// Curvature of a 4-dimensional Sigma in an orthonormal frame. Returns the
// smallest eigenvalue of -2 W_- + s/3 on anti-self-dual 2-forms. Throws
// InvalidCurvature when the curvature symmetries fail.
struct CoassociativeMargin {
  Mat block;  // 3x3, basis {e12 - e34, e13 + e24, e14 - e23}
  double scalar = 0;
  double margin = 0;
};
CoassociativeMargin coassociative_margin(const Tensor4& R);

}  // namespace stableflow
