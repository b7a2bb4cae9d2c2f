#pragma once

#include <Eigen/Dense>
#include <array>
#include <random>

// Linear algebra of the G2 3-form on R^7 in the orthonormal model frame
//   phi  = w567 + w125 - w345 + w136 + w246 + w147 - w237
//   *phi = w1234 - w1267 + w3467 + w1357 + w2457 - w1456 + w2356
// (indices 1-based in comments, 0-based in code). With this orientation the
// normal bundle of a coassociative 4-plane corresponds to anti-self-dual forms.

namespace stableflow::g2 {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Frame7 = Eigen::Matrix<double, 7, 7>;

class G2Structure {
 public:
  G2Structure();

  double phi(int a, int b, int c) const { return phi_[(a * 7 + b) * 7 + c]; }
  double star_phi(int a, int b, int c, int d) const { return psi_[((a * 7 + b) * 7 + c) * 7 + d]; }
  double phi(const Vec7& x, const Vec7& y, const Vec7& z) const;
  double star_phi(const Vec7& x, const Vec7& y, const Vec7& z, const Vec7& w) const;
  // (x cross y)_a = phi(x, y, e_a).
  Vec7 cross(const Vec7& x, const Vec7& y) const;

 private:
  std::array<double, 343> phi_{};
  std::array<double, 2401> psi_{};
};

const G2Structure& model();

// Hodge dual of a 3-form on Euclidean R^7 with the standard orientation.
std::array<double, 2401> hodge_star3(const std::array<double, 343>& form);

// Adapted frame of a coassociative 4-plane (columns of L span it) from a unit
// normal e5 and a unit tangent e1: e2 = e5 x e1, e3 tangent and orthogonal
// to e1, e2, e4 = e3 x e5, e6 = e1 x e3, e7 = e3 x e2. Throws NotCoassociative
// when phi does not vanish on L.
Frame7 coassoc_frame(const Eigen::Matrix<double, 7, 4>& L, const Vec7& e5, const Vec7& e1);
// max |phi(f_a, f_b, f_c) - phi_model(a, b, c)|.
double model_form_residual(const Frame7& f);

// Algebraic curvature tensor on R^7, R(a,b,c,d) = <R(e_c,e_d)e_b, e_a>.
struct Curvature7 {
  std::array<double, 2401> v{};
  double operator()(int a, int b, int c, int d) const { return v[((a * 7 + b) * 7 + c) * 7 + d]; }
  double& operator()(int a, int b, int c, int d) { return v[((a * 7 + b) * 7 + c) * 7 + d]; }
  Curvature7 in_frame(const Frame7& f) const;
};

// Second fundamental form h[alpha][i][j], alpha = normal index 0..2 (e5..e7), i, j tangent 0..3.
struct SecondForm {
  double h[3][4][4] = {};
  SecondForm in_frame(const Frame7& f) const;
};

struct IdentityResidual {
  std::array<double, 7> identity{};  // max over (A, B) of each of the seven contractions
  double max() const;
};

// The seven contractions expressing that the cross product is parallel.
IdentityResidual curvature_identity_residual(const Curvature7& R);
// Pair symmetry, antisymmetry and first Bianchi.
double curvature_symmetry_residual(const Curvature7& R);
double ricci_residual(const Curvature7& R);
// Four relations per tangent index tying h to the G2 structure.
double coassociative_h_residual(const SecondForm& h);
// |sum_j e_j x II(e_i, e_j)|, max over i.
double encapsulation_residual(const SecondForm& h);
double mean_curvature(const SecondForm& h);

// Dimension of the space of curvature tensors satisfying the symmetries,
// Bianchi and the seven identities (77 for G2).
int curvature_kernel_dimension();
int second_form_kernel_dimension();

// Random elements of the constraint kernels (orthogonal projection of a
// Gaussian vector), with constraints satisfied to roundoff.
Curvature7 random_curvature(std::mt19937_64& rng);
SecondForm random_second_form(std::mt19937_64& rng);

struct QComparison {
  double q = 0;       // -sum_i R(e_i, v, e_i, v) - |h_v|^2
  double qtilde = 0;  // -2 W_-(v, v) + s/3 for the Gauss-equation curvature of Sigma
  double residual = 0;
};

// Sigma = span(e1..e4) of the model frame, v a unit normal. Rejects samples
// that violate the constraints (ConstraintViolation).
QComparison q_equals_qtilde(const Curvature7& R, const SecondForm& h, const Vec7& v);

}  // namespace stableflow::g2
