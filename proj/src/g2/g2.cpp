#include "stableflow/g2/g2.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "stableflow/core.hpp"
#include "stableflow/stability/stability.hpp"

namespace stableflow::g2 {

namespace {

struct Term {
  int i, j, k, l;
  double sign;
};

// 1-based index lists from the model forms.
constexpr Term kPhi[] = {{5, 6, 7, 0, 1},  {1, 2, 5, 0, 1},  {3, 4, 5, 0, -1}, {1, 3, 6, 0, 1},
                         {2, 4, 6, 0, 1},  {1, 4, 7, 0, 1},  {2, 3, 7, 0, -1}};
constexpr Term kPsi[] = {{1, 2, 3, 4, 1}, {1, 2, 6, 7, -1}, {3, 4, 6, 7, 1}, {1, 3, 5, 7, 1},
                         {2, 4, 5, 7, 1}, {1, 4, 5, 6, -1}, {2, 3, 5, 6, 1}};

int perm_sign(std::vector<int> p) {
  int sign = 1;
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = i + 1; j < p.size(); ++j) {
      if (p[i] == p[j]) return 0;
      if (p[i] > p[j]) sign = -sign;
    }
  return sign;
}

}  // namespace

G2Structure::G2Structure() {
  for (const Term& t : kPhi) {
    int idx[3] = {t.i - 1, t.j - 1, t.k - 1};
    std::array<int, 3> p = {0, 1, 2};
    do {
      int s = perm_sign({p[0], p[1], p[2]});
      phi_[(idx[p[0]] * 7 + idx[p[1]]) * 7 + idx[p[2]]] = s * t.sign;
    } while (std::next_permutation(p.begin(), p.end()));
  }
  for (const Term& t : kPsi) {
    int idx[4] = {t.i - 1, t.j - 1, t.k - 1, t.l - 1};
    std::array<int, 4> p = {0, 1, 2, 3};
    do {
      int s = perm_sign({p[0], p[1], p[2], p[3]});
      psi_[((idx[p[0]] * 7 + idx[p[1]]) * 7 + idx[p[2]]) * 7 + idx[p[3]]] = s * t.sign;
    } while (std::next_permutation(p.begin(), p.end()));
  }
}

double G2Structure::phi(const Vec7& x, const Vec7& y, const Vec7& z) const {
  double acc = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      for (int c = 0; c < 7; ++c) acc += phi(a, b, c) * x[a] * y[b] * z[c];
  return acc;
}

double G2Structure::star_phi(const Vec7& x, const Vec7& y, const Vec7& z, const Vec7& w) const {
  double acc = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      for (int c = 0; c < 7; ++c)
        for (int d = 0; d < 7; ++d) acc += star_phi(a, b, c, d) * x[a] * y[b] * z[c] * w[d];
  return acc;
}

Vec7 G2Structure::cross(const Vec7& x, const Vec7& y) const {
  Vec7 out = Vec7::Zero();
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      for (int c = 0; c < 7; ++c) out[c] += phi(a, b, c) * x[a] * y[b];
  return out;
}

const G2Structure& model() {
  static const G2Structure s;
  return s;
}

std::array<double, 2401> hodge_star3(const std::array<double, 343>& form) {
  std::array<double, 2401> out{};
  for (int a = 0; a < 7; ++a)
    for (int b = a + 1; b < 7; ++b)
      for (int c = b + 1; c < 7; ++c) {
        double v = form[(a * 7 + b) * 7 + c];
        if (v == 0) continue;
        for (int d0 = 0; d0 < 7; ++d0)
          for (int d1 = 0; d1 < 7; ++d1)
            for (int d2 = 0; d2 < 7; ++d2)
              for (int d3 = 0; d3 < 7; ++d3) {
                int s = perm_sign({a, b, c, d0, d1, d2, d3});
                if (s) out[((d0 * 7 + d1) * 7 + d2) * 7 + d3] += s * v;
              }
      }
  return out;
}

Frame7 coassoc_frame(const Eigen::Matrix<double, 7, 4>& L, const Vec7& e5_in, const Vec7& e1_in) {
  const G2Structure& g = model();
  Eigen::HouseholderQR<Eigen::Matrix<double, 7, 4>> qr(L);
  Eigen::Matrix<double, 7, 4> Q = qr.householderQ() * Eigen::Matrix<double, 7, 4>::Identity();
  double worst = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k) worst = std::max(worst, std::abs(g.phi(Q.col(i), Q.col(j), Q.col(k))));
  if (worst > 1e-10)
    throw Error(ErrorCode::NotCoassociative, "phi restricted to the plane has component " + std::to_string(worst));
  Vec7 e5 = e5_in.normalized(), e1 = e1_in.normalized();
  if ((Q.transpose() * e5).norm() > 1e-10) throw Error(ErrorCode::InvalidArgument, "e5 is not normal to the plane");
  if ((e1 - Q * (Q.transpose() * e1)).norm() > 1e-10)
    throw Error(ErrorCode::InvalidArgument, "e1 is not tangent to the plane");
  Vec7 e2 = g.cross(e5, e1);
  Vec7 e3;
  double best = -1;
  for (int i = 0; i < 4; ++i) {
    Vec7 c = Q.col(i);
    c -= c.dot(e1) * e1 + c.dot(e2) * e2;
    if (c.norm() > best) {
      best = c.norm();
      e3 = c / best;
    }
  }
  Frame7 f;
  f.col(0) = e1;
  f.col(1) = e2;
  f.col(2) = e3;
  f.col(3) = g.cross(e3, e5);
  f.col(4) = e5;
  f.col(5) = g.cross(e1, e3);
  f.col(6) = g.cross(e3, e2);
  return f;
}

double model_form_residual(const Frame7& f) {
  const G2Structure& g = model();
  double worst = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      for (int c = 0; c < 7; ++c)
        worst = std::max(worst, std::abs(g.phi(f.col(a), f.col(b), f.col(c)) - g.phi(a, b, c)));
  return worst;
}

Curvature7 Curvature7::in_frame(const Frame7& f) const {
  // Contract one slot at a time.
  Curvature7 cur = *this;
  for (int slot = 0; slot < 4; ++slot) {
    Curvature7 next;
    for (int i0 = 0; i0 < 7; ++i0)
      for (int i1 = 0; i1 < 7; ++i1)
        for (int i2 = 0; i2 < 7; ++i2)
          for (int i3 = 0; i3 < 7; ++i3) {
            int idx[4] = {i0, i1, i2, i3};
            double acc = 0;
            for (int a = 0; a < 7; ++a) {
              int src[4] = {i0, i1, i2, i3};
              src[slot] = a;
              acc += f(a, idx[slot]) * cur(src[0], src[1], src[2], src[3]);
            }
            next(i0, i1, i2, i3) = acc;
          }
    cur = next;
  }
  return cur;
}

SecondForm SecondForm::in_frame(const Frame7& f) const {
  SecondForm out;
  for (int al = 0; al < 3; ++al)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double acc = 0;
        for (int be = 0; be < 3; ++be)
          for (int k = 0; k < 4; ++k)
            for (int l = 0; l < 4; ++l) acc += h[be][k][l] * f(k, i) * f(l, j) * f(4 + be, 4 + al);
        out.h[al][i][j] = acc;
      }
  return out;
}

double IdentityResidual::max() const { return *std::max_element(identity.begin(), identity.end()); }

namespace {

struct Pair {
  int x, y;
  double sign;
};

// Second form relations, 1-based (normal, tangent, sign) for h_{a t i}.
constexpr Pair kCoa[4][3] = {{{5, 2, 1}, {6, 3, 1}, {7, 4, 1}},
                             {{5, 1, 1}, {6, 4, -1}, {7, 3, 1}},
                             {{5, 4, 1}, {6, 1, 1}, {7, 2, -1}},
                             {{5, 3, -1}, {6, 2, 1}, {7, 1, 1}}};

int pair_index(int a, int b) {
  // a < b, index in 0..20
  int idx = 0;
  for (int i = 0; i < a; ++i) idx += 6 - i;
  return idx + (b - a - 1);
}

// Coefficient of unknown for R(a,b,c,d): unknowns x_{PQ}, P <= Q pair indices.
struct Slot {
  int index = -1;
  double sign = 0;
};

Slot curvature_slot(int a, int b, int c, int d) {
  if (a == b || c == d) return {};
  double s = 1;
  if (a > b) std::swap(a, b), s = -s;
  if (c > d) std::swap(c, d), s = -s;
  int P = pair_index(a, b), Q = pair_index(c, d);
  if (P > Q) std::swap(P, Q);
  // Index of (P, Q) with P <= Q among 21 pairs.
  int idx = 0;
  for (int i = 0; i < P; ++i) idx += 21 - i;
  return {idx + (Q - P), s};
}

struct Kernel {
  Eigen::MatrixXd basis;  // orthonormal columns
};

Kernel nullspace(const Eigen::MatrixXd& C) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = 1e-10 * std::max(1.0, sv.size() ? sv[0] : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > cut) ++rank;
  Kernel k;
  k.basis = svd.matrixV().rightCols(C.cols() - rank);
  return k;
}

const Kernel& curvature_kernel() {
  static const Kernel k = [] {
    std::vector<Eigen::VectorXd> rows;
    auto add = [](Eigen::VectorXd& row, int a, int b, int c, int d, double coef) {
      Slot s = curvature_slot(a, b, c, d);
      if (s.index >= 0) row[s.index] += coef * s.sign;
    };
    for (int a = 0; a < 7; ++a)
      for (int b = a + 1; b < 7; ++b)
        for (int c = b + 1; c < 7; ++c)
          for (int d = c + 1; d < 7; ++d) {
            Eigen::VectorXd row = Eigen::VectorXd::Zero(231);
            add(row, a, b, c, d, 1);
            add(row, a, c, d, b, 1);
            add(row, a, d, b, c, 1);
            rows.push_back(row);
          }
    for (int A = 0; A < 7; ++A)
      for (int B = A + 1; B < 7; ++B)
        for (int k = 0; k < 7; ++k) {
          Eigen::VectorXd row = Eigen::VectorXd::Zero(231);
          for (int a = 0; a < 7; ++a)
            for (int b = a + 1; b < 7; ++b)
              if (double c = model().phi(a, b, k)) add(row, a, b, A, B, c);
          rows.push_back(row);
        }
    Eigen::MatrixXd C(rows.size(), 231);
    for (size_t i = 0; i < rows.size(); ++i) C.row(i) = rows[i].transpose();
    return nullspace(C);
  }();
  return k;
}

int form_slot(int al, int i, int j) {
  if (i > j) std::swap(i, j);
  int idx = 0;
  for (int r = 0; r < i; ++r) idx += 4 - r;
  return al * 10 + idx + (j - i);
}

const Kernel& second_form_kernel() {
  static const Kernel k = [] {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(16, 30);
    int r = 0;
    for (const auto& rel : kCoa)
      for (int i = 0; i < 4; ++i, ++r)
        for (const Pair& p : rel) C(r, form_slot(p.x - 5, p.y - 1, i)) += p.sign;
    return nullspace(C);
  }();
  return k;
}

}  // namespace

// Identity k: sum_{a<b} phi(e_a, e_b, e_k) R(a, b, A, B) = 0, i.e. R(e_A, e_B) lies in g2.
IdentityResidual curvature_identity_residual(const Curvature7& R) {
  IdentityResidual out;
  const G2Structure& g = model();
  for (int k = 0; k < 7; ++k)
    for (int A = 0; A < 7; ++A)
      for (int B = 0; B < 7; ++B) {
        double acc = 0;
        for (int a = 0; a < 7; ++a)
          for (int b = a + 1; b < 7; ++b) acc += g.phi(a, b, k) * R(a, b, A, B);
        out.identity[k] = std::max(out.identity[k], std::abs(acc));
      }
  return out;
}

double curvature_symmetry_residual(const Curvature7& R) {
  double worst = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      for (int c = 0; c < 7; ++c)
        for (int d = 0; d < 7; ++d) {
          double r = R(a, b, c, d);
          worst = std::max({worst, std::abs(r + R(b, a, c, d)), std::abs(r + R(a, b, d, c)),
                            std::abs(r - R(c, d, a, b)), std::abs(r + R(a, c, d, b) + R(a, d, b, c))});
        }
  return worst;
}

double ricci_residual(const Curvature7& R) {
  double worst = 0;
  for (int b = 0; b < 7; ++b)
    for (int d = 0; d < 7; ++d) {
      double acc = 0;
      for (int a = 0; a < 7; ++a) acc += R(a, b, a, d);
      worst = std::max(worst, std::abs(acc));
    }
  return worst;
}

double coassociative_h_residual(const SecondForm& h) {
  double worst = 0;
  for (int al = 0; al < 3; ++al)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) worst = std::max(worst, std::abs(h.h[al][i][j] - h.h[al][j][i]));
  for (const auto& rel : kCoa)
    for (int i = 0; i < 4; ++i) {
      double acc = 0;
      for (const Pair& p : rel) acc += p.sign * h.h[p.x - 5][p.y - 1][i];
      worst = std::max(worst, std::abs(acc));
    }
  return worst;
}

double encapsulation_residual(const SecondForm& h) {
  const G2Structure& g = model();
  double worst = 0;
  for (int i = 0; i < 4; ++i) {
    Vec7 acc = Vec7::Zero();
    for (int j = 0; j < 4; ++j) {
      Vec7 II = Vec7::Zero();
      for (int al = 0; al < 3; ++al) II[4 + al] = h.h[al][i][j];
      acc += g.cross(Vec7::Unit(j), II);
    }
    worst = std::max(worst, acc.norm());
  }
  return worst;
}

double mean_curvature(const SecondForm& h) {
  double worst = 0;
  for (int al = 0; al < 3; ++al) {
    double tr = 0;
    for (int i = 0; i < 4; ++i) tr += h.h[al][i][i];
    worst = std::max(worst, std::abs(tr));
  }
  return worst;
}

int curvature_kernel_dimension() { return static_cast<int>(curvature_kernel().basis.cols()); }
int second_form_kernel_dimension() { return static_cast<int>(second_form_kernel().basis.cols()); }

Curvature7 random_curvature(std::mt19937_64& rng) {
  const Kernel& k = curvature_kernel();
  std::normal_distribution<double> nd;
  Eigen::VectorXd c(k.basis.cols());
  for (int i = 0; i < c.size(); ++i) c[i] = nd(rng);
  Eigen::VectorXd x = k.basis * c;
  Curvature7 R;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b)
      for (int cc = 0; cc < 7; ++cc)
        for (int d = 0; d < 7; ++d) {
          Slot s = curvature_slot(a, b, cc, d);
          R(a, b, cc, d) = s.index >= 0 ? s.sign * x[s.index] : 0.0;
        }
  return R;
}

SecondForm random_second_form(std::mt19937_64& rng) {
  const Kernel& k = second_form_kernel();
  std::normal_distribution<double> nd;
  Eigen::VectorXd c(k.basis.cols());
  for (int i = 0; i < c.size(); ++i) c[i] = nd(rng);
  Eigen::VectorXd x = k.basis * c;
  SecondForm h;
  for (int al = 0; al < 3; ++al)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) h.h[al][i][j] = x[form_slot(al, i, j)];
  return h;
}

QComparison q_equals_qtilde(const Curvature7& R, const SecondForm& h, const Vec7& v) {
  double scale = 1;
  for (double x : R.v) scale = std::max(scale, std::abs(x));
  const double tol = 1e-10 * scale;
  if (curvature_symmetry_residual(R) > tol || curvature_identity_residual(R).max() > tol)
    throw Error(ErrorCode::ConstraintViolation, "curvature sample violates the G2 constraints");
  if (coassociative_h_residual(h) > 1e-10)
    throw Error(ErrorCode::ConstraintViolation, "second fundamental form violates the coassociative relations");
  if (v.head<4>().norm() > 1e-12 || std::abs(v.norm() - 1) > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "v must be a unit normal vector");

  Eigen::Matrix<double, 7, 4> L = Eigen::Matrix<double, 7, 7>::Identity().leftCols<4>();
  Frame7 f = coassoc_frame(L, v, Vec7::Unit(0));
  Curvature7 Rf = R.in_frame(f);
  SecondForm hf = h.in_frame(f);

  QComparison out;
  out.q = 0;
  for (int i = 0; i < 4; ++i) out.q -= Rf(i, 4, i, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out.q -= hf.h[0][i][j] * hf.h[0][i][j];

  // Intrinsic curvature of Sigma from the Gauss equation.
  Tensor4 RS;
  RS.n = 4;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          double acc = Rf(i, j, k, l);
          for (int al = 0; al < 3; ++al) acc += hf.h[al][i][k] * hf.h[al][j][l] - hf.h[al][i][l] * hf.h[al][j][k];
          RS(i, j, k, l) = acc;
        }
  CoassociativeMargin cm = coassociative_margin(RS);
  // e5 corresponds to the first anti-self-dual basis form.
  out.qtilde = -2 * cm.block(0, 0) + 0.5 * cm.scalar;
  out.residual = std::abs(out.q - out.qtilde);
  return out;
}

}  // namespace stableflow::g2
