#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stableflow/tubular/reference.hpp"

namespace stableflow {

// A point of the tube in Fermi coordinates (s, y): q = exp_{sigma(s)}(y^a E_a(s)).
struct FermiPoint {
  double s = 0;
  Vec y;
  double psi = 0;   // |y|^2
  Vec q;            // chart coordinates of the point
  Vec foot;         // chart coordinates of sigma(s)
  Mat frame;        // e_1 (horizontal) and e_a (vertical) at q, parallel along the normal geodesic
  Mat jacobian;     // dq / d(s, y); empty unless requested
  int iterations = 0;

  Mat horizontal() const { return frame.leftCols(1); }
  Mat vertical() const { return frame.rightCols(frame.cols() - 1); }
};

class TubularChart {
 public:
  TubularChart(ReferenceCurve ref, double eps, int shoot_steps = 16);

  const ReferenceCurve& reference() const { return ref_; }
  const ChartMetric& metric() const { return ref_.metric(); }
  double eps() const { return eps_; }
  int dim() const { return ref_.dim(); }
  int codim() const { return ref_.codim(); }

  FermiPoint fermi_point(double s, const Vec& y, bool with_jacobian = false) const;
  Vec fermi_map(double s, const Vec& y) const { return fermi_point(s, y).q; }
  // Metric coefficients in Fermi coordinates (s, y).
  Mat fermi_metric(double s, const Vec& y) const;

  // Newton shooting for the normal geodesic from Sigma to q. Throws
  // OutsideTube when it does not converge or lands outside radius eps.
  FermiPoint foot_point(const Vec& q, const FermiPoint* hint = nullptr) const;

 private:
  ReferenceCurve ref_;
  double eps_;
  int steps_;
  std::vector<Vec> nodes_;
};

// Largest radius (halved) on a test grid at which foot points are recovered.
double estimate_tube_radius(const TubularChart& tc, double max_radius, int grid = 16);

// Principal angles between an oriented plane L and the horizontal space,
// with adapted bases of L and of its orthogonal complement.
struct PrincipalAngles {
  std::vector<double> angles;       // phi_j in [0, pi/2]
  std::vector<double> sines;        // sin phi_j computed from the vertical part
  double star_omega = 0;            // Omega(L) = det of the horizontal projection
  double one_minus_star_omega = 0;  // accurate for star_omega near 1
  double fs = 0;                    // max sin phi_j
  Mat horizontal;                   // rotated horizontal basis e_j
  Mat vertical;                     // rotated vertical basis e_a, first n paired with e_j
  Mat tangent;                      // adapted basis of L
  Mat normal;                       // adapted basis of the orthogonal complement of L
};

// g: metric at q; H (n cols) and V (m cols) orthonormal horizontal and
// vertical frames; L: n spanning vectors of the plane (orientation as given).
PrincipalAngles principal_angles(const Mat& g, const Mat& H, const Mat& V, const Mat& L);
PrincipalAngles principal_angles(const TubularChart& tc, const FermiPoint& fp, const Mat& L);

struct ProbeSample {
  FermiPoint point;
  Vec direction;
  double trace_hess = 0;
  double fs = 0;
  double ratio = 0;
};

struct ProbeReport {
  int samples = 0;
  int skipped = 0;
  int violations = 0;
  double min_ratio = 0;
  double radius = 0;
  double inner_radius = 0;
  ProbeSample worst;
};

// Hess psi(X, X) by second central differences of psi along the ambient
// geodesic through q with velocity X (no correction term since nabla_X X = 0).
double hessian_psi(const TubularChart& tc, const FermiPoint& at, const Vec& X, double h = 1e-3);

// Samples (q, L) with q on the annulus inner_fraction*eps <= |y| <= eps
// via a Halton sequence; ratio = tr_L Hess psi / (fs^2 + psi).
ProbeReport hessian_psi_probe(const TubularChart& tc, int samples, std::uint64_t seed,
                              double inner_fraction = 0.1);

struct ExpansionTerm {
  std::string name;
  std::vector<double> residuals;  // per radius, max over sampled directions
  double slope = 0;               // log-log slope; +inf when every residual is at roundoff
};

struct ExpansionReport {
  std::vector<double> radii;
  std::vector<ExpansionTerm> terms;
  double min_slope() const;
};

// Compares frame connection forms, coordinate-field components and the
// Fermi metric at |x|^2 + |y|^2 = rho^2 against their low-order expansions.
// Throws ExpansionMismatch if any fitted slope is below 1.8.
ExpansionReport expansion_check(const TubularChart& tc, double s_p, std::vector<double> radii = {},
                                bool throw_on_mismatch = true);

}  // namespace stableflow
