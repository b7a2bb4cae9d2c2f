#pragma once

#include <Eigen/SparseCholesky>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stableflow/forms/forms.hpp"
#include "stableflow/stability/stability.hpp"

namespace stableflow {

// Normal section y(s) sampled at s_k = k L / N, components in the parallel
// normal frame. Across the seam y(s + L) = Hol y(s).
struct NormalSection {
  std::vector<Vec> y;
  int size() const { return static_cast<int>(y.size()); }
  double sup_norm() const;
  Eigen::VectorXd flat() const;
  static NormalSection from_flat(const Eigen::VectorXd& v, int codim);
};

// y^a(s) = amplitude / |modes| * sum_k cos(k w s + a pi / 3), w = 2 pi / L.
struct Perturbation {
  double amplitude = 0.02;
  std::vector<int> modes = {0, 1, 2};
};

NormalSection make_section(const ReferenceCurve& ref, int nodes, const Perturbation& p);

// Chart polygon of a section; `feet` receives the Fermi points (with frames).
DiscreteCurve section_curve(const TubularChart& tc, const NormalSection& sec, std::vector<FermiPoint>* feet = nullptr);

// Fermi metric g_AB(s, y) on the half grid s_j = j h / 2 (h = L / N) and a
// Chebyshev tensor grid in y over [-eps, eps]^m, with y-derivatives. The
// samples come from the shooting map, so the table reproduces the exact
// metric up to interpolation and shooting error.
class FermiMetricTable {
 public:
  FermiMetricTable(const TubularChart& tc, int nodes, int degree = 0, int shoot_steps = 64);

  int nodes() const { return N_; }
  int codim() const { return m_; }
  double spacing() const { return h_; }
  double radius() const { return eps_; }
  const Mat& holonomy() const { return hol_; }
  bool contains(const Vec& y) const;

  // Metric and dg[mu] = d g / d y^mu at half-grid index j in [0, 2N).
  void eval(int j, const Vec& y, Mat& g, std::array<Mat, kMaxChartDim>* dg = nullptr) const;

 private:
  int N_, m_, deg_, ncoef_;
  double h_, eps_;
  Mat hol_;
  std::vector<double> coef_;  // [j][component][coefficient]
};

// Explicit Euler step of the graphical flow; the velocity is
// dy/dt = gt^{-1} (d/dx dL/dp - dL/dy) / L with L = sqrt(g~_11). Fluxes dL/dp
// live on half nodes so the scheme is conservative. Returns false when the
// section leaves the tabulated tube.
std::vector<Vec> graphical_velocity(const FermiMetricTable& table, const NormalSection& sec);
bool step_graphical(const FermiMetricTable& table, NormalSection& sec, double dt);

// Explicit Euler step x <- x + dt H.
DiscreteCurve step_parametric(const DiscreteCurve& c, double dt, const ExtrinsicData* ex = nullptr);

enum class LinearScheme { BackwardEuler, ExplicitEuler, Exponential };
std::string to_string(LinearScheme s);

// Linear flow ds/dt = -J s with the discrete Jacobi operator J.
class LinearFlow {
 public:
  LinearFlow(const JacobiOperator& op, double dt, LinearScheme scheme);
  Eigen::VectorXd step(const Eigen::VectorXd& s) const;
  NormalSection step(const NormalSection& s) const;
  double dt() const { return dt_; }

 private:
  int codim_;
  double dt_;
  LinearScheme scheme_;
  Eigen::SparseMatrix<double> A_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  Eigen::MatrixXd propagator_;
};

struct MonitorRow {
  double t = 0;
  double psi_max = 0;
  double min_star_omega = 1;
  double max_one_minus_star_omega = 0;
  double sup_ii_diff = 0;  // sup |II^t - II^Sigma|
  double l2_ii_diff = 0;   // integral of |II^t - II^Sigma|^2 over Gamma_t
  double volume = 0;
  double sup_H = 0;
  // max over nodes of (1 - *Omega) + c psi for c = 1, 2, 5, 10
  double combined[4] = {0, 0, 0, 0};
};

// feet: Fermi points of the nodes if already known; Newton otherwise,
// warm-started from `hints` when given.
MonitorRow monitors(const TubularChart& tc, const DiscreteCurve& c, const std::vector<FermiPoint>* feet = nullptr,
                    std::vector<FermiPoint>* hints = nullptr);

enum class Representation { Parametric, Graphical, Linearized };
std::string to_string(Representation r);
Representation parse_representation(const std::string& s);

enum class Termination { Converged, Horizon, Blowup, LeftTube };
std::string to_string(Termination t);

struct FlowConfig {
  Representation representation = Representation::Graphical;
  int nodes = 256;
  double dt = 0;  // 0 selects cfl * h^2
  double cfl = 0.2;
  double t_final = 25;
  Perturbation perturbation;
  double cadence = 0.05;  // monitor spacing in time
  double kappa = 0.05;    // smallness gate on max(1 - *Omega + psi)
  int reparam_every = 20;
  double reparam_ratio = 1.2;
  bool stop_on_convergence = true;
  double blowup = 1e3;
  double psi_tol = 1e-10;
  double ii_tol = 1e-6;
  LinearScheme scheme = LinearScheme::BackwardEuler;
  bool full_monitors = true;  // false: psi only (cheap, graphical/linear)
};

struct FlowTrace {
  std::vector<MonitorRow> rows;
  Termination reason = Termination::Horizon;
  double converged_at = -1;
  double dt = 0;
  long steps = 0;

  std::vector<double> column(const std::string& name) const;
  std::string to_csv() const;
  static FlowTrace from_csv(const std::string& text);
  static const std::vector<std::string>& columns();
};

// Throws InvalidArgument when the initial data fails the smallness gate or
// the time step exceeds the explicit stability bound.
FlowTrace run_flow(const TubularChart& tc, const FlowConfig& cfg);

// d/dt *Omega along the flow against the right-hand side of its evolution
// equation for curves (n = 1), using three consecutive parametric states
// without redistribution in between.
struct OmegaResidual {
  std::vector<double> lhs, rhs;
  double max_residual = 0;
  double max_lhs = 0;
};
OmegaResidual omega_evolution_residual(const TubularChart& tc, const DiscreteCurve& prev, const DiscreteCurve& cur,
                                       const DiscreteCurve& next, double dt);

struct RefinementStudy {
  std::vector<int> nodes;
  std::vector<double> dt;
  std::vector<double> residual;
  std::vector<double> slopes;  // log2 of successive residual ratios
  double min_slope() const;
};
// Runs the parametric flow to time t with dt = cfl h^2 on each grid and
// evaluates the residual there. Throws Inconclusive with fewer than 2 levels.
RefinementStudy omega_refinement(const TubularChart& tc, const Perturbation& p, std::vector<int> nodes, double t,
                                 double cfl = 0.2);

struct DecayFit {
  double rate = 0;  // -d log(field) / dt
  double r2 = 0;
  double t0 = 0, t1 = 0;
  int points = 0;
};
// Least-squares fit of log(field) on [t0, t1]. When a value in the window is
// not positive the window is cut at the first such sample; fewer than three
// usable samples throws NonPositiveWindow.
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& field, double t0, double t1);
DecayFit fit_decay(const FlowTrace& trace, const std::string& field, double t0, double t1);

}  // namespace stableflow
