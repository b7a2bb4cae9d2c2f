#include "stableflow/flow/flow.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace stableflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCombinedWeights[4] = {1, 2, 5, 10};

// 4th-order periodic derivatives in u = k / N.
template <class T>
T du1(const std::vector<T>& f, int k) {
  const int N = static_cast<int>(f.size());
  auto at = [&](int i) -> const T& { return f[((i % N) + N) % N]; };
  return (N / 12.0) * (-at(k + 2) + 8 * at(k + 1) - 8 * at(k - 1) + at(k - 2));
}

template <class T>
T du2(const std::vector<T>& f, int k) {
  const int N = static_cast<int>(f.size());
  auto at = [&](int i) -> const T& { return f[((i % N) + N) % N]; };
  return (double(N) * N / 12.0) * (-at(k + 2) + 16 * at(k + 1) - 30 * at(k) + 16 * at(k - 1) - at(k - 2));
}

}  // namespace

double NormalSection::sup_norm() const {
  double out = 0;
  for (const Vec& v : y) out = std::max(out, v.norm());
  return out;
}

Eigen::VectorXd NormalSection::flat() const {
  if (y.empty()) return {};
  const int m = static_cast<int>(y[0].size());
  Eigen::VectorXd out(size() * m);
  for (int k = 0; k < size(); ++k) out.segment(k * m, m) = y[k];
  return out;
}

NormalSection NormalSection::from_flat(const Eigen::VectorXd& v, int codim) {
  NormalSection s;
  const int N = static_cast<int>(v.size()) / codim;
  s.y.resize(N);
  for (int k = 0; k < N; ++k) s.y[k] = v.segment(k * codim, codim);
  return s;
}

NormalSection make_section(const ReferenceCurve& ref, int nodes, const Perturbation& p) {
  if (p.modes.empty()) throw Error(ErrorCode::InvalidArgument, "perturbation needs at least one mode");
  const int m = ref.codim();
  const double L = ref.length(), w = 2 * std::numbers::pi / L;
  NormalSection sec;
  sec.y.assign(nodes, Vec::Zero(m));
  for (int k = 0; k < nodes; ++k) {
    double s = k * L / nodes;
    for (int a = 0; a < m; ++a) {
      double acc = 0;
      for (int mode : p.modes) acc += std::cos(mode * w * s + a * std::numbers::pi / 3);
      sec.y[k][a] = p.amplitude * acc / p.modes.size();
    }
  }
  return sec;
}

DiscreteCurve section_curve(const TubularChart& tc, const NormalSection& sec, std::vector<FermiPoint>* feet) {
  const int N = sec.size();
  const double L = tc.reference().length();
  std::vector<Vec> pts(N);
  if (feet) feet->resize(N);
  for (int k = 0; k < N; ++k) {
    FermiPoint fp = tc.fermi_point(k * L / N, sec.y[k]);
    pts[k] = fp.q;
    if (feet) (*feet)[k] = std::move(fp);
  }
  return DiscreteCurve(tc.metric(), std::move(pts), 1);
}

// ---------------------------------------------------------------------------
// Fermi metric table

namespace {

int component_index(int a, int b, int n) {
  if (a > b) std::swap(a, b);
  return a * n - a * (a - 1) / 2 + (b - a);
}

void chebyshev_basis(double t, int D, double* T, double* dT) {
  // T_n and T_n' = n U_{n-1}.
  double U_prev = 0, U = 1;  // U_{-1}, U_0
  T[0] = 1;
  dT[0] = 0;
  if (D >= 1) {
    T[1] = t;
    dT[1] = 1;
  }
  for (int n = 2; n <= D; ++n) T[n] = 2 * t * T[n - 1] - T[n - 2];
  for (int n = 1; n <= D; ++n) {
    dT[n] = n * U;
    double next = 2 * t * U - U_prev;
    U_prev = U;
    U = next;
  }
}

}  // namespace

FermiMetricTable::FermiMetricTable(const TubularChart& tc, int nodes, int degree, int shoot_steps)
    : N_(nodes), m_(tc.codim()), h_(tc.reference().length() / nodes), eps_(tc.eps()),
      hol_(tc.reference().holonomy()) {
  if (nodes < 8) throw Error(ErrorCode::Discretization, "metric table needs at least 8 nodes");
  deg_ = degree > 0 ? degree : (m_ == 1 ? 20 : m_ == 2 ? 14 : 10);
  const int D1 = deg_ + 1;
  ncoef_ = 1;
  for (int a = 0; a < m_; ++a) ncoef_ *= D1;
  const int n = m_ + 1, ncomp = n * (n + 1) / 2;
  TubularChart fine(tc.reference(), tc.eps(), shoot_steps);
  coef_.assign(static_cast<size_t>(2 * N_) * ncomp * ncoef_, 0.0);

  std::vector<double> theta(D1);
  for (int i = 0; i < D1; ++i) theta[i] = std::numbers::pi * (i + 0.5) / D1;
  std::vector<double> samples(static_cast<size_t>(ncomp) * ncoef_), work(ncoef_);
  for (int j = 0; j < 2 * N_; ++j) {
    const double s = j * h_ / 2;
    for (int idx = 0; idx < ncoef_; ++idx) {
      Vec y(m_);
      for (int a = 0, r = idx; a < m_; ++a, r /= D1) y[a] = eps_ * std::cos(theta[r % D1]);
      Mat g = fine.fermi_metric(s, y);
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) samples[static_cast<size_t>(component_index(a, b, n)) * ncoef_ + idx] = g(a, b);
    }
    // Separable discrete cosine transform along each axis.
    for (int c = 0; c < ncomp; ++c) {
      double* f = &samples[static_cast<size_t>(c) * ncoef_];
      int stride = 1;
      for (int axis = 0; axis < m_; ++axis, stride *= D1) {
        std::copy(f, f + ncoef_, work.begin());
        for (int idx = 0; idx < ncoef_; ++idx) {
          const int digit = (idx / stride) % D1;
          const int base = idx - digit * stride;
          double acc = 0;
          for (int i = 0; i < D1; ++i) acc += work[base + i * stride] * std::cos(digit * theta[i]);
          f[idx] = acc * (digit == 0 ? 1.0 : 2.0) / D1;
        }
      }
      std::copy(f, f + ncoef_, coef_.begin() + (static_cast<size_t>(j) * ncomp + c) * ncoef_);
    }
  }
}

bool FermiMetricTable::contains(const Vec& y) const {
  for (int a = 0; a < m_; ++a)
    if (!(std::abs(y[a]) <= eps_)) return false;
  return true;
}

void FermiMetricTable::eval(int j, const Vec& y, Mat& g, std::array<Mat, kMaxChartDim>* dg) const {
  const int n = m_ + 1, ncomp = n * (n + 1) / 2, D1 = deg_ + 1;
  double T[kMaxChartDim][64], dT[kMaxChartDim][64];
  for (int a = 0; a < m_; ++a) chebyshev_basis(y[a] / eps_, deg_, T[a], dT[a]);
  // Tensor-product weights and their y-derivatives.
  thread_local std::vector<double> w, dw;
  w.resize(ncoef_);
  dw.resize(static_cast<size_t>(m_) * ncoef_);
  for (int idx = 0; idx < ncoef_; ++idx) {
    int digits[kMaxChartDim];
    for (int a = 0, r = idx; a < m_; ++a, r /= D1) digits[a] = r % D1;
    double prod = 1;
    for (int a = 0; a < m_; ++a) prod *= T[a][digits[a]];
    w[idx] = prod;
    if (dg)
      for (int a = 0; a < m_; ++a) {
        double p = dT[a][digits[a]] / eps_;
        for (int b = 0; b < m_; ++b)
          if (b != a) p *= T[b][digits[b]];
        dw[static_cast<size_t>(a) * ncoef_ + idx] = p;
      }
  }
  g.resize(n, n);
  if (dg)
    for (int a = 0; a < m_; ++a) (*dg)[a].resize(n, n);
  const double* base = &coef_[static_cast<size_t>(j) * ncomp * ncoef_];
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      const double* c = base + static_cast<size_t>(component_index(a, b, n)) * ncoef_;
      double v = 0;
      for (int idx = 0; idx < ncoef_; ++idx) v += c[idx] * w[idx];
      g(a, b) = g(b, a) = v;
      if (dg)
        for (int mu = 0; mu < m_; ++mu) {
          const double* d = &dw[static_cast<size_t>(mu) * ncoef_];
          double dv = 0;
          for (int idx = 0; idx < ncoef_; ++idx) dv += c[idx] * d[idx];
          (*dg)[mu](a, b) = (*dg)[mu](b, a) = dv;
        }
    }
}

// ---------------------------------------------------------------------------
// Steppers

std::vector<Vec> graphical_velocity(const FermiMetricTable& table, const NormalSection& sec) {
  const int N = sec.size(), m = table.codim();
  if (N != table.nodes()) throw Error(ErrorCode::GridMismatch, "section and metric table sizes differ");
  const double h = table.spacing();
  const Mat& hol = table.holonomy();
  Mat g;
  std::array<Mat, kMaxChartDim> dg;
  auto lagrangian = [&](const Mat& gm, const Vec& p) {
    double l2 = gm(0, 0);
    for (int mu = 0; mu < m; ++mu) l2 += 2 * gm(0, mu + 1) * p[mu];
    for (int mu = 0; mu < m; ++mu)
      for (int nu = 0; nu < m; ++nu) l2 += gm(mu + 1, nu + 1) * p[mu] * p[nu];
    return std::sqrt(l2);
  };
  // dL/dp^nu = (g_{s nu} + g_{nu mu} p^mu) / L
  auto momentum = [&](const Mat& gm, const Vec& p, double L) {
    Vec F(m);
    for (int nu = 0; nu < m; ++nu) {
      double acc = gm(0, nu + 1);
      for (int mu = 0; mu < m; ++mu) acc += gm(nu + 1, mu + 1) * p[mu];
      F[nu] = acc / L;
    }
    return F;
  };
  std::vector<Vec> flux(N + 1);  // flux[k] at k - 1/2
  for (int k = 0; k < N; ++k) {
    const Vec& ya = sec.y[k];
    Vec yb = k + 1 < N ? sec.y[k + 1] : Vec(hol * sec.y[0]);
    Vec p = (yb - ya) / h;
    table.eval(2 * k + 1, 0.5 * (ya + yb), g);
    flux[k + 1] = momentum(g, p, lagrangian(g, p));
  }
  flux[0] = hol.transpose() * flux[N];
  std::vector<Vec> vel(N);
  for (int k = 0; k < N; ++k) {
    Vec prev = k > 0 ? sec.y[k - 1] : Vec(hol.transpose() * sec.y[N - 1]);
    Vec next = k + 1 < N ? sec.y[k + 1] : Vec(hol * sec.y[0]);
    Vec p = (next - prev) / (2 * h);
    table.eval(2 * k, sec.y[k], g, &dg);
    const double L = lagrangian(g, p);
    Vec rhs = (flux[k + 1] - flux[k]) / h;
    for (int nu = 0; nu < m; ++nu) {
      const Mat& d = dg[nu];
      double acc = d(0, 0);
      for (int mu = 0; mu < m; ++mu) acc += 2 * d(0, mu + 1) * p[mu];
      for (int mu = 0; mu < m; ++mu)
        for (int ka = 0; ka < m; ++ka) acc += d(mu + 1, ka + 1) * p[mu] * p[ka];
      rhs[nu] -= acc / (2 * L);
    }
    // Normal metric of the graph: g_{mu nu} - (g_{mu s} + g_{mu a} p^a)(g_{nu s} + g_{nu b} p^b) / L^2.
    Vec c(m);
    for (int mu = 0; mu < m; ++mu) {
      double acc = g(mu + 1, 0);
      for (int a = 0; a < m; ++a) acc += g(mu + 1, a + 1) * p[a];
      c[mu] = acc;
    }
    Mat gt = g.bottomRightCorner(m, m) - c * c.transpose() / (L * L);
    vel[k] = gt.llt().solve(rhs) / L;
  }
  return vel;
}

bool step_graphical(const FermiMetricTable& table, NormalSection& sec, double dt) {
  std::vector<Vec> v = graphical_velocity(table, sec);
  for (int k = 0; k < sec.size(); ++k) {
    sec.y[k] += dt * v[k];
    if (!table.contains(sec.y[k])) return false;
  }
  return true;
}

DiscreteCurve step_parametric(const DiscreteCurve& c, double dt, const ExtrinsicData* ex) {
  ExtrinsicData local;
  if (!ex) {
    local = extrinsic(c);
    ex = &local;
  }
  std::vector<Vec> pts(c.size());
  for (int k = 0; k < c.size(); ++k) pts[k] = c.point(k) + dt * ex->nodes[k].H;
  return DiscreteCurve(c.metric(), std::move(pts), c.orientation());
}

std::string to_string(LinearScheme s) {
  switch (s) {
    case LinearScheme::BackwardEuler:
      return "backward-euler";
    case LinearScheme::ExplicitEuler:
      return "explicit-euler";
    case LinearScheme::Exponential:
      return "exponential";
  }
  return "backward-euler";
}

LinearFlow::LinearFlow(const JacobiOperator& op, double dt, LinearScheme scheme)
    : codim_(op.codim()), dt_(dt), scheme_(scheme), A_(op.matrix()) {
  const int n = op.size();
  if (scheme == LinearScheme::BackwardEuler) {
    Eigen::SparseMatrix<double> I(n, n);
    I.setIdentity();
    Eigen::SparseMatrix<double> B = I + dt * A_;
    solver_.compute(B);
    if (solver_.info() != Eigen::Success) throw Error(ErrorCode::Solver, "backward Euler system is singular");
  } else if (scheme == LinearScheme::Exponential) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.dense());
    Eigen::VectorXd decay = (-dt * es.eigenvalues().array()).exp();
    propagator_ = es.eigenvectors() * decay.asDiagonal() * es.eigenvectors().transpose();
  }
}

Eigen::VectorXd LinearFlow::step(const Eigen::VectorXd& s) const {
  switch (scheme_) {
    case LinearScheme::BackwardEuler: {
      Eigen::VectorXd out = solver_.solve(s);
      if (solver_.info() != Eigen::Success) throw Error(ErrorCode::Solver, "backward Euler solve failed");
      return out;
    }
    case LinearScheme::ExplicitEuler:
      return s - dt_ * (A_ * s);
    case LinearScheme::Exponential:
      return propagator_ * s;
  }
  return s;
}

NormalSection LinearFlow::step(const NormalSection& s) const { return NormalSection::from_flat(step(s.flat()), codim_); }

// ---------------------------------------------------------------------------
// Monitors and the driver

namespace {

MonitorRow monitor_row(const TubularChart& tc, const DiscreteCurve& c, const ExtrinsicData& ex,
                       const std::vector<FermiPoint>& feet) {
  std::vector<ExtendedNode> en = extended_tensors(tc, c, ex, &feet);
  MonitorRow r;
  double combined[4] = {-1e300, -1e300, -1e300, -1e300};
  for (size_t k = 0; k < en.size(); ++k) {
    const ExtendedNode& e = en[k];
    r.psi_max = std::max(r.psi_max, e.foot.psi);
    r.min_star_omega = std::min(r.min_star_omega, e.angles.star_omega);
    r.max_one_minus_star_omega = std::max(r.max_one_minus_star_omega, e.angles.one_minus_star_omega);
    r.sup_ii_diff = std::max(r.sup_ii_diff, std::sqrt(e.ii_diff2));
    r.l2_ii_diff += ex.nodes[k].weight * e.ii_diff2;
    for (int i = 0; i < 4; ++i)
      combined[i] = std::max(combined[i], e.angles.one_minus_star_omega + kCombinedWeights[i] * e.foot.psi);
  }
  for (int i = 0; i < 4; ++i) r.combined[i] = combined[i];
  r.volume = ex.length;
  r.sup_H = ex.sup_H();
  return r;
}

}  // namespace

MonitorRow monitors(const TubularChart& tc, const DiscreteCurve& c, const std::vector<FermiPoint>* feet,
                    std::vector<FermiPoint>* hints) {
  ExtrinsicData ex = extrinsic(c);
  if (feet) return monitor_row(tc, c, ex, *feet);
  std::vector<FermiPoint> local(c.size());
  const bool warm = hints && static_cast<int>(hints->size()) == c.size();
  for (int k = 0; k < c.size(); ++k) {
    const FermiPoint* hint = warm ? &(*hints)[k] : (k > 0 ? &local[k - 1] : nullptr);
    local[k] = tc.foot_point(c.point(k), hint);
  }
  MonitorRow r = monitor_row(tc, c, ex, local);
  if (hints) *hints = std::move(local);
  return r;
}

std::string to_string(Representation r) {
  switch (r) {
    case Representation::Parametric:
      return "parametric";
    case Representation::Graphical:
      return "graphical";
    case Representation::Linearized:
      return "linearized";
  }
  return "graphical";
}

Representation parse_representation(const std::string& s) {
  if (s == "parametric") return Representation::Parametric;
  if (s == "graphical") return Representation::Graphical;
  if (s == "linearized") return Representation::Linearized;
  throw Error(ErrorCode::InvalidArgument, "unknown representation '" + s + "'");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged:
      return "converged";
    case Termination::Horizon:
      return "horizon";
    case Termination::Blowup:
      return "blowup";
    case Termination::LeftTube:
      return "left-tube";
  }
  return "horizon";
}

const std::vector<std::string>& FlowTrace::columns() {
  static const std::vector<std::string> cols = {
      "t",          "psi_max", "min_star_omega", "max_one_minus_star_omega", "sup_ii_diff", "l2_ii_diff", "volume",
      "sup_H",      "combined_1", "combined_2", "combined_5", "combined_10"};
  return cols;
}

namespace {

double* row_field(MonitorRow& r, size_t i) {
  double* fields[] = {&r.t,           &r.psi_max,     &r.min_star_omega, &r.max_one_minus_star_omega,
                      &r.sup_ii_diff, &r.l2_ii_diff,  &r.volume,         &r.sup_H,
                      &r.combined[0], &r.combined[1], &r.combined[2],    &r.combined[3]};
  return fields[i];
}

}  // namespace

std::vector<double> FlowTrace::column(const std::string& name) const {
  const auto& cols = columns();
  auto it = std::find(cols.begin(), cols.end(), name);
  if (it == cols.end()) throw Error(ErrorCode::InvalidArgument, "unknown trace column '" + name + "'");
  const size_t i = it - cols.begin();
  std::vector<double> out;
  out.reserve(rows.size());
  for (MonitorRow r : rows) out.push_back(*row_field(r, i));
  return out;
}

std::string FlowTrace::to_csv() const {
  std::string out;
  const auto& cols = columns();
  for (size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  char buf[40];
  for (MonitorRow r : rows) {
    for (size_t i = 0; i < cols.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", *row_field(r, i));
      if (i) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

FlowTrace FlowTrace::from_csv(const std::string& text) {
  FlowTrace tr;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ConfigParse, "empty trace");
  const size_t ncol = columns().size();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    MonitorRow r;
    size_t pos = 0;
    for (size_t i = 0; i < ncol; ++i) {
      size_t end = line.find(',', pos);
      std::string cell = line.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
      char* stop = nullptr;
      *row_field(r, i) = std::strtod(cell.c_str(), &stop);
      if (cell.empty() || *stop != '\0')
        throw Error(ErrorCode::ConfigParse, "bad number on line " + std::to_string(lineno));
      if (end == std::string::npos && i + 1 < ncol)
        throw Error(ErrorCode::ConfigParse, "too few columns on line " + std::to_string(lineno));
      pos = end + 1;
    }
    tr.rows.push_back(r);
  }
  return tr;
}

FlowTrace run_flow(const TubularChart& tc, const FlowConfig& cfg) {
  const ReferenceCurve& ref = tc.reference();
  const int N = cfg.nodes;
  const double h = ref.length() / N;
  FlowTrace trace;

  NormalSection sec = make_section(ref, N, cfg.perturbation);
  std::vector<FermiPoint> feet;
  DiscreteCurve curve = section_curve(tc, sec, &feet);

  MonitorRow first = monitors(tc, curve, &feet);
  if (!(first.combined[0] < cfg.kappa))
    throw Error(ErrorCode::InvalidArgument, "initial data fails the smallness gate: max(1 - *Omega + psi) = " +
                                                std::to_string(first.combined[0]) + " >= " +
                                                std::to_string(cfg.kappa));

  const bool explicit_scheme = cfg.representation != Representation::Linearized ||
                               cfg.scheme == LinearScheme::ExplicitEuler;
  double hmin = h;
  if (cfg.representation == Representation::Parametric) {
    auto seg = curve.segment_lengths();
    hmin = *std::min_element(seg.begin(), seg.end());
  }
  const double bound = cfg.cfl * hmin * hmin;
  const double dt = cfg.dt > 0 ? cfg.dt : bound;
  if (explicit_scheme && dt > bound * (1 + 1e-12))
    throw Error(ErrorCode::InvalidArgument,
                "time step " + std::to_string(dt) + " exceeds the explicit bound " + std::to_string(bound));
  trace.dt = dt;

  std::optional<FermiMetricTable> table;
  std::optional<JacobiOperator> jac;
  std::optional<LinearFlow> lin;
  if (cfg.representation == Representation::Graphical) table.emplace(tc, N);
  if (cfg.representation == Representation::Linearized) {
    jac.emplace(ref, N);
    lin.emplace(*jac, dt, cfg.scheme);
  }

  auto psi_only = [&](double t) {
    MonitorRow r;
    r.t = t;
    for (const Vec& y : sec.y) r.psi_max = std::max(r.psi_max, y.squaredNorm());
    r.min_star_omega = r.max_one_minus_star_omega = r.sup_ii_diff = r.l2_ii_diff = r.volume = r.sup_H = kNaN;
    for (double& c : r.combined) c = kNaN;
    return r;
  };

  first.t = 0;
  if (!cfg.full_monitors && cfg.representation != Representation::Parametric) first = psi_only(0);
  trace.rows.push_back(first);

  std::vector<FermiPoint> hints = feet;
  auto converged = [&](const MonitorRow& r) {
    return r.psi_max < cfg.psi_tol && (std::isnan(r.sup_ii_diff) || r.sup_ii_diff < cfg.ii_tol);
  };

  const long total = static_cast<long>(std::ceil(cfg.t_final / dt - 1e-9));
  const long every = std::max(1L, std::lround(cfg.cadence / dt));
  bool stopped = false;
  for (long n = 1; n <= total && !stopped; ++n) {
    const double t = n * dt;
    try {
      switch (cfg.representation) {
        case Representation::Parametric: {
          ExtrinsicData ex = extrinsic(curve);
          if (!(ex.sup_H() < cfg.blowup)) {
            trace.reason = Termination::Blowup;
            stopped = true;
            break;
          }
          curve = step_parametric(curve, dt, &ex);
          if (cfg.reparam_every > 0 && n % cfg.reparam_every == 0 && curve.spacing_ratio() > cfg.reparam_ratio)
            curve = curve.reparametrized();
          break;
        }
        case Representation::Graphical:
          if (!step_graphical(*table, sec, dt)) {
            trace.reason = Termination::LeftTube;
            stopped = true;
          }
          break;
        case Representation::Linearized:
          sec = lin->step(sec);
          if (!(sec.sup_norm() <= tc.eps())) {
            trace.reason = Termination::LeftTube;
            stopped = true;
          }
          break;
      }
      trace.steps = n;
      if (stopped) break;
      if (n % every != 0 && n != total) continue;
      MonitorRow r;
      if (cfg.representation == Representation::Parametric) {
        r = monitors(tc, curve, nullptr, &hints);
      } else if (cfg.full_monitors) {
        DiscreteCurve c = section_curve(tc, sec, &feet);
        r = monitors(tc, c, &feet);
      } else {
        r = psi_only(t);
      }
      r.t = t;
      trace.rows.push_back(r);
      if (!std::isnan(r.sup_H) && !(r.sup_H < cfg.blowup)) {
        trace.reason = Termination::Blowup;
        break;
      }
      if (!std::isfinite(r.psi_max)) {
        trace.reason = Termination::Blowup;
        break;
      }
      if (converged(r)) {
        if (trace.converged_at < 0) trace.converged_at = t;
        if (cfg.stop_on_convergence) {
          trace.reason = Termination::Converged;
          break;
        }
      } else {
        trace.converged_at = -1;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::OutsideTube || e.code() == ErrorCode::GraphicalRegime ||
          e.code() == ErrorCode::ChartExit) {
        trace.reason = Termination::LeftTube;
        break;
      }
      if (e.code() == ErrorCode::DegenerateMetric || e.code() == ErrorCode::ReparametrizeFirst) {
        trace.reason = Termination::Blowup;
        break;
      }
      throw;
    }
  }
  if (trace.reason == Termination::Horizon && trace.converged_at >= 0) trace.reason = Termination::Converged;
  return trace;
}

// ---------------------------------------------------------------------------
// Evolution of *Omega

namespace {

std::vector<FermiPoint> feet_of(const TubularChart& tc, const DiscreteCurve& c) {
  std::vector<FermiPoint> feet(c.size());
  for (int k = 0; k < c.size(); ++k) feet[k] = tc.foot_point(c.point(k), k > 0 ? &feet[k - 1] : nullptr);
  return feet;
}

std::vector<double> star_omega(const TubularChart& tc, const DiscreteCurve& c, const ExtrinsicData& ex,
                               const std::vector<FermiPoint>& feet) {
  std::vector<double> out(c.size());
  for (int k = 0; k < c.size(); ++k)
    out[k] = inner(tc.metric().g(feet[k].q), ex.nodes[k].tangent, Vec(feet[k].frame.col(0)));
  return out;
}

}  // namespace

OmegaResidual omega_evolution_residual(const TubularChart& tc, const DiscreteCurve& prev, const DiscreteCurve& cur,
                                       const DiscreteCurve& next, double dt) {
  const int N = cur.size();
  if (prev.size() != N || next.size() != N)
    throw Error(ErrorCode::GridMismatch, "flow states have different node counts");
  const ChartMetric& M = tc.metric();
  ExtrinsicData ex = extrinsic(cur), exp_ = extrinsic(prev), exn = extrinsic(next);
  std::vector<FermiPoint> feet = feet_of(tc, cur);
  std::vector<double> fp = star_omega(tc, prev, exp_, feet_of(tc, prev));
  std::vector<double> fn = star_omega(tc, next, exn, feet_of(tc, next));
  std::vector<double> f = star_omega(tc, cur, ex, feet);

  std::vector<Vec> X(N), Z(N);
  std::vector<double> sigma(N);
  for (int k = 0; k < N; ++k) {
    X[k] = feet[k].frame.col(0);
    sigma[k] = ex.nodes[k].speed;
  }
  // Z = nabla_{e1} X along the curve.
  for (int k = 0; k < N; ++k) {
    Vec xu = cur.d1(k);
    Z[k] = (du1(X, k) + christoffel(M, cur.point(k)).contract(xu, X[k])) / sigma[k];
  }
  OmegaResidual out;
  out.lhs.resize(N);
  out.rhs.resize(N);
  for (int k = 0; k < N; ++k) {
    const Vec& q = cur.point(k);
    Mat g = M.g(q);
    Christoffel G = christoffel(M, q);
    Vec xu = cur.d1(k);
    const Vec& e1 = ex.nodes[k].tangent;
    const Vec& H = ex.nodes[k].H;
    Vec dZ = (du1(Z, k) + G.contract(xu, Z[k])) / sigma[k];
    // nabla_H X by central differences through the Fermi chart.
    Vec dXH = Vec::Zero(q.size());
    const double Hn = std::sqrt(inner(g, H, H));
    if (Hn > 0) {
      FermiPoint fpj = tc.fermi_point(feet[k].s, feet[k].y, true);
      Vec d = fpj.jacobian.partialPivLu().solve(Vec(H / Hn));
      const double delta = 1e-5;
      Vec Xp = tc.fermi_point(feet[k].s + delta * d[0], feet[k].y + delta * d.tail(d.size() - 1)).frame.col(0);
      Vec Xm = tc.fermi_point(feet[k].s - delta * d[0], feet[k].y - delta * d.tail(d.size() - 1)).frame.col(0);
      dXH = Hn * ((Xp - Xm) / (2 * delta) + G.contract(Vec(H / Hn), X[k]));
    }
    const double su = du1(sigma, k);
    const double lap = (du2(f, k) - du1(f, k) * su / sigma[k]) / (sigma[k] * sigma[k]);
    const double rhs = lap + f[k] * inner(g, H, H) - 2 * inner(g, Z[k], H) - inner(g, e1, Vec(dZ - dXH));
    out.rhs[k] = rhs;
    out.lhs[k] = (fn[k] - fp[k]) / (2 * dt);
    out.max_residual = std::max(out.max_residual, std::abs(out.lhs[k] - rhs));
    out.max_lhs = std::max(out.max_lhs, std::abs(out.lhs[k]));
  }
  return out;
}

double RefinementStudy::min_slope() const {
  double s = std::numeric_limits<double>::infinity();
  for (double v : slopes) s = std::min(s, v);
  return s;
}

RefinementStudy omega_refinement(const TubularChart& tc, const Perturbation& p, std::vector<int> nodes, double t,
                                 double cfl) {
  if (nodes.size() < 2) throw Error(ErrorCode::Inconclusive, "refinement needs at least two levels");
  RefinementStudy st;
  for (int N : nodes) {
    NormalSection sec = make_section(tc.reference(), N, p);
    DiscreteCurve c = section_curve(tc, sec);
    auto seg = c.segment_lengths();
    const double hmin = *std::min_element(seg.begin(), seg.end());
    const double dt = cfl * hmin * hmin;
    const long steps = std::max(1L, std::lround(t / dt));
    for (long n = 0; n + 1 < steps; ++n) c = step_parametric(c, dt);
    DiscreteCurve cur = step_parametric(c, dt);
    DiscreteCurve next = step_parametric(cur, dt);
    OmegaResidual r = omega_evolution_residual(tc, c, cur, next, dt);
    st.nodes.push_back(N);
    st.dt.push_back(dt);
    st.residual.push_back(r.max_residual);
  }
  for (size_t i = 0; i + 1 < st.residual.size(); ++i)
    st.slopes.push_back(std::log2(st.residual[i] / st.residual[i + 1]));
  return st;
}

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& field, double t0, double t1) {
  DecayFit fit;
  std::vector<double> ts, ls;
  for (size_t i = 0; i < t.size() && i < field.size(); ++i) {
    if (t[i] < t0 || t[i] > t1) continue;
    if (!(field[i] > 0) || !std::isfinite(field[i])) break;  // shrink the window
    ts.push_back(t[i]);
    ls.push_back(std::log(field[i]));
  }
  if (ts.size() < 3)
    throw Error(ErrorCode::NonPositiveWindow, "fewer than three positive samples in the fit window");
  const double n = static_cast<double>(ts.size());
  double mt = 0, ml = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i] / n;
    ml += ls[i] / n;
  }
  double stt = 0, stl = 0, sll = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    stl += (ts[i] - mt) * (ls[i] - ml);
    sll += (ls[i] - ml) * (ls[i] - ml);
  }
  const double slope = stl / stt;
  fit.rate = -slope;
  fit.r2 = sll > 0 ? (stl * stl) / (stt * sll) : 1.0;
  fit.t0 = ts.front();
  fit.t1 = ts.back();
  fit.points = static_cast<int>(ts.size());
  return fit;
}

DecayFit fit_decay(const FlowTrace& trace, const std::string& field, double t0, double t1) {
  return fit_decay(trace.column("t"), trace.column(field), t0, t1);
}

}  // namespace stableflow
