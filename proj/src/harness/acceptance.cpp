#include "stableflow/harness/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <mutex>
#include <random>

#include "stableflow/geometry/curvature.hpp"
#include "stableflow/harness/report.hpp"
#include "stableflow/harness/scenario.hpp"

namespace stableflow {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Check descriptions joined with "; "; one failed check fails the criterion.
struct Detail {
  std::string text;
  bool pass = true;
  void check(bool ok, const std::string& what) {
    if (!text.empty()) text += "; ";
    text += what;
    if (!ok) {
      text += " [x]";
      pass = false;
    }
  }
};

double slope(double coarse, double fine) { return std::log2(coarse / fine); }

// Long waist run shared by criteria 4, 5 and 10.
struct WaistRun {
  FlowTrace trace;
  double seconds = 0;
};

const WaistRun& waist_run() {
  static std::once_flag once;
  static WaistRun run;
  std::call_once(once, [] {
    Scenario sc = builtin_scenario("hyperbolic-waist");
    auto t0 = Clock::now();
    FlowConfig cfg = sc.flow;
    cfg.nodes = 256;
    cfg.t_final = 15;
    cfg.perturbation.amplitude = 0.02;
    cfg.stop_on_convergence = false;
    run.trace = run_flow(sc.tube(), cfg);
    run.seconds = since(t0);
  });
  return run;
}

double max_gap(const FlowTrace& a, const FlowTrace& b, double t_max) {
  double worst = 0;
  size_t n = std::min(a.rows.size(), b.rows.size());
  for (size_t i = 0; i < n && a.rows[i].t <= t_max + 1e-9; ++i) {
    if (std::abs(a.rows[i].t - b.rows[i].t) > 1e-12) throw Error(ErrorCode::GridMismatch, "trace times differ");
    worst = std::max(worst, std::abs(a.rows[i].psi_max - b.rows[i].psi_max));
  }
  return worst;
}

// Largest increase between consecutive samples with t >= t0.
double max_increase(const FlowTrace& tr, const std::vector<double>& v, double t0) {
  double worst = -INFINITY;
  for (size_t i = 1; i < v.size(); ++i)
    if (tr.rows[i - 1].t >= t0) worst = std::max(worst, v[i] - v[i - 1]);
  return worst;
}

Detail curvature_kernel() {
  Detail d;
  auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> r(-1.2, 1.2), th(-3.0, 3.0);
  struct Case {
    const char* id;
    double K;
  };
  double worst_k = 0, worst_res = 0;
  for (Case c : {Case{"flat-plane-circle", 0}, Case{"flat-torus-geodesic", 0}, Case{"sphere-equator", 1},
                 Case{"hyperbolic-waist", -1}}) {
    Scenario sc = builtin_scenario(c.id);
    for (int i = 0; i < 100; ++i) {
      Vec x(2);
      x << r(rng), th(rng);
      CurvaturePoint cp = riemann(sc.metric, x, 1.0);
      Vec u = Vec::Unit(2, 0), v = Vec::Unit(2, 1);
      worst_k = std::max(worst_k, std::abs(sectional(cp, u, v) - c.K));
      worst_res = std::max(worst_res, cp.residuals.max());
    }
  }
  Scenario h3 = builtin_scenario("hyperbolic-3d-waist");
  for (int i = 0; i < 100; ++i) {
    Vec x(3);
    x << th(rng), r(rng), r(rng);
    worst_res = std::max(worst_res, riemann(h3.metric, x, 1.0).residuals.max());
  }
  double secs = since(t0);
  d.check(worst_k < 1e-6, "max |K - K0| " + fmt("%.2e", worst_k));
  d.check(worst_res < 1e-6, "symmetry/Bianchi " + fmt("%.2e", worst_res));
  d.check(secs < 5, "runtime " + fmt("%.2f", secs) + " s");
  return d;
}

Detail strong_stability() {
  Detail d;
  for (const char* id : {"hyperbolic-waist", "sphere-equator", "flat-torus-geodesic", "hyperbolic-3d-waist"}) {
    Scenario sc = builtin_scenario(id);
    StabilityReport rep = analyze_stability(sc.reference(1024), 256, 4);
    const ExpectedValue* c0 = sc.find_expected("c0");
    bool ok = std::abs(rep.c0 - c0->value) <= c0->tolerance;
    std::string what = std::string(id) + " c0 " + fmt("%.6f", rep.c0);
    if (sc.expected_class) {
      ok = ok && rep.classification == *sc.expected_class;
      what += " " + to_string(rep.classification);
    }
    if (sc.metric.dim() == 3) {
      double dev = 0;
      for (const NodeMargin& n : rep.nodes) dev = std::max(dev, (n.W - Mat::Identity(2, 2)).cwiseAbs().maxCoeff());
      ok = ok && dev <= 1e-2;
      what += " |W - I| " + fmt("%.1e", dev);
    }
    d.check(ok, what);
  }
  return d;
}

Detail jacobi_spectrum() {
  Detail d;
  Scenario sc = builtin_scenario("hyperbolic-waist");
  ReferenceCurve ref = sc.reference(1024);
  const double oracle[4] = {1, 2, 2, 5};
  std::vector<double> err;
  Eigen::VectorXd last;
  for (int N : {64, 128, 256}) {
    Eigenpairs ep = lowest_eigenpairs(JacobiOperator(ref, N).matrix(), 4, 1e-10);
    double e = 0;
    for (int k = 0; k < 4; ++k) e = std::max(e, std::abs(ep.values[k] - oracle[k]));
    err.push_back(e);
    last = ep.values;
  }
  std::string vals;
  for (int k = 0; k < 4; ++k) vals += (k ? " " : "") + fmt("%.5f", last[k]);
  d.check(err[2] <= 1e-2, "N=256 {" + vals + "} max err " + fmt("%.1e", err[2]));
  double s = std::min(slope(err[0], err[1]), slope(err[1], err[2]));
  d.check(s >= 1.8, "slope " + fmt("%.3f", s));
  return d;
}

Detail dynamical_stability() {
  Detail d;
  const WaistRun& run = waist_run();
  const FlowTrace& gr = run.trace;
  d.check(gr.converged_at > 0, "converged at t = " + fmt("%.3f", gr.converged_at));
  DecayFit fit = fit_decay(gr, "psi_max", 5, 15);
  d.check(std::abs(fit.rate - 2) <= 0.4, "psi_max rate " + fmt("%.4f", fit.rate) + " (r2 " + fmt("%.6f", fit.r2) + ")");

  Scenario sc = builtin_scenario("hyperbolic-waist");
  TubularChart tc = sc.tube();
  std::vector<double> gaps;
  double param_seconds = 0;
  for (int N : {64, 128, 256}) {
    FlowConfig cfg = sc.flow;
    cfg.nodes = N;
    cfg.t_final = 1;
    cfg.perturbation.amplitude = 0.02;
    cfg.stop_on_convergence = false;
    FlowTrace g;
    if (N == 256) {
      g = gr;
    } else {
      cfg.full_monitors = false;
      g = run_flow(tc, cfg);
    }
    cfg.representation = Representation::Parametric;
    cfg.dt = g.dt;
    cfg.full_monitors = false;
    auto t0 = Clock::now();
    FlowTrace p = run_flow(tc, cfg);
    if (N == 256) param_seconds = since(t0);
    gaps.push_back(max_gap(g, p, 1.0));
  }
  double s = std::min(slope(gaps[0], gaps[1]), slope(gaps[1], gaps[2]));
  d.check(s >= 1.8, "parametric vs graphical gap " + fmt("%.2e", gaps[2]) + " at N=256, slope " + fmt("%.3f", s));
  double total = run.seconds + param_seconds;
  d.check(total < 60, "runtime at N=256 " + fmt("%.1f", total) + " s");
  return d;
}

Detail monotone_monitors() {
  Detail d;
  const FlowTrace& tr = waist_run().trace;
  std::vector<double> vol = tr.column("volume");
  double inc = max_increase(tr, vol, 0);
  d.check(inc <= 0, "volume max increase " + fmt("%.2e", std::max(inc, 0.0)));

  const int cs[4] = {1, 2, 5, 10};
  int found = 0;
  for (int i = 0; i < 4 && !found; ++i) {
    std::vector<double> v;
    for (const auto& r : tr.rows) v.push_back(r.combined[i]);
    if (max_increase(tr, v, 1.0) <= 0) found = cs[i];
  }
  d.check(found > 0, found ? "combined monitor non-increasing after t = 1 with c6 = " + std::to_string(found)
                           : std::string("combined monitor increases for every c6"));

  Scenario eq = builtin_scenario("sphere-equator");
  TubularChart tc = eq.tube();
  for (double amp : {0.02, -0.02}) {
    FlowConfig cfg = eq.flow;
    cfg.nodes = 128;
    cfg.t_final = 5;
    cfg.perturbation.amplitude = amp;
    cfg.full_monitors = false;
    FlowTrace t = run_flow(tc, cfg);
    bool left = t.reason == Termination::LeftTube || t.reason == Termination::Blowup;
    double growth = t.rows.back().psi_max / t.rows.front().psi_max;
    d.check(left || growth >= 10, "equator amp " + fmt("%+.2f", amp) + " " + to_string(t.reason) + " at t = " +
                                      fmt("%.2f", t.rows.back().t) + ", psi growth " + fmt("%.1f", growth));
  }
  return d;
}

Detail hessian_probe() {
  Detail d;
  Scenario sc = builtin_scenario("hyperbolic-waist");
  TubularChart tc(sc.reference(1024), 0.3);
  ProbeReport rep = hessian_psi_probe(tc, 2000, 42);
  d.check(rep.samples == 2000 && rep.violations == 0,
          std::to_string(rep.samples) + " samples, " + std::to_string(rep.violations) + " violations");
  d.check(rep.min_ratio >= 0.5, "min ratio " + fmt("%.4f", rep.min_ratio));
  double worst = 0;
  for (double s : {0.0, 2.0, 4.5})
    for (double r0 : {0.05, 0.1, 0.2, 0.29}) {
      FermiPoint fp = tc.fermi_point(s, Vec::Constant(1, r0));
      worst = std::max(worst, std::abs(hessian_psi(tc, fp, fp.frame.col(0)) - 2 * r0 * std::tanh(r0)));
    }
  d.check(worst < 1e-4, "tangent circles |Hess - 2r tanh r| " + fmt("%.1e", worst));
  return d;
}

Detail omega_residual() {
  Detail d;
  Scenario sc = builtin_scenario("hyperbolic-waist");
  RefinementStudy st = omega_refinement(sc.tube(), Perturbation{}, {32, 64, 128}, 0.1);
  std::string res;
  for (double r : st.residual) res += (res.empty() ? "" : " ") + fmt("%.2e", r);
  d.check(st.min_slope() >= 0.8, "residuals " + res + ", min slope " + fmt("%.3f", st.min_slope()));
  return d;
}

Detail g2_identities() {
  Detail d;
  auto t0 = Clock::now();
  auto rows = g2_suite(1000);
  double secs = since(t0);
  for (const auto& r : rows) d.check(r.pass, r.name + " " + fmt("%.1e", r.worst));
  d.check(secs < 10, "runtime " + fmt("%.2f", secs) + " s");
  return d;
}

Detail linear_exactness() {
  Detail d;
  Scenario sc = builtin_scenario("hyperbolic-waist");
  TubularChart tc = sc.tube();
  const double tol = 1e-10;
  JacobiOperator J(tc.reference(), 64);
  Eigenpairs ep = lowest_eigenpairs(J.matrix(), 4, tol);
  LinearFlow flow(J, 0.01, LinearScheme::Exponential);
  double worst = 0;
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXd v = ep.vectors.col(k), s = v;
    for (int n = 0; n < 100; ++n) s = flow.step(s);
    worst = std::max(worst, (s - std::exp(-ep.values[k]) * v).norm() / std::exp(-ep.values[k]));
  }
  // Eigenvector residual tol * max(|lambda|, 1) grows at most linearly over t = 1.
  d.check(worst <= 10 * tol * std::max(1.0, ep.values[3]), "eigenmode decay rel err " + fmt("%.1e", worst));

  std::vector<double> gaps;
  for (double amp : {0.04, 0.02, 0.01}) {
    FlowConfig cfg = sc.flow;
    cfg.nodes = 64;
    cfg.t_final = 2;
    cfg.perturbation.amplitude = amp;
    cfg.full_monitors = false;
    cfg.stop_on_convergence = false;
    FlowTrace a = run_flow(tc, cfg);
    cfg.representation = Representation::Linearized;
    cfg.scheme = LinearScheme::ExplicitEuler;
    cfg.dt = a.dt;
    FlowTrace b = run_flow(tc, cfg);
    gaps.push_back(max_gap(a, b, 2.0));
  }
  double s = std::min(slope(gaps[0], gaps[1]), slope(gaps[1], gaps[2]));
  d.check(s >= 1.7, "nonlinear gap " + fmt("%.2e", gaps[0]) + " / " + fmt("%.2e", gaps[1]) + " / " +
                        fmt("%.2e", gaps[2]) + ", slope " + fmt("%.3f", s));
  return d;
}

Detail l2_convergence() {
  Detail d;
  const FlowTrace& tr = waist_run().trace;
  std::vector<double> l2 = tr.column("l2_ii_diff");
  d.check(l2.back() < 1e-10, "final L2 " + fmt("%.2e", l2.back()));
  // Earliest time after which the integral never increases.
  size_t from = l2.size() - 1;
  while (from > 0 && l2[from] <= l2[from - 1]) --from;
  double t_mono = tr.rows[from].t;
  d.check(t_mono <= 0.5 * tr.rows.back().t, "non-increasing from t = " + fmt("%.2f", t_mono));
  return d;
}

struct Entry {
  const char* name;
  Detail (*run)();
};

const Entry kEntries[kCriteria] = {
    {"curvature kernel", curvature_kernel},
    {"strong stability margin", strong_stability},
    {"Jacobi spectrum", jacobi_spectrum},
    {"dynamical stability", dynamical_stability},
    {"monotone monitors", monotone_monitors},
    {"Hessian convexity probe", hessian_probe},
    {"omega evolution residual", omega_residual},
    {"G2 identity suite", g2_identities},
    {"linearized flow exactness", linear_exactness},
    {"L2 convergence of II", l2_convergence},
};

}  // namespace

CriterionResult run_criterion(int id) {
  if (id < 1 || id > kCriteria) throw Error(ErrorCode::InvalidArgument, "no criterion " + std::to_string(id));
  CriterionResult r;
  r.id = id;
  r.name = kEntries[id - 1].name;
  auto t0 = Clock::now();
  try {
    Detail d = kEntries[id - 1].run();
    r.pass = d.pass;
    r.detail = d.text;
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = since(t0);
  return r;
}

std::vector<CriterionResult> run_acceptance(std::vector<int> only, int threads,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  if (only.empty())
    for (int i = 1; i <= kCriteria; ++i) only.push_back(i);
  std::vector<CriterionResult> out;
  std::mutex mu;
  auto finish = [&](CriterionResult r) {
    std::lock_guard<std::mutex> lock(mu);
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  if (threads <= 1) {
    for (int id : only) finish(run_criterion(id));
  } else {
    size_t next = 0;
    std::vector<std::future<void>> workers;
    for (int w = 0; w < threads; ++w)
      workers.push_back(std::async(std::launch::async, [&] {
        for (;;) {
          int id;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next == only.size()) return;
            id = only[next++];
          }
          finish(run_criterion(id));
        }
      }));
    for (auto& f : workers) f.get();
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::string format_result(const CriterionResult& r) {
  char head[128];
  std::snprintf(head, sizeof head, "%s [%2d] %s (%.1f s): ", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(),
                r.seconds);
  return head + r.detail;
}

int threads_from_env() {
  const char* v = std::getenv("STABLEFLOW_THREADS");
  if (!v) return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  return (end != v && *end == '\0' && n > 0) ? static_cast<int>(std::min(n, 64L)) : 1;
}

}  // namespace stableflow
