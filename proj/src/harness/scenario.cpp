#include "stableflow/harness/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "stableflow/geometry/models.hpp"

namespace stableflow {

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> v) {
  Vec r(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

Scenario base(std::string id, std::string description, ChartMetric m, Vec origin, Vec direction, double length) {
  Scenario s(std::move(id), std::move(description), std::move(m));
  s.origin = std::move(origin);
  s.direction = std::move(direction);
  s.length = length;
  return s;
}

Scenario flat_plane_circle() {
  Scenario s = base("flat-plane-circle", "unit circle in the Euclidean plane; shrinks under curve shortening",
                    models::flat(2), vec({0, 0}), vec({1, 0}), 2 * kPi);
  s.circle_radius = 1;
  s.flow.representation = Representation::Parametric;
  s.flow.nodes = 128;
  s.flow.t_final = 0.4;
  s.flow.stop_on_convergence = false;
  s.expected.push_back({"sup_H", 1, 1e-6, "curvature of the unit circle"});
  s.expected.push_back({"radius_squared_slope", -2, 1e-3, "rho' = -1/rho for the shrinking circle, so rho^2 = 1 - 2t"});
  return s;
}

Scenario hyperbolic_waist() {
  Scenario s = base("hyperbolic-waist", "waist geodesic r = 0 of dr^2 + cosh^2 r dtheta^2",
                    models::hyperbolic_cylinder(), vec({0, 0}), vec({0, 1}), 2 * kPi);
  s.expected_class = Classification::StronglyStable;
  s.expected.push_back({"c0", 1, 1e-3, "R - A = -K = 1 for a geodesic in a surface of curvature -1"});
  const char* fourier = "Fourier modes of -v'' + v on a circle of length 2 pi: k^2 + 1";
  s.expected.push_back({"lambda_0", 1, 1e-2, fourier});
  s.expected.push_back({"lambda_1", 2, 1e-2, fourier});
  s.expected.push_back({"lambda_2", 2, 1e-2, fourier});
  s.expected.push_back({"lambda_3", 5, 1e-2, fourier});
  s.expected.push_back({"psi_decay_rate", 2, 0.4, "psi ~ |y|^2 decays at twice the lowest Jacobi eigenvalue"});
  return s;
}

Scenario sphere_equator() {
  Scenario s = base("sphere-equator", "equator r = 0 of dr^2 + cos^2 r dtheta^2", models::sphere_equator(),
                    vec({0, 0}), vec({0, 1}), 2 * kPi);
  s.expected_class = Classification::Unstable;
  s.flow.t_final = 5;
  s.expected.push_back({"c0", -1, 1e-3, "R - A = -K = -1 on the unit sphere"});
  s.expected.push_back({"lambda_0", -1, 1e-2, "Fourier modes of -v'' - v: k^2 - 1"});
  return s;
}

Scenario flat_torus_geodesic() {
  Scenario s = base("flat-torus-geodesic", "closed geodesic x = 0 of the square flat torus",
                    models::flat(2, {2 * kPi, 2 * kPi}), vec({0, 0}), vec({0, 1}), 2 * kPi);
  s.expected_class = Classification::StableOnly;
  s.flow.t_final = 5;
  s.flow.stop_on_convergence = false;
  s.expected.push_back({"c0", 0, 1e-6, "flat ambient and a geodesic: R - A = 0"});
  s.expected.push_back({"lambda_0", 0, 1e-6, "translations are Jacobi fields: k^2"});
  return s;
}

Scenario hyperbolic_3d_waist() {
  Scenario s = base("hyperbolic-3d-waist", "x-axis of cosh^2 y1 cosh^2 y2 dx^2 + dy1^2 + dy2^2 (codimension 2)",
                    models::hyperbolic_3d_waist(), vec({0, 0, 0}), vec({1, 0, 0}), 2 * kPi);
  s.expected_class = Classification::StronglyStable;
  s.eps = 0.2;
  s.flow.nodes = 128;
  s.expected.push_back({"c0", 1, 1e-2, "planes (x, y_a) have curvature -1 on the axis, so R - A = identity"});
  return s;
}

using Builder = Scenario (*)();
const std::vector<std::pair<std::string, Builder>>& catalog() {
  static const std::vector<std::pair<std::string, Builder>> c = {
      {"flat-plane-circle", flat_plane_circle},
      {"hyperbolic-waist", hyperbolic_waist},
      {"sphere-equator", sphere_equator},
      {"flat-torus-geodesic", flat_torus_geodesic},
      {"hyperbolic-3d-waist", hyperbolic_3d_waist},
  };
  return c;
}

Vec to_vec(const std::vector<double>& v) {
  Vec r(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) r[static_cast<int>(i)] = v[i];
  return r;
}

ChartMetric metric_from_config(const Config& cfg, const std::string& name) {
  if (cfg.has("metric", "builtin")) {
    cfg.require_known("metric", {"builtin"});
    const ConfigValue& v = cfg.at("metric", "builtin");
    for (const auto& [id, build] : catalog())
      if (id == v.text) return build().metric;
    Config::fail(v, "unknown builtin metric '" + v.text + "'");
  }
  std::vector<std::string> coords;
  for (const ConfigValue& c : split_list(cfg.at("metric", "coordinates"))) {
    if (std::find(coords.begin(), coords.end(), c.text) != coords.end()) Config::fail(c, "repeated coordinate name");
    coords.push_back(c.text);
  }
  const int n = static_cast<int>(coords.size());
  if (n < 2 || n > kMaxChartDim)
    Config::fail(cfg.at("metric", "coordinates"), "need between 2 and " + std::to_string(kMaxChartDim) + " coordinates");

  std::vector<std::string> allowed = {"coordinates", "periods"};
  auto entries = std::make_shared<std::vector<Expr>>(n * n, Expr::parse("0", {}));
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      std::string k1 = "g_" + coords[a] + "_" + coords[b], k2 = "g_" + coords[b] + "_" + coords[a];
      allowed.push_back(k1);
      if (k2 != k1) allowed.push_back(k2);
      bool h1 = cfg.has("metric", k1), h2 = k2 != k1 && cfg.has("metric", k2);
      if (h1 && h2) Config::fail(cfg.at("metric", k2), "entry given twice as " + k1 + " and " + k2);
      if (!h1 && !h2) {
        if (a == b) cfg.at("metric", k1);  // missing diagonal entry
        continue;
      }
      Expr e = cfg.expression("metric", h1 ? k1 : k2, coords);
      (*entries)[a * n + b] = e;
      (*entries)[b * n + a] = e;
    }
  cfg.require_known("metric", allowed);

  std::vector<double> periods(n, 0.0);
  if (cfg.has("metric", "periods")) {
    periods = cfg.numbers("metric", "periods");
    if (static_cast<int>(periods.size()) != n) Config::fail(cfg.at("metric", "periods"), "one period per coordinate");
  }
  return ChartMetric::analytic(
      name, n,
      [entries, n](const auto* x, auto* g) {
        for (int i = 0; i < n * n; ++i) g[i] = (*entries)[i].eval(x);
      },
      periods);
}

}  // namespace

ReferenceCurve Scenario::reference(int frame_nodes) const {
  if (circle_radius <= 0) return ReferenceCurve::coordinate_line(metric, origin, direction, length, frame_nodes);
  const double r = circle_radius;
  const Vec o = origin;
  auto param = [r, o](double s) {
    CurveJet j{o, Vec::Zero(o.size()), Vec::Zero(o.size())};
    const double c = std::cos(s / r), sn = std::sin(s / r);
    j.x[0] += r * c;
    j.x[1] += r * sn;
    j.dx[0] = -sn;
    j.dx[1] = c;
    j.ddx[0] = -c / r;
    j.ddx[1] = -sn / r;
    return j;
  };
  for (double s : {0.0, 1.0, 2.5}) {
    CurveJet j = param(s);
    double speed = std::sqrt(inner(metric.g(j.x), j.dx, j.dx));
    if (std::abs(speed - 1) > 1e-12)
      throw Error(ErrorCode::InvalidArgument, "circle of scenario " + id + " is not unit speed in its metric");
  }
  return ReferenceCurve(metric, param, 2 * kPi * r, frame_nodes);
}

TubularChart Scenario::tube(int frame_nodes) const { return TubularChart(reference(frame_nodes), eps); }

const ExpectedValue* Scenario::find_expected(const std::string& name) const {
  for (const auto& e : expected)
    if (e.name == name) return &e;
  return nullptr;
}

std::vector<std::string> builtin_scenario_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, build] : catalog()) ids.push_back(id);
  return ids;
}

Scenario builtin_scenario(const std::string& id) {
  for (const auto& [name, build] : catalog())
    if (name == id) return build();
  std::string list;
  for (const auto& name : builtin_scenario_ids()) list += (list.empty() ? "" : ", ") + name;
  throw Error(ErrorCode::UnknownScenario, "'" + id + "'; builtin scenarios: " + list);
}

Classification parse_classification(const std::string& s) {
  for (Classification c : {Classification::StronglyStable, Classification::StableOnly, Classification::Unstable,
                           Classification::Inconclusive})
    if (to_string(c) == s) return c;
  throw Error(ErrorCode::InvalidArgument, "unknown classification '" + s + "'");
}

Scenario scenario_from_config(const std::string& text) {
  Config cfg = Config::parse(text);
  for (const std::string& sec : cfg.section_names())
    if (sec != "scenario" && sec != "metric" && sec != "sigma" && sec != "tube" && sec != "flow" && sec != "expected") {
      const auto& keys = cfg.section(sec);
      int line = keys.empty() ? 0 : keys.begin()->second.line;
      throw Error(ErrorCode::ConfigParse,
                  "line " + std::to_string(line) + ", column 1: unknown section [" + sec + "]");
    }
  cfg.require_known("scenario", {"id", "description"});
  cfg.require_known("sigma", {"origin", "direction", "length", "circle_radius"});
  cfg.require_known("tube", {"radius"});
  cfg.require_known("flow", {"representation", "nodes", "dt", "cfl", "t_final", "amplitude", "modes", "cadence",
                             "kappa", "scheme", "stop_on_convergence"});

  const std::string id = cfg.string("scenario", "id", "custom");
  ChartMetric m = metric_from_config(cfg, id);
  Scenario s = base(id, cfg.string("scenario", "description", ""), m, Vec::Zero(m.dim()), Vec::Zero(m.dim()), 0);

  s.origin = to_vec(cfg.numbers("sigma", "origin"));
  if (s.origin.size() != m.dim()) Config::fail(cfg.at("sigma", "origin"), "origin has the wrong dimension");
  if (cfg.has("sigma", "circle_radius")) {
    s.circle_radius = cfg.number("sigma", "circle_radius", 0);
    if (s.circle_radius <= 0) Config::fail(cfg.at("sigma", "circle_radius"), "radius must be positive");
    s.length = 2 * kPi * s.circle_radius;
  } else {
    s.direction = to_vec(cfg.numbers("sigma", "direction"));
    if (s.direction.size() != m.dim()) Config::fail(cfg.at("sigma", "direction"), "direction has the wrong dimension");
    s.length = cfg.number("sigma", "length", 0);
    if (s.length <= 0) Config::fail(cfg.at("sigma", "length"), "length must be positive");
  }
  s.eps = cfg.number("tube", "radius", 0.3);
  if (s.eps <= 0) Config::fail(cfg.at("tube", "radius"), "radius must be positive");

  FlowConfig& f = s.flow;
  if (cfg.has("flow", "representation")) {
    const ConfigValue& v = cfg.at("flow", "representation");
    try {
      f.representation = parse_representation(v.text);
    } catch (const Error&) {
      Config::fail(v, "expected parametric, graphical or linearized");
    }
  }
  if (cfg.has("flow", "scheme")) {
    const ConfigValue& v = cfg.at("flow", "scheme");
    bool found = false;
    for (LinearScheme sc : {LinearScheme::BackwardEuler, LinearScheme::ExplicitEuler, LinearScheme::Exponential})
      if (to_string(sc) == v.text) {
        f.scheme = sc;
        found = true;
      }
    if (!found) Config::fail(v, "unknown scheme '" + v.text + "'");
  }
  f.nodes = cfg.integer("flow", "nodes", f.nodes);
  f.dt = cfg.number("flow", "dt", f.dt);
  f.cfl = cfg.number("flow", "cfl", f.cfl);
  f.t_final = cfg.number("flow", "t_final", f.t_final);
  f.cadence = cfg.number("flow", "cadence", f.cadence);
  f.kappa = cfg.number("flow", "kappa", f.kappa);
  f.perturbation.amplitude = cfg.number("flow", "amplitude", f.perturbation.amplitude);
  f.stop_on_convergence = cfg.integer("flow", "stop_on_convergence", f.stop_on_convergence ? 1 : 0) != 0;
  if (cfg.has("flow", "modes")) {
    f.perturbation.modes.clear();
    for (double k : cfg.numbers("flow", "modes")) {
      if (k != std::round(k) || k < 0) Config::fail(cfg.at("flow", "modes"), "modes are non-negative integers");
      f.perturbation.modes.push_back(static_cast<int>(k));
    }
  }
  if (f.nodes < 16) Config::fail(cfg.at("flow", "nodes"), "at least 16 nodes");

  for (const auto& [key, value] : cfg.section("expected")) {
    if (key == "classification") {
      try {
        s.expected_class = parse_classification(value.text);
      } catch (const Error&) {
        Config::fail(value, "unknown classification '" + value.text + "'");
      }
      continue;
    }
    if (key.size() > 11 && key.compare(key.size() - 11, 11, ".provenance") == 0) continue;
    std::vector<double> vt = cfg.numbers("expected", key);
    if (vt.size() != 2) Config::fail(value, "expected 'value, tolerance'");
    std::string prov = cfg.string("expected", key + ".provenance", "");
    if (prov.empty()) Config::fail(value, "missing " + key + ".provenance");
    s.expected.push_back({key, vt[0], vt[1], prov});
  }
  for (const auto& [key, value] : cfg.section("expected"))
    if (key.size() > 11 && key.compare(key.size() - 11, 11, ".provenance") == 0 &&
        !cfg.has("expected", key.substr(0, key.size() - 11)))
      Config::fail(value, "provenance for an unknown value");
  return s;
}

Scenario load_scenario(const std::string& id_or_path) {
  for (const auto& name : builtin_scenario_ids())
    if (name == id_or_path) return builtin_scenario(id_or_path);
  std::error_code ec;
  if (std::filesystem::is_regular_file(id_or_path, ec)) {
    std::ifstream in(id_or_path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_from_config(ss.str());
  }
  return builtin_scenario(id_or_path);  // throws with the list
}

FlowTrace run_free_flow(const Scenario& sc, const FlowConfig& cfg) {
  ReferenceCurve ref = sc.reference(1024);
  const int N = cfg.nodes;
  const double h = ref.length() / N;
  std::vector<Vec> pts;
  for (int k = 0; k < N; ++k) pts.push_back(ref.at(k * h).x);
  DiscreteCurve c(sc.metric, pts);

  // A shrinking curve shortens its chords, so the step follows cfl * hmin^2
  // and is clipped to land on every sample time.
  auto step_bound = [&](const DiscreteCurve& cur) {
    auto seg = cur.segment_lengths();
    double hmin = *std::min_element(seg.begin(), seg.end());
    return cfg.cfl * hmin * hmin;
  };
  FlowTrace trace;
  trace.dt = cfg.dt > 0 ? cfg.dt : step_bound(c);
  if (trace.dt > step_bound(c) * (1 + 1e-12))
    throw Error(ErrorCode::InvalidArgument, "time step exceeds the explicit bound cfl * h^2");
  const double nan = std::nan("");
  auto record = [&](double t, const ExtrinsicData& ex) {
    MonitorRow r;
    r.t = t;
    r.psi_max = r.min_star_omega = r.max_one_minus_star_omega = r.sup_ii_diff = r.l2_ii_diff = nan;
    for (double& x : r.combined) x = nan;
    r.volume = ex.length;
    r.sup_H = ex.sup_H();
    trace.rows.push_back(r);
  };
  const double start_length = c.length();
  const long samples = std::max(1L, std::lround(cfg.t_final / cfg.cadence));
  double t = 0;
  try {
    ExtrinsicData ex = extrinsic(c);
    record(0, ex);
    for (long k = 1; k <= samples; ++k) {
      const double t_next = k == samples ? cfg.t_final : k * cfg.cadence;
      while (t < t_next - 1e-14) {
        double dt = std::min({trace.dt, step_bound(c), t_next - t});
        c = step_parametric(c, dt, &ex);
        t = t + dt >= t_next - 1e-14 ? t_next : t + dt;
        ++trace.steps;
        if (cfg.reparam_every > 0 && trace.steps % cfg.reparam_every == 0 && c.spacing_ratio() > cfg.reparam_ratio)
          c = c.reparametrized();
        ex = extrinsic(c);
        if (!std::isfinite(ex.length) || ex.length < 1e-3 * start_length || !(ex.sup_H() < cfg.blowup)) {
          trace.reason = Termination::Blowup;
          record(t, ex);
          return trace;
        }
      }
      record(t, ex);
    }
  } catch (const Error&) {
    trace.reason = Termination::Blowup;
  }
  return trace;
}

}  // namespace stableflow
