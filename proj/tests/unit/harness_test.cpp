#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "stableflow/geometry/curvature.hpp"
#include "stableflow/harness/acceptance.hpp"
#include "stableflow/harness/report.hpp"
#include "stableflow/harness/scenario.hpp"

using namespace stableflow;

namespace {

constexpr double kPi = std::numbers::pi;

double eval(const std::string& text, std::vector<double> x = {}, std::vector<std::string> vars = {}) {
  return Expr::parse(text, vars)(x);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const char* kWaistConfig = R"(# hand-written waist
[scenario]
id = config-waist

[metric]
coordinates = r, theta
periods = 0, 2*pi
g_r_r = 1
g_theta_theta = cosh(r)^2   ; warped

[sigma]
origin = 0, 0
direction = 0, 1
length = 2*pi

[flow]
nodes = 64
t_final = 1
amplitude = 0.01
modes = 1, 2

[expected]
classification = strongly-stable
c0 = 1, 1e-3
c0.provenance = curvature -1 along a geodesic
)";

}  // namespace

TEST(Expr, PrecedenceAndAssociativity) {
  EXPECT_DOUBLE_EQ(eval("1 + 2 * 3"), 7);
  EXPECT_DOUBLE_EQ(eval("(1 + 2) * 3"), 9);
  EXPECT_DOUBLE_EQ(eval("2 ^ 3 ^ 2"), 512);
  EXPECT_DOUBLE_EQ(eval("-2 ^ 2"), -4);
  EXPECT_DOUBLE_EQ(eval("8 / 4 / 2"), 1);
  EXPECT_DOUBLE_EQ(eval("1 - 2 - 3"), -4);
  EXPECT_DOUBLE_EQ(eval("--3"), 3);
  EXPECT_DOUBLE_EQ(eval("2 * -3"), -6);
  EXPECT_DOUBLE_EQ(eval("1.5e1 + .5"), 15.5);
  EXPECT_DOUBLE_EQ(eval("2 \xE2\x88\x92 3"), -1);  // U+2212
}

TEST(Expr, FunctionsVariablesAndConstants) {
  EXPECT_DOUBLE_EQ(eval("cosh(r)^2 - sinh(r)^2", {0.7}, {"r"}), std::cosh(0.7) * std::cosh(0.7) -
                                                                    std::sinh(0.7) * std::sinh(0.7));
  EXPECT_DOUBLE_EQ(eval("exp(x) * sin(y) + cos(y)", {0.3, 1.1}, {"x", "y"}),
                   std::exp(0.3) * std::sin(1.1) + std::cos(1.1));
  EXPECT_DOUBLE_EQ(eval("2*pi"), 2 * kPi);
  EXPECT_DOUBLE_EQ(eval("x ^ 0.5", {2.0}, {"x"}), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(eval("x ^ -2", {2.0}, {"x"}), 0.25);
  EXPECT_NEAR(eval("x ^ y", {2.0, 3.0}, {"x", "y"}), 8, 1e-14);
  EXPECT_TRUE(Expr::parse("2 * pi / 3", {}).is_constant());
  EXPECT_FALSE(Expr::parse("2 * x", {"x"}).is_constant());
}

TEST(Expr, JetsAreExact) {
  Expr e = Expr::parse("cosh(r)^2", {"r"});
  Jet2 x = seed2(0.4, 0);
  Jet2 g = e.eval(&x);
  EXPECT_NEAR(g.v.v, std::cosh(0.4) * std::cosh(0.4), 1e-15);
  EXPECT_NEAR(g.v.d[0], std::sinh(0.8), 1e-15);
  EXPECT_NEAR(g.d[0].d[0], 2 * std::cosh(0.8), 1e-14);
}

TEST(Expr, ErrorsCarryColumn) {
  EXPECT_EQ(code_of([] { eval("1 +"); }), ErrorCode::ConfigParse);
  EXPECT_NE(message_of([] { Expr::parse("cosh(r) ^^ 2", {"r"}, 3, 10); }).find("line 3, column 19"), std::string::npos);
  EXPECT_NE(message_of([] { Expr::parse("tanh(r)", {"r"}); }).find("unknown identifier 'tanh'"), std::string::npos);
  EXPECT_NE(message_of([] { Expr::parse("(1 + 2", {}); }).find("expected ')'"), std::string::npos);
  EXPECT_EQ(code_of([] { Expr::parse("", {}); }), ErrorCode::ConfigParse);
  EXPECT_EQ(code_of([] { Expr::parse("1 2", {}); }), ErrorCode::ConfigParse);
}

TEST(Config, SectionsCommentsAndExpressions) {
  Config c = Config::parse("top = 1\n[a]\n  x = 2*pi  # comment\ny=3;also\n[b]\nlist = 1, 2 ,3\n");
  EXPECT_DOUBLE_EQ(c.number("", "top", 0), 1);
  EXPECT_DOUBLE_EQ(c.number("a", "x", 0), 2 * kPi);
  EXPECT_EQ(c.integer("a", "y", 0), 3);
  EXPECT_EQ(c.numbers("b", "list"), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(c.at("a", "x").line, 3);
  EXPECT_EQ(c.at("a", "x").column, 7);
  EXPECT_DOUBLE_EQ(c.number("a", "missing", 4.5), 4.5);
}

TEST(Config, ErrorsPointAtLineAndColumn) {
  EXPECT_NE(message_of([] { Config::parse("[a]\nkey value\n"); }).find("line 2, column 1"), std::string::npos);
  EXPECT_NE(message_of([] { Config::parse("[a]\nx = 1\n  x = 2\n"); }).find("line 3, column 3: duplicate key"),
            std::string::npos);
  EXPECT_NE(message_of([] { Config::parse("[a\n"); }).find("line 1"), std::string::npos);
  EXPECT_NE(message_of([] { Config::parse("[a]\nx =\n"); }).find("missing value"), std::string::npos);
  Config c = Config::parse("[a]\nn = 1.5\nv = 1,,2\n");
  EXPECT_NE(message_of([&] { c.integer("a", "n", 0); }).find("expected an integer"), std::string::npos);
  EXPECT_NE(message_of([&] { c.numbers("a", "v"); }).find("empty list entry"), std::string::npos);
  EXPECT_NE(message_of([&] { c.require_known("a", {"n"}); }).find("line 3, column 1: unknown key 'v'"),
            std::string::npos);
}

TEST(Scenario, ConfigMetricMatchesBuiltin) {
  Scenario cfg = scenario_from_config(kWaistConfig);
  Scenario ref = builtin_scenario("hyperbolic-waist");
  EXPECT_EQ(cfg.id, "config-waist");
  EXPECT_EQ(cfg.flow.nodes, 64);
  EXPECT_EQ(cfg.flow.perturbation.modes, (std::vector<int>{1, 2}));
  ASSERT_TRUE(cfg.expected_class.has_value());
  EXPECT_EQ(*cfg.expected_class, Classification::StronglyStable);
  EXPECT_EQ(cfg.metric.period(1), ref.metric.period(1));
  for (double r : {-0.5, 0.0, 0.3}) {
    Vec x(2);
    x << r, 1.0;
    MetricJet a = cfg.metric.second(x), b = ref.metric.second(x);
    EXPECT_LT((a.g - b.g).norm(), 1e-15);
    EXPECT_LT((a.dg[0] - b.dg[0]).norm(), 1e-14);
    EXPECT_LT((a.d2g[0][0] - b.d2g[0][0]).norm(), 1e-13);
    EXPECT_NEAR(sectional(riemann(cfg.metric, x), Vec::Unit(2, 0), Vec::Unit(2, 1)), -1, 1e-12);
  }
  AnalyzeResult res = analyze_scenario(cfg, 128);
  EXPECT_TRUE(res.mismatches.empty());
  EXPECT_NEAR(res.report.c0, 1, 1e-9);
}

TEST(Scenario, ConfigErrors) {
  std::string bad = kWaistConfig;
  bad.replace(bad.find("cosh(r)^2"), 9, "cosh(q)^2");
  EXPECT_NE(message_of([&] { scenario_from_config(bad); }).find("line 9, column 22: unknown identifier 'q'"),
            std::string::npos);
  std::string unknown = std::string(kWaistConfig) + "[flow2]\nx = 1\n";
  EXPECT_NE(message_of([&] { scenario_from_config(unknown); }).find("unknown section [flow2]"), std::string::npos);
  std::string typo = kWaistConfig;
  typo.replace(typo.find("t_final"), 7, "t_finale");
  EXPECT_NE(message_of([&] { scenario_from_config(typo); }).find("unknown key 't_finale'"), std::string::npos);
  std::string no_prov = kWaistConfig;
  no_prov.erase(no_prov.find("c0.provenance"));
  EXPECT_NE(message_of([&] { scenario_from_config(no_prov); }).find("missing c0.provenance"), std::string::npos);
  std::string no_diag = kWaistConfig;
  no_diag.erase(no_diag.find("g_r_r = 1"), 9);
  EXPECT_NE(message_of([&] { scenario_from_config(no_diag); }).find("missing key 'g_r_r'"), std::string::npos);
}

TEST(Scenario, BuiltinCatalog) {
  auto ids = builtin_scenario_ids();
  EXPECT_EQ(ids.size(), 5u);
  for (const auto& id : ids) {
    Scenario sc = builtin_scenario(id);
    EXPECT_EQ(sc.id, id);
    EXPECT_FALSE(sc.expected.empty());
    for (const auto& e : sc.expected) EXPECT_FALSE(e.provenance.empty()) << id << " " << e.name;
  }
  std::string msg = message_of([] { builtin_scenario("hyperbolic"); });
  EXPECT_NE(msg.find("unknown-scenario"), std::string::npos);
  for (const auto& id : ids) EXPECT_NE(msg.find(id), std::string::npos);
  EXPECT_EQ(code_of([] { load_scenario("/nonexistent/file.ini"); }), ErrorCode::UnknownScenario);
}

TEST(Scenario, AnalyzeMatchesExpectedValues) {
  for (const char* id : {"hyperbolic-waist", "sphere-equator", "flat-torus-geodesic", "hyperbolic-3d-waist"}) {
    AnalyzeResult r = analyze_scenario(builtin_scenario(id), 256);
    EXPECT_TRUE(r.mismatches.empty()) << id << ": " << (r.mismatches.empty() ? "" : r.mismatches[0]);
    auto j = analysis_record(builtin_scenario(id), r);
    EXPECT_EQ(j["scenario"], id);
    EXPECT_EQ(j["classification"], to_string(r.report.classification));
  }
  EXPECT_EQ(code_of([] { analyze_scenario(builtin_scenario("flat-plane-circle")); }), ErrorCode::NotMinimal);
}

TEST(Scenario, ShrinkingCircleFreeFlow) {
  Scenario sc = builtin_scenario("flat-plane-circle");
  FlowTrace tr = run_free_flow(sc, sc.flow);
  EXPECT_EQ(tr.reason, Termination::Horizon);
  ASSERT_EQ(tr.rows.size(), 9u);
  EXPECT_NEAR(tr.rows[0].sup_H, 1, 1e-6);
  for (const auto& r : tr.rows) {
    double rho = r.volume / (2 * kPi);
    EXPECT_NEAR(rho * rho, 1 - 2 * r.t, 1e-3);
  }
  FlowConfig longer = sc.flow;
  longer.t_final = 0.6;
  EXPECT_EQ(run_free_flow(sc, longer).reason, Termination::Blowup);
}

TEST(Scenario, FlowOutputIsDeterministic) {
  Scenario sc = builtin_scenario("hyperbolic-waist");
  FlowConfig cfg = sc.flow;
  cfg.nodes = 32;
  cfg.t_final = 0.5;
  TubularChart tc = sc.tube();
  std::string a = run_flow(tc, cfg).to_csv(), b = run_flow(sc.tube(), cfg).to_csv();
  EXPECT_EQ(a, b);
  EXPECT_EQ(FlowTrace::from_csv(a).to_csv(), a);
  EXPECT_EQ(a.find('\r'), std::string::npos);
}

TEST(Report, G2SuiteSmall) {
  auto rows = g2_suite(20);
  for (const auto& r : rows) EXPECT_TRUE(r.pass) << r.name << " " << r.worst;
  EXPECT_NE(format_suite(rows).find("PASS"), std::string::npos);
}

TEST(Acceptance, ResultFormattingAndThreads) {
  CriterionResult r{3, "Jacobi spectrum", true, "ok", 1.25};
  EXPECT_EQ(format_result(r), "PASS [ 3] Jacobi spectrum (1.2 s): ok");
  r.pass = false;
  EXPECT_EQ(format_result(r).substr(0, 4), "FAIL");
  EXPECT_THROW(run_criterion(0), Error);
  ::setenv("STABLEFLOW_THREADS", "3", 1);
  EXPECT_EQ(threads_from_env(), 3);
  ::setenv("STABLEFLOW_THREADS", "zero", 1);
  EXPECT_EQ(threads_from_env(), 1);
  ::unsetenv("STABLEFLOW_THREADS");
  EXPECT_EQ(threads_from_env(), 1);
}

TEST(Acceptance, CheapCriteriaPassInParallel) {
  auto results = run_acceptance({8, 1, 3}, 2);
  ASSERT_EQ(results.size(), 3u);
  EXPECT_EQ(results[0].id, 1);
  EXPECT_EQ(results[2].id, 8);
  for (const auto& r : results) EXPECT_TRUE(r.pass) << format_result(r);
}
