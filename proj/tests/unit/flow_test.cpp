#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stableflow/flow/flow.hpp"
#include "stableflow/geometry/models.hpp"

using namespace stableflow;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> v) {
  Vec r(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

TubularChart waist_chart() {
  return TubularChart(
      ReferenceCurve::coordinate_line(models::hyperbolic_cylinder(), vec({0, 0}), vec({0, 1}), 2 * kPi, 1024), 0.3);
}

TubularChart equator_chart() {
  return TubularChart(
      ReferenceCurve::coordinate_line(models::sphere_equator(), vec({0, 0}), vec({0, 1}), 2 * kPi, 1024), 0.3);
}

// Level circle r = r0 of the hyperbolic cylinder sampled at N nodes.
DiscreteCurve level_circle(double r0, int N) {
  std::vector<Vec> pts;
  for (int k = 0; k < N; ++k) pts.push_back(vec({r0, 2 * kPi * k / N}));
  return DiscreteCurve(models::hyperbolic_cylinder(), pts);
}

// r' = -tanh r by RK4.
double tanh_decay(double r, double t) {
  const int n = 10000;
  const double h = t / n;
  auto f = [](double x) { return -std::tanh(x); };
  for (int i = 0; i < n; ++i) {
    double k1 = f(r), k2 = f(r + h / 2 * k1), k3 = f(r + h / 2 * k2), k4 = f(r + h * k3);
    r += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return r;
}

}  // namespace

TEST(FermiMetricTable, MatchesWaistMetric) {
  TubularChart tc = waist_chart();
  FermiMetricTable table(tc, 32);
  Mat g;
  std::array<Mat, kMaxChartDim> dg;
  for (double y : {-0.29, -0.1, 0.0, 0.05, 0.2}) {
    for (int j : {0, 7, 63}) {
      table.eval(j, vec({y}), g, &dg);
      EXPECT_NEAR(g(0, 0), std::cosh(y) * std::cosh(y), 1e-12);
      EXPECT_NEAR(g(0, 1), 0, 1e-12);
      EXPECT_NEAR(g(1, 1), 1, 1e-12);
      EXPECT_NEAR(dg[0](0, 0), std::sinh(2 * y), 1e-10);
    }
  }
  EXPECT_FALSE(table.contains(vec({0.31})));
}

TEST(FermiMetricTable, CodimensionTwo) {
  auto ref = ReferenceCurve::coordinate_line(models::hyperbolic_3d_waist(), vec({0, 0, 0}), vec({1, 0, 0}), 2 * kPi,
                                             1024);
  TubularChart tc(ref, 0.2);
  FermiMetricTable table(tc, 16, 12, 32);
  Mat g;
  Vec y = vec({0.1, -0.05});
  table.eval(3, y, g);
  Mat exact = tc.fermi_metric(3 * table.spacing() / 2, y);
  EXPECT_LT((g - exact).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GraphicalFlow, ZeroSectionIsFixed) {
  TubularChart tc = waist_chart();
  FermiMetricTable table(tc, 64);
  NormalSection sec;
  sec.y.assign(64, vec({0}));
  auto v = graphical_velocity(table, sec);
  for (const Vec& x : v) EXPECT_LT(x.norm(), 1e-12);
}

TEST(GraphicalFlow, LevelCircleFollowsOde) {
  TubularChart tc = waist_chart();
  const int N = 32;
  FermiMetricTable table(tc, N);
  NormalSection sec;
  sec.y.assign(N, vec({0.1}));
  const double dt = 1e-3;
  for (int n = 0; n < 500; ++n) ASSERT_TRUE(step_graphical(table, sec, dt));
  EXPECT_NEAR(sec.y[5][0], tanh_decay(0.1, 0.5), 1e-4);
}

TEST(ParametricFlow, ShrinkingCircle) {
  const int N = 128;
  std::vector<Vec> pts;
  for (int k = 0; k < N; ++k) pts.push_back(vec({std::cos(2 * kPi * k / N), std::sin(2 * kPi * k / N)}));
  DiscreteCurve c(models::flat(2), pts);
  const double dt = 2.5e-4;
  for (int n = 0; n < 1000; ++n) c = step_parametric(c, dt);
  for (int k = 0; k < N; k += 17) EXPECT_NEAR(c.point(k).norm(), std::sqrt(0.5), 2e-4);
}

TEST(ParametricFlow, LevelCircleFollowsOde) {
  DiscreteCurve c = level_circle(0.1, 64);
  const double dt = 1e-3;
  for (int n = 0; n < 500; ++n) c = step_parametric(c, dt);
  EXPECT_NEAR(c.point(9)[0], tanh_decay(0.1, 0.5), 1e-4);
}

TEST(ParametricFlow, GeodesicIsFixed) {
  DiscreteCurve c = level_circle(0.0, 64);
  DiscreteCurve next = step_parametric(c, 1e-3);
  for (int k = 0; k < 64; ++k) EXPECT_LT((next.point(k) - c.point(k)).norm(), 1e-10);
}

TEST(FlowAgreement, ParametricAndGraphicalConvergeAtSecondOrder) {
  TubularChart tc = waist_chart();
  std::vector<double> diff;
  for (int N : {32, 64}) {
    FlowConfig cfg;
    cfg.nodes = N;
    cfg.t_final = 0.5;
    cfg.cadence = 0.1;
    cfg.representation = Representation::Graphical;
    FlowTrace gr = run_flow(tc, cfg);
    cfg.representation = Representation::Parametric;
    cfg.dt = gr.dt;
    FlowTrace pa = run_flow(tc, cfg);
    ASSERT_EQ(gr.rows.size(), pa.rows.size());
    double worst = 0;
    for (size_t i = 0; i < gr.rows.size(); ++i)
      worst = std::max(worst, std::abs(gr.rows[i].psi_max - pa.rows[i].psi_max));
    diff.push_back(worst);
  }
  EXPECT_GT(diff[0] / diff[1], 3.0);
}

TEST(LinearFlow, EigenmodesDecayExactly) {
  TubularChart tc = waist_chart();
  JacobiOperator J(tc.reference(), 32);
  Eigenpairs ep = lowest_eigenpairs(J.matrix(), 3);
  LinearFlow exp_flow(J, 0.05, LinearScheme::Exponential);
  LinearFlow be_flow(J, 0.05, LinearScheme::BackwardEuler);
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd v = ep.vectors.col(k), a = v, b = v;
    for (int n = 0; n < 20; ++n) {
      a = exp_flow.step(a);
      b = be_flow.step(b);
    }
    EXPECT_LT((a - std::exp(-ep.values[k]) * v).norm(), 1e-7);
    EXPECT_LT((b - std::pow(1 + 0.05 * ep.values[k], -20) * v).norm(), 1e-7);
  }
}

TEST(LinearFlow, ConstantModeRates) {
  for (auto [tc, rate] : {std::pair{waist_chart(), 1.0}, std::pair{equator_chart(), -1.0}}) {
    JacobiOperator J(tc.reference(), 32);
    LinearFlow flow(J, 0.1, LinearScheme::Exponential);
    Eigen::VectorXd s = Eigen::VectorXd::Constant(32, 0.01);
    for (int n = 0; n < 10; ++n) s = flow.step(s);
    EXPECT_NEAR(std::log(s[0] / 0.01), -rate, 1e-9);
  }
}

TEST(Monitors, SigmaItself) {
  TubularChart tc = waist_chart();
  DiscreteCurve c = level_circle(0.0, 64);
  MonitorRow r = monitors(tc, c);
  EXPECT_LT(r.psi_max, 1e-20);
  EXPECT_NEAR(r.min_star_omega, 1, 1e-12);
  EXPECT_LT(r.sup_ii_diff, 1e-10);
  EXPECT_NEAR(r.volume, 2 * kPi, 1e-10);
}

TEST(Monitors, LevelCircleIsHorizontal) {
  TubularChart tc = waist_chart();
  MonitorRow r = monitors(tc, level_circle(0.1, 64));
  EXPECT_NEAR(r.psi_max, 0.01, 1e-10);
  EXPECT_NEAR(r.min_star_omega, 1, 1e-10);
}

TEST(Monitors, TiltedSectionAngleBounds) {
  TubularChart tc = waist_chart();
  NormalSection sec;
  const int N = 128;
  for (int k = 0; k < N; ++k) sec.y.push_back(vec({0.05 * std::sin(2 * kPi * k / N)}));
  std::vector<FermiPoint> feet;
  DiscreteCurve c = section_curve(tc, sec, &feet);
  ExtrinsicData ex = extrinsic(c);
  auto en = extended_tensors(tc, c, ex, &feet);
  for (const auto& e : en) {
    const double fs2 = e.angles.fs * e.angles.fs;
    EXPECT_GE(e.angles.one_minus_star_omega, 0.5 * fs2 - 1e-15);
    EXPECT_LE(e.angles.one_minus_star_omega, fs2 + 1e-15);
  }
  EXPECT_GT(monitors(tc, c, &feet).max_one_minus_star_omega, 1e-4);
}

TEST(OmegaEvolution, ParallelLineInFlatSpace) {
  TubularChart tc(ReferenceCurve::coordinate_line(models::flat(2, {0, 2 * kPi}), vec({0, 0}), vec({0, 1}), 2 * kPi,
                                                  256),
                  0.5);
  std::vector<Vec> pts;
  for (int k = 0; k < 64; ++k) pts.push_back(vec({0.1, 2 * kPi * k / 64}));
  DiscreteCurve c(tc.metric(), pts);
  OmegaResidual r = omega_evolution_residual(tc, c, c, c, 1e-3);
  EXPECT_LT(r.max_residual, 1e-10);
}

TEST(OmegaEvolution, ResidualConvergesOnWaist) {
  TubularChart tc = waist_chart();
  RefinementStudy st = omega_refinement(tc, Perturbation{}, {32, 64}, 0.1);
  EXPECT_GE(st.min_slope(), 0.8);
  EXPECT_THROW(omega_refinement(tc, Perturbation{}, {32}, 0.1), Error);
}

TEST(FitDecay, SyntheticExponential) {
  std::vector<double> t, f;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.1 * i);
    f.push_back(3 * std::exp(-2 * t.back()));
  }
  DecayFit fit = fit_decay(t, f, 1, 9);
  EXPECT_NEAR(fit.rate, 2.0, 1e-12);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  f[60] = 0;
  fit = fit_decay(t, f, 1, 9);
  EXPECT_NEAR(fit.t1, 5.9, 1e-12);
  EXPECT_THROW(fit_decay(t, f, 6, 9), Error);
}

TEST(FlowTrace, CsvRoundTrip) {
  FlowTrace tr;
  for (int i = 0; i < 5; ++i) {
    MonitorRow r;
    r.t = 0.1 * i + 1e-17;
    r.psi_max = std::exp(-i) / 3;
    r.sup_H = std::nan("");
    r.combined[2] = 1.0 / 7;
    tr.rows.push_back(r);
  }
  FlowTrace back = FlowTrace::from_csv(tr.to_csv());
  ASSERT_EQ(back.rows.size(), tr.rows.size());
  EXPECT_EQ(back.to_csv(), tr.to_csv());
  EXPECT_EQ(back.rows[3].psi_max, tr.rows[3].psi_max);
  EXPECT_THROW(FlowTrace::from_csv("t\n1,x\n"), Error);
}

TEST(RunFlow, GatesAndCfl) {
  TubularChart tc = waist_chart();
  FlowConfig cfg;
  cfg.nodes = 32;
  cfg.t_final = 0.1;
  cfg.perturbation.amplitude = 0.29;
  cfg.kappa = 0.05;
  EXPECT_THROW(run_flow(tc, cfg), Error);
  cfg.perturbation.amplitude = 0.02;
  cfg.dt = 1.0;
  EXPECT_THROW(run_flow(tc, cfg), Error);
}

TEST(RunFlow, VolumeDecreasesAndEquatorLeaves) {
  FlowConfig cfg;
  cfg.nodes = 32;
  cfg.t_final = 1;
  FlowTrace tr = run_flow(waist_chart(), cfg);
  for (size_t i = 1; i < tr.rows.size(); ++i)
    EXPECT_LE(tr.rows[i].volume, tr.rows[i - 1].volume + 10 * tr.dt * tr.dt);
  cfg.t_final = 5;
  for (double amp : {0.02, -0.02}) {
    cfg.perturbation.amplitude = amp;
    FlowTrace eq = run_flow(equator_chart(), cfg);
    EXPECT_TRUE(eq.reason == Termination::LeftTube || eq.rows.back().psi_max > 10 * eq.rows.front().psi_max);
  }
}
