#include "stableflow/geometry/models.hpp"

#include <cmath>
#include <numbers>
#include <type_traits>

namespace stableflow::models {

namespace {
constexpr double kTwoPi = 2 * std::numbers::pi;

template <class S>
void zero(S* g, int n) {
  for (int i = 0; i < n * n; ++i) g[i] = S(0.0);
}
}  // namespace

ChartMetric flat(int dim, std::vector<double> periods) {
  auto f = [dim](const auto* x, auto* g) {
    using S = std::remove_cv_t<std::remove_reference_t<decltype(*x)>>;
    (void)x;
    zero<S>(g, dim);
    for (int i = 0; i < dim; ++i) g[i * dim + i] = S(1.0);
  };
  return ChartMetric::analytic(periods.empty() ? "flat" : "flat-torus", dim, f, std::move(periods));
}

ChartMetric polar_plane() {
  auto f = [](const auto* x, auto* g) {
    using S = std::remove_cv_t<std::remove_reference_t<decltype(*x)>>;
    g[0] = S(1.0);
    g[1] = S(0.0);
    g[2] = S(0.0);
    g[3] = x[0] * x[0];
  };
  return ChartMetric::analytic("polar-plane", 2, f, {0.0, kTwoPi})
      .with_domain([](const Vec& x) { return x[0] > 0; });
}

ChartMetric sphere_colatitude() {
  auto f = [](const auto* x, auto* g) {
    using S = std::remove_cv_t<std::remove_reference_t<decltype(*x)>>;
    using std::sin;
    S s = sin(x[0]);
    g[0] = S(1.0);
    g[1] = S(0.0);
    g[2] = S(0.0);
    g[3] = s * s;
  };
  return ChartMetric::analytic("sphere-colatitude", 2, f, {0.0, kTwoPi})
      .with_domain([](const Vec& x) { return x[0] > 0 && x[0] < std::numbers::pi; });
}

ChartMetric sphere_equator() {
  auto f = [](const auto* x, auto* g) {
    using S = std::remove_cv_t<std::remove_reference_t<decltype(*x)>>;
    using std::cos;
    S c = cos(x[0]);
    g[0] = S(1.0);
    g[1] = S(0.0);
    g[2] = S(0.0);
    g[3] = c * c;
  };
  return ChartMetric::analytic("sphere-equator", 2, f, {0.0, kTwoPi})
      .with_domain([](const Vec& x) { return std::abs(x[0]) < std::numbers::pi / 2; });
}

ChartMetric hyperbolic_cylinder() {
  auto f = [](const auto* x, auto* g) {
    using S = std::remove_cv_t<std::remove_reference_t<decltype(*x)>>;
    using std::cosh;
    S c = cosh(x[0]);
    g[0] = S(1.0);
    g[1] = S(0.0);
    g[2] = S(0.0);
    g[3] = c * c;
  };
  return ChartMetric::analytic("hyperbolic-cylinder", 2, f, {0.0, kTwoPi});
}

ChartMetric hyperbolic_3d_waist() {
  auto f = [](const auto* x, auto* g) {
    using S = std::remove_cv_t<std::remove_reference_t<decltype(*x)>>;
    using std::cosh;
    zero<S>(g, 3);
    S c = cosh(x[1]) * cosh(x[2]);
    g[0] = c * c;
    g[4] = S(1.0);
    g[8] = S(1.0);
  };
  return ChartMetric::analytic("hyperbolic-3d-waist", 3, f, {kTwoPi, 0.0, 0.0});
}

ChartMetric round_s3() {
  auto f = [](const auto* x, auto* g) {
    using S = std::remove_cv_t<std::remove_reference_t<decltype(*x)>>;
    using std::sin;
    zero<S>(g, 3);
    S s = sin(x[0]);
    S t = sin(x[1]);
    g[0] = S(1.0);
    g[4] = s * s;
    g[8] = s * s * t * t;
  };
  return ChartMetric::analytic("round-s3", 3, f, {0.0, 0.0, kTwoPi});
}

ChartMetric twisted_flat(double a) {
  auto f = [a](const auto* x, auto* g) {
    using S = std::remove_cv_t<std::remove_reference_t<decltype(*x)>>;
    // Coframe: dx, dy1 - a y2 dx, dy2 + a y1 dx.
    S u = -a * x[2];
    S w = a * x[1];
    g[0] = 1.0 + u * u + w * w;
    g[1] = u;
    g[2] = w;
    g[3] = u;
    g[4] = S(1.0);
    g[5] = S(0.0);
    g[6] = w;
    g[7] = S(0.0);
    g[8] = S(1.0);
  };
  return ChartMetric::analytic("twisted-flat", 3, f, {kTwoPi, 0.0, 0.0});
}

}  // namespace stableflow::models
