#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stableflow/core.hpp"
#include "stableflow/geometry/jet.hpp"

namespace stableflow {

enum class DerivMode { Analytic, CentralDifference };

// First and second partial derivatives of the metric coefficients.
// dg[c](a, b) = d_c g_ab and d2g[c][e](a, b) = d_c d_e g_ab.
struct MetricJet {
  Mat g;
  std::array<Mat, kMaxChartDim> dg;
  std::array<std::array<Mat, kMaxChartDim>, kMaxChartDim> d2g;
};

// Riemannian metric on a single coordinate chart. Immutable and cheap to copy.
class ChartMetric {
 public:
  using Eval0 = std::function<void(const double*, double*)>;
  using Eval1 = std::function<void(const Jet1*, Jet1*)>;
  using Eval2 = std::function<void(const Jet2*, Jet2*)>;
  using Domain = std::function<bool(const Vec&)>;

  // f(const S* x, S* g) must fill all dim*dim row-major entries and be
  // generic in the scalar S so that it can be differentiated exactly.
  template <class F>
  static ChartMetric analytic(std::string name, int dim, F f, std::vector<double> periods = {}) {
    return ChartMetric(std::move(name), dim, Eval0(f), Eval1(f), Eval2(f), std::move(periods));
  }

  // Coefficients only; derivatives by 4th-order central differences with
  // steps proportional to `scale`.
  static ChartMetric central_difference(std::string name, int dim, std::function<Mat(const Vec&)> f,
                                        std::vector<double> periods = {}, double scale = 1.0);

  ChartMetric(std::string name, int dim, Eval0 e0, Eval1 e1, Eval2 e2, std::vector<double> periods);

  const std::string& name() const { return impl_->name; }
  int dim() const { return impl_->dim; }
  DerivMode mode() const { return impl_->mode; }
  double fd_scale() const { return impl_->fd_scale; }

  // Period of coordinate i, 0 when not periodic.
  double period(int i) const;
  // Maps periodic components of a coordinate difference into [-P/2, P/2).
  Vec wrap_delta(Vec d) const;

  // Optional validity region of the chart; points outside count as chart exit.
  ChartMetric with_domain(Domain inside) const;
  bool inside(const Vec& x) const;

  // Metric lambda^2 g on the same chart.
  ChartMetric scaled(double lambda) const;

  // Throws DegenerateMetric if g(x) is not finite, symmetric or positive definite.
  Mat g(const Vec& x) const;
  void first(const Vec& x, Mat& g, std::array<Mat, kMaxChartDim>& dg) const;
  MetricJet second(const Vec& x) const;

 private:
  struct Impl {
    std::string name;
    int dim = 0;
    DerivMode mode = DerivMode::Analytic;
    double fd_scale = 1.0;
    Eval0 e0;
    Eval1 e1;
    Eval2 e2;
    std::function<Mat(const Vec&)> coeffs;
    std::vector<double> periods;
    Domain domain;
    double factor = 1.0;
  };
  explicit ChartMetric(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  void check(const Vec& x, const Mat& g) const;
  Mat raw(const Vec& x) const;

  std::shared_ptr<const Impl> impl_;
};

}  // namespace stableflow
