#include "stableflow/geometry/metric.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

namespace stableflow {

namespace {

std::string point_str(const Vec& x) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

}  // namespace

ChartMetric::ChartMetric(std::string name, int dim, Eval0 e0, Eval1 e1, Eval2 e2,
                         std::vector<double> periods) {
  if (dim < 2 || dim > kMaxChartDim)
    throw Error(ErrorCode::InvalidArgument, "chart dimension must be in [2, 4]");
  auto impl = std::make_shared<Impl>();
  impl->name = std::move(name);
  impl->dim = dim;
  impl->mode = DerivMode::Analytic;
  impl->e0 = std::move(e0);
  impl->e1 = std::move(e1);
  impl->e2 = std::move(e2);
  periods.resize(dim, 0.0);
  impl->periods = std::move(periods);
  impl_ = std::move(impl);
}

ChartMetric ChartMetric::central_difference(std::string name, int dim,
                                            std::function<Mat(const Vec&)> f,
                                            std::vector<double> periods, double scale) {
  if (dim < 2 || dim > kMaxChartDim)
    throw Error(ErrorCode::InvalidArgument, "chart dimension must be in [2, 4]");
  auto impl = std::make_shared<Impl>();
  impl->name = std::move(name);
  impl->dim = dim;
  impl->mode = DerivMode::CentralDifference;
  impl->fd_scale = scale;
  impl->coeffs = std::move(f);
  periods.resize(dim, 0.0);
  impl->periods = std::move(periods);
  return ChartMetric(std::shared_ptr<const Impl>(std::move(impl)));
}

double ChartMetric::period(int i) const { return impl_->periods[i]; }

Vec ChartMetric::wrap_delta(Vec d) const {
  for (int i = 0; i < dim(); ++i) {
    double p = impl_->periods[i];
    if (p > 0) d[i] -= p * std::floor(d[i] / p + 0.5);
  }
  return d;
}

ChartMetric ChartMetric::with_domain(Domain inside) const {
  auto impl = std::make_shared<Impl>(*impl_);
  impl->domain = std::move(inside);
  return ChartMetric(std::shared_ptr<const Impl>(std::move(impl)));
}

bool ChartMetric::inside(const Vec& x) const {
  for (int i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i])) return false;
  return !impl_->domain || impl_->domain(x);
}

ChartMetric ChartMetric::scaled(double lambda) const {
  auto impl = std::make_shared<Impl>(*impl_);
  impl->factor *= lambda * lambda;
  impl->name += "*" + std::to_string(lambda) + "^2";
  return ChartMetric(std::shared_ptr<const Impl>(std::move(impl)));
}

Mat ChartMetric::raw(const Vec& x) const {
  const int n = dim();
  Mat g(n, n);
  if (impl_->mode == DerivMode::Analytic) {
    double out[kMaxChartDim * kMaxChartDim];
    impl_->e0(x.data(), out);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) g(a, b) = out[a * n + b];
  } else {
    g = impl_->coeffs(x);
  }
  return g * impl_->factor;
}

void ChartMetric::check(const Vec& x, const Mat& g) const {
  const int n = dim();
  double scale = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (!std::isfinite(g(a, b)))
        throw Error(ErrorCode::DegenerateMetric, "non-finite metric at " + point_str(x));
      scale = std::max(scale, std::abs(g(a, b)));
    }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (std::abs(g(a, b) - g(b, a)) > 1e-14 * scale)
        throw Error(ErrorCode::DegenerateMetric, "asymmetric metric at " + point_str(x));
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-150)
    throw Error(ErrorCode::DegenerateMetric, "metric not positive definite at " + point_str(x));
}

Mat ChartMetric::g(const Vec& x) const {
  Mat g = raw(x);
  check(x, g);
  return g;
}

void ChartMetric::first(const Vec& x, Mat& g, std::array<Mat, kMaxChartDim>& dg) const {
  const int n = dim();
  if (impl_->mode == DerivMode::Analytic) {
    Jet1 xs[kMaxChartDim];
    Jet1 out[kMaxChartDim * kMaxChartDim];
    for (int i = 0; i < n; ++i) xs[i] = seed1(x[i], i);
    impl_->e1(xs, out);
    g.resize(n, n);
    for (int c = 0; c < n; ++c) dg[c].resize(n, n);
    const double f = impl_->factor;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const Jet1& v = out[a * n + b];
        g(a, b) = f * v.v;
        for (int c = 0; c < n; ++c) dg[c](a, b) = f * v.d[c];
      }
  } else {
    g = raw(x);
    const double h = 1e-4 * impl_->fd_scale;
    for (int c = 0; c < n; ++c) {
      Vec e = Vec::Zero(n);
      e[c] = h;
      dg[c] = (-raw(x + 2 * e) + 8 * raw(x + e) - 8 * raw(x - e) + raw(x - 2 * e)) / (12 * h);
    }
  }
  check(x, g);
}

MetricJet ChartMetric::second(const Vec& x) const {
  const int n = dim();
  MetricJet j;
  if (impl_->mode == DerivMode::Analytic) {
    Jet2 xs[kMaxChartDim];
    Jet2 out[kMaxChartDim * kMaxChartDim];
    for (int i = 0; i < n; ++i) xs[i] = seed2(x[i], i);
    impl_->e2(xs, out);
    j.g.resize(n, n);
    for (int c = 0; c < n; ++c) {
      j.dg[c].resize(n, n);
      for (int e = 0; e < n; ++e) j.d2g[c][e].resize(n, n);
    }
    const double f = impl_->factor;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const Jet2& v = out[a * n + b];
        j.g(a, b) = f * v.v.v;
        for (int c = 0; c < n; ++c) {
          j.dg[c](a, b) = f * v.d[c].v;
          for (int e = 0; e < n; ++e) j.d2g[c][e](a, b) = f * v.d[c].d[e];
        }
      }
    check(x, j.g);
    return j;
  }
  first(x, j.g, j.dg);
  // Second derivatives use a wider step than the first: truncation h^4 and
  // roundoff eps/h^2 balance near 1e-3.
  const double h = 1e-3 * impl_->fd_scale;
  auto unit = [&](int c) {
    Vec e = Vec::Zero(n);
    e[c] = h;
    return e;
  };
  for (int c = 0; c < n; ++c) {
    Vec ec = unit(c);
    j.d2g[c][c] = (-raw(x + 2 * ec) + 16 * raw(x + ec) - 30 * raw(x) + 16 * raw(x - ec) -
                   raw(x - 2 * ec)) /
                  (12 * h * h);
    for (int e = c + 1; e < n; ++e) {
      Vec ee = unit(e);
      auto d1 = [&](const Vec& y) {
        return Mat((-raw(y + 2 * ee) + 8 * raw(y + ee) - 8 * raw(y - ee) + raw(y - 2 * ee)) / (12 * h));
      };
      Mat m = (-d1(x + 2 * ec) + 8 * d1(x + ec) - 8 * d1(x - ec) + d1(x - 2 * ec)) / (12 * h);
      j.d2g[c][e] = m;
      j.d2g[e][c] = m;
    }
  }
  return j;
}

}  // namespace stableflow
