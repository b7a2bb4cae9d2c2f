#include "stableflow/harness/report.hpp"

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "stableflow/g2/g2.hpp"

namespace stableflow {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

AnalyzeResult analyze_scenario(const Scenario& sc, int nodes, int eigenvalues) {
  AnalyzeResult r;
  r.report = analyze_stability(sc.reference(1024), nodes, eigenvalues);
  const StabilityReport& rep = r.report;
  if (sc.expected_class && *sc.expected_class != rep.classification)
    r.mismatches.push_back("classification " + to_string(rep.classification) + ", expected " +
                           to_string(*sc.expected_class));
  for (const ExpectedValue& e : sc.expected) {
    double got;
    if (e.name == "c0") {
      got = rep.c0;
    } else if (e.name.rfind("lambda_", 0) == 0) {
      size_t k = std::stoul(e.name.substr(7));
      if (k >= rep.jacobi_spectrum.size()) continue;
      got = rep.jacobi_spectrum[k];
    } else {
      continue;
    }
    if (!(std::abs(got - e.value) <= e.tolerance))
      r.mismatches.push_back(e.name + " = " + fmt("%.9g", got) + ", expected " + fmt("%.9g", e.value) + " +- " +
                             fmt("%.3g", e.tolerance));
  }
  return r;
}

std::string format_analysis(const Scenario& sc, const AnalyzeResult& r) {
  const StabilityReport& rep = r.report;
  std::string out;
  out += "scenario        " + sc.id + "\n";
  out += "sup |H|         " + fmt("%.3e", rep.sup_H) + "\n";
  out += "c0              " + fmt("%.9f", rep.c0) + "\n";
  out += "max asymmetry   " + fmt("%.3e", rep.max_asymmetry) + "\n";
  out += "jacobi          ";
  for (size_t k = 0; k < rep.jacobi_spectrum.size(); ++k) out += (k ? " " : "") + fmt("%.6f", rep.jacobi_spectrum[k]);
  out += "\nclassification  " + to_string(rep.classification) + "\n";
  if (!rep.hint.empty()) out += "hint            " + rep.hint + "\n";
  for (const auto& m : r.mismatches) out += "MISMATCH        " + m + "\n";
  return out;
}

nlohmann::json analysis_record(const Scenario& sc, const AnalyzeResult& r) {
  const StabilityReport& rep = r.report;
  nlohmann::json j;
  j["scenario"] = sc.id;
  j["nodes"] = rep.nodes.size();
  j["c0"] = rep.c0;
  j["sup_H"] = rep.sup_H;
  j["max_asymmetry"] = rep.max_asymmetry;
  j["jacobi_spectrum"] = rep.jacobi_spectrum;
  j["classification"] = to_string(rep.classification);
  j["mismatches"] = r.mismatches;
  nlohmann::json expected = nlohmann::json::array();
  for (const auto& e : sc.expected)
    expected.push_back({{"name", e.name}, {"value", e.value}, {"tolerance", e.tolerance}, {"provenance", e.provenance}});
  j["expected"] = expected;
  if (!rep.nodes.empty()) {
    const Mat& W = rep.nodes.front().W;
    std::vector<std::vector<double>> w(W.rows(), std::vector<double>(W.cols()));
    for (int a = 0; a < W.rows(); ++a)
      for (int b = 0; b < W.cols(); ++b) w[a][b] = W(a, b);
    j["margin_matrix_s0"] = w;
  }
  return j;
}

std::string format_probe(const Scenario& sc, const ProbeReport& r) {
  std::string out;
  out += "scenario        " + sc.id + "\n";
  out += "radius          " + fmt("%.4g", r.radius) + " (inner " + fmt("%.4g", r.inner_radius) + ")\n";
  out += "samples         " + std::to_string(r.samples) + " (skipped " + std::to_string(r.skipped) + ")\n";
  out += "violations      " + std::to_string(r.violations) + "\n";
  out += "min ratio       " + fmt("%.6f", r.min_ratio) + "\n";
  out += "worst at        s = " + fmt("%.4f", r.worst.point.s) + ", psi = " + fmt("%.4e", r.worst.point.psi) +
         ", fs = " + fmt("%.4f", r.worst.fs) + "\n";
  return out;
}

nlohmann::json probe_record(const Scenario& sc, const ProbeReport& r) {
  return {{"scenario", sc.id},          {"radius", r.radius},         {"inner_radius", r.inner_radius},
          {"samples", r.samples},       {"skipped", r.skipped},       {"violations", r.violations},
          {"min_ratio", r.min_ratio},   {"worst_s", r.worst.point.s}, {"worst_psi", r.worst.point.psi},
          {"worst_fs", r.worst.fs}};
}

namespace {

using g2::Frame7;
using g2::Vec7;

Vec7 gaussian7(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vec7 v;
  for (int i = 0; i < 7; ++i) v[i] = nd(rng);
  return v;
}

// Basis of the Lie algebra of G2 (skew A with A . phi = 0) as 21-vectors.
Eigen::MatrixXd g2_algebra() {
  const auto& g = g2::model();
  Eigen::MatrixXd C(343, 21);
  int col = 0;
  for (int p = 0; p < 7; ++p)
    for (int q = p + 1; q < 7; ++q, ++col) {
      for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 7; ++b)
          for (int c = 0; c < 7; ++c) {
            // A e_p = -e_q and A e_q = e_p for the generator of the (p, q) plane.
            double v = 0;
            int idx[3] = {a, b, c};
            for (int s = 0; s < 3; ++s) {
              int saved = idx[s];
              if (saved == q) {
                idx[s] = p;
                v += g.phi(idx[0], idx[1], idx[2]);
              } else if (saved == p) {
                idx[s] = q;
                v -= g.phi(idx[0], idx[1], idx[2]);
              }
              idx[s] = saved;
            }
            C((a * 7 + b) * 7 + c, col) = v;
          }
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10 * svd.singularValues()[0]) ++rank;
  return svd.matrixV().rightCols(21 - rank);
}

Frame7 skew_from(const Eigen::VectorXd& x) {
  Frame7 A = Frame7::Zero();
  int col = 0;
  for (int p = 0; p < 7; ++p)
    for (int q = p + 1; q < 7; ++q, ++col) {
      A(p, q) = x[col];
      A(q, p) = -x[col];
    }
  return A;
}

}  // namespace

std::vector<SuiteRow> g2_suite(int seeds) {
  const auto& g = g2::model();
  std::vector<SuiteRow> rows;
  auto add = [&](std::string name, double worst, double tol) { rows.push_back({std::move(name), worst, tol, worst < tol}); };

  std::mt19937_64 rng(1);
  double norm_id = 0, ortho = 0;
  for (int t = 0; t < seeds; ++t) {
    Vec7 x = gaussian7(rng), y = gaussian7(rng);
    Vec7 c = g.cross(x, y);
    double expect = x.squaredNorm() * y.squaredNorm() - std::pow(x.dot(y), 2);
    norm_id = std::max(norm_id, std::abs(c.squaredNorm() - expect) / std::max(1.0, expect));
    double scale = std::max(1.0, x.norm() * y.norm());
    ortho = std::max({ortho, std::abs(c.dot(x)) / (scale * x.norm()), std::abs(c.dot(y)) / (scale * y.norm()),
                      (c + g.cross(y, x)).norm() / scale});
  }
  add("cross |x*y|^2 = |x|^2|y|^2 - <x,y>^2", norm_id, 1e-12);
  add("cross orthogonal and antisymmetric", ortho, 1e-12);

  double ident = 0, sym = 0, ric = 0, rel = 0, enc = 0, q = 0;
  for (int t = 1; t <= seeds; ++t) {
    std::mt19937_64 r(static_cast<std::uint64_t>(t));
    g2::Curvature7 R = g2::random_curvature(r);
    g2::SecondForm h = g2::random_second_form(r);
    Vec7 v = Vec7::Zero();
    v.tail<3>() = gaussian7(r).head<3>().normalized();
    ident = std::max(ident, g2::curvature_identity_residual(R).max());
    sym = std::max(sym, g2::curvature_symmetry_residual(R));
    ric = std::max(ric, g2::ricci_residual(R));
    rel = std::max(rel, g2::coassociative_h_residual(h));
    enc = std::max(enc, g2::encapsulation_residual(h));
    q = std::max(q, g2::q_equals_qtilde(R, h, v).residual);
  }
  add("seven curvature identities on samples", ident, 1e-12);
  add("curvature symmetries and Bianchi on samples", sym, 1e-12);
  add("Ricci-flat samples", ric, 1e-10);
  add("coassociative relations on samples", rel, 1e-12);
  add("sum_j e_j x II(e_i, e_j) = 0 on samples", enc, 1e-12);
  add("Q - Q~ on constrained samples", q, 1e-9);

  const Eigen::MatrixXd alg = g2_algebra();
  std::mt19937_64 fr(2);
  std::uniform_real_distribution<double> ud(0, 2 * std::numbers::pi);
  std::normal_distribution<double> nd;
  double frame = alg.cols() == 14 ? 0 : 1;
  const Eigen::Matrix<double, 7, 4> model_plane = Frame7::Identity().leftCols<4>();
  for (int t = 0; t < seeds; ++t) {
    double th = ud(fr);
    Frame7 rot = Frame7::Identity();
    rot(0, 0) = rot(2, 2) = std::cos(th);
    rot(0, 2) = -std::sin(th);
    rot(2, 0) = std::sin(th);
    Eigen::VectorXd c(alg.cols());
    for (int i = 0; i < c.size(); ++i) c[i] = nd(fr);
    Frame7 G = skew_from(alg * c).exp();
    Eigen::Matrix<double, 7, 4> L = G * rot * model_plane;
    Vec7 n = G * (std::cos(th) * Vec7::Unit(4) + std::sin(th) * Vec7::Unit(6));
    Frame7 f = g2::coassoc_frame(L, n, L.col(1));
    frame = std::max({frame, g2::model_form_residual(f), (f.transpose() * f - Frame7::Identity()).norm()});
  }
  add("coassociative frame reconstruction", frame, 1e-10);

  bool dims = g2::curvature_kernel_dimension() == 77 && g2::second_form_kernel_dimension() == 15;
  rows.push_back({"constraint kernels have dimensions 77 and 15", dims ? 0.0 : 1.0, 0.5, dims});
  return rows;
}

std::string format_suite(const std::vector<SuiteRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s  %-48s worst %.3e  tol %.0e\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                  r.worst, r.tolerance);
    out += buf;
  }
  return out;
}

}  // namespace stableflow
