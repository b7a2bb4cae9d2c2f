// stableflow: scenario analysis, flows and the acceptance runner.
//
// Exit codes: 0 ok, 1 a check or criterion failed, 2 usage error (bad
// arguments, unknown scenario, config parse error).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stableflow/harness/acceptance.hpp"
#include "stableflow/harness/report.hpp"
#include "stableflow/harness/scenario.hpp"

using namespace stableflow;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << text;
}

int analyze(const std::string& id, int nodes, const std::string& record) {
  Scenario sc = load_scenario(id);
  AnalyzeResult r = analyze_scenario(sc, nodes);
  if (record == "-") {
    std::cout << analysis_record(sc, r).dump(2) << "\n";
  } else {
    std::cout << format_analysis(sc, r);
    if (!record.empty()) write_text(record, analysis_record(sc, r).dump(2) + "\n");
  }
  return r.mismatches.empty() ? kOk : kFailed;
}

int flow(const std::string& id, const std::string& rep, double amp, int nodes, double t_final,
         const std::string& out) {
  Scenario sc = load_scenario(id);
  FlowConfig cfg = sc.flow;
  if (!rep.empty()) cfg.representation = parse_representation(rep);
  if (!std::isnan(amp)) cfg.perturbation.amplitude = amp;
  if (nodes > 0) cfg.nodes = nodes;
  if (t_final > 0) cfg.t_final = t_final;
  FlowTrace trace = sc.circle_radius > 0 ? run_free_flow(sc, cfg) : run_flow(sc.tube(), cfg);
  write_text(out, trace.to_csv());
  std::fprintf(stderr, "%s: %s after %ld steps (dt %.3e), t = %.4f\n", sc.id.c_str(), to_string(trace.reason).c_str(),
               trace.steps, trace.dt, trace.rows.empty() ? 0.0 : trace.rows.back().t);
  return kOk;
}

int g2_check(int seeds) {
  auto rows = g2_suite(seeds);
  std::cout << format_suite(rows);
  for (const auto& r : rows)
    if (!r.pass) return kFailed;
  return kOk;
}

int probe(const std::string& id, int samples, std::uint64_t seed, double radius, const std::string& record) {
  Scenario sc = load_scenario(id);
  TubularChart tc(sc.reference(1024), radius > 0 ? radius : sc.eps);
  ProbeReport r = hessian_psi_probe(tc, samples, seed);
  if (record == "-") {
    std::cout << probe_record(sc, r).dump(2) << "\n";
  } else {
    std::cout << format_probe(sc, r);
    if (!record.empty()) write_text(record, probe_record(sc, r).dump(2) + "\n");
  }
  return r.violations == 0 ? kOk : kFailed;
}

int accept(const std::vector<int>& only) {
  int threads = threads_from_env();
  auto results = run_acceptance(only, threads, [](const CriterionResult& r) {
    std::cout << format_result(r) << std::endl;
  });
  int passed = 0;
  for (const auto& r : results) passed += r.pass;
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  return passed == static_cast<int>(results.size()) ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stableflow: stability of minimal geodesics and mean curvature flow near them"};
  app.require_subcommand(1);

  std::string scenario, rep, record, out;
  int nodes = 0, seeds = 1000, samples = 2000;
  double amp = std::nan(""), t_final = 0, radius = 0;
  std::uint64_t seed = 42;
  std::vector<int> only;

  auto* list_cmd = app.add_subcommand("list", "List builtin scenarios");

  auto* an = app.add_subcommand("analyze", "Strong-stability margin, Jacobi spectrum and classification");
  an->add_option("scenario", scenario, "Builtin id or config file")->required();
  an->add_option("--nodes", nodes, "Grid nodes along Sigma")->check(CLI::Range(16, 1 << 16));
  an->add_option("--record", record, "Write the JSON record to a file ('-': stdout only)");

  auto* fl = app.add_subcommand("flow", "Run mean curvature flow and print the monitor trace as CSV");
  fl->add_option("scenario", scenario, "Builtin id or config file")->required();
  fl->add_option("--rep", rep, "parametric, graphical or linearized")
      ->check(CLI::IsMember({"parametric", "graphical", "linearized"}));
  fl->add_option("--amp", amp, "Perturbation amplitude");
  fl->add_option("--nodes", nodes, "Grid nodes")->check(CLI::Range(16, 1 << 16));
  fl->add_option("--t-final", t_final, "Final time")->check(CLI::PositiveNumber);
  fl->add_option("--out", out, "CSV output file (default stdout)");

  auto* g2c = app.add_subcommand("g2-check", "G2 and coassociative identity suite");
  g2c->add_option("--seeds", seeds, "Random samples per check")->check(CLI::Range(1, 1000000));

  auto* hp = app.add_subcommand("hessian-probe", "Convexity of the squared distance in the tube");
  hp->add_option("scenario", scenario, "Builtin id or config file")->required();
  hp->add_option("--samples", samples, "Sampled (q, L) pairs")->check(CLI::Range(1, 10000000));
  hp->add_option("--seed", seed, "Sampling seed");
  hp->add_option("--radius", radius, "Tube radius (default: scenario)")->check(CLI::PositiveNumber);
  hp->add_option("--record", record, "Write the JSON record to a file ('-': stdout only)");

  auto* ac = app.add_subcommand("accept", "Run the acceptance criteria");
  ac->add_option("--only", only, "Criterion ids")->delimiter(',')->check(CLI::Range(1, kCriteria));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (list_cmd->parsed()) {
      for (const auto& id : builtin_scenario_ids()) std::cout << id << "\n";
      return kOk;
    }
    if (an->parsed()) return analyze(scenario, nodes > 0 ? nodes : 256, record);
    if (fl->parsed()) return flow(scenario, rep, amp, nodes, t_final, out);
    if (g2c->parsed()) return g2_check(seeds);
    if (hp->parsed()) return probe(scenario, samples, seed, radius, record);
    if (ac->parsed()) return accept(only);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::UnknownScenario:
      case ErrorCode::ConfigParse:
      case ErrorCode::InvalidArgument:
        return kUsage;
      default:
        return kFailed;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
