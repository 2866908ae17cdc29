#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hhlimit/decomposition.hpp"
#include "hhlimit/harness.hpp"
#include "hhlimit/validation.hpp"

namespace fs = std::filesystem;
using namespace hhlimit;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  bool refine = false;
};

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  validate_config(cfg);
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

int cmd_det(const Common& c) {
  const RunConfig cfg = resolve_config(c);
  const Scenario sc = build_scenario(cfg, c.refine);
  const DetTrajectory traj = run_reference(sc);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "det_trajectory.csv");
    write_det_trajectory_csv(traj, sc.kinetics, out);
  }
  {
    auto out = open_out(dir / "det_summary.csv");
    write_det_summary_csv(traj, out);
  }
  nlohmann::json man = {{"software", "hhlimit"},
                        {"version", kSoftwareVersion},
                        {"config_digest", config_digest(cfg)},
                        {"config", to_json(cfg)},
                        {"refine", c.refine},
                        {"samples", traj.times.size()},
                        {"sup_potential", traj.sup_potential},
                        {"min_potential", traj.min_potential},
                        {"max_potential", traj.max_potential},
                        {"sup_gradient", traj.sup_gradient},
                        {"max_mass_error", traj.max_mass_error},
                        {"final_dissipation", traj.dissipation.back()},
                        {"final_dissipation_bound", traj.dissipation_bound.back()}};
  open_out(dir / "manifest.json") << man.dump(2) << '\n';
  fmt::print("det: {} samples to t={} written to {}\n", traj.times.size(), traj.times.back(), dir.string());
  return 0;
}

int cmd_stoch(const Common& c, int N) {
  const RunConfig cfg = resolve_config(c);
  const Scenario sc = build_scenario(cfg, c.refine);
  const ChannelKinetics& k = sc.kinetics;
  const std::uint64_t seed = replicate_seed(cfg.seed, N, 0);
  const StochasticState init = make_stoch_init(sc, N, cfg.init_mode, seed);
  StochRunOptions opt;
  opt.sample_stride = sc.sample_stride;
  const StochTrajectory traj = run_stoch(init, sc.horizon, sc.dt, k, seed, opt);
  const DetTrajectory det = run_reference(sc);
  const DeviationMetrics m = deviation_metrics(traj, det, k);

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "potential.csv");
    write_potential_csv(traj, out);
  }
  {
    auto out = open_out(dir / "jumps.csv");
    write_jumps_csv(traj, k, out);
  }

  const ChannelDecomposition d = decompose(traj, k);
  const MartingaleSeries mart = martingale_series(d, sc.grid);
  {
    auto out = open_out(dir / "martingale_hm1.csv");
    out << "t";
    for (const StateSpec& s : k.states()) out << ",M_" << s.name;
    out << '\n';
    for (std::size_t q = 0; q < mart.times.size(); ++q) {
      fmt::print(out, "{:.17g}", mart.times[q]);
      for (int xi = 0; xi < k.state_count(); ++xi) fmt::print(out, ",{:.17g}", hminus1_norm(mart.values[xi][q]));
      out << '\n';
    }
  }
  const GridFunction phi =
      GridFunction::sample(sc.grid, [&](double x) { return dirichlet_mode(1, sc.grid.half_length(), x); });
  nlohmann::json diag = nlohmann::json::array();
  const std::size_t last = d.sample_count() - 1;
  for (int xi = 0; xi < k.state_count(); ++xi)
    diag.push_back({{"state", k.state(xi).name},
                    {"phi1_pairing", martingale_pairing(d, phi, xi, last)},
                    {"predicted_variance", predicted_variance(d, phi, xi, last)},
                    {"variance_bound", martingale_variance_bound(phi, sc.horizon, N, sc.grid.half_length(), k)},
                    {"sup_hm1", m.mart_hm1[xi]},
                    {"sup_deviation_hm1", m.dev_hm1[xi]}});
  open_out(dir / "decomposition.json") << nlohmann::json{{"t", sc.horizon}, {"states", diag}}.dump(2) << '\n';

  nlohmann::json man = {{"software", "hhlimit"},
                        {"version", kSoftwareVersion},
                        {"config_digest", config_digest(cfg)},
                        {"config", to_json(cfg)},
                        {"N", N},
                        {"seed", seed},
                        {"channels", traj.channel_count()},
                        {"jumps", traj.jumps.size()},
                        {"sup_potential", traj.sup_potential},
                        {"dev_l2", m.dev_l2},
                        {"dev_h10", m.dev_h10}};
  open_out(dir / "manifest.json") << man.dump(2) << '\n';
  fmt::print("stoch: N={} channels={} jumps={} dev_l2={:.6g} written to {}\n", N, traj.channel_count(),
             traj.jumps.size(), m.dev_l2, dir.string());
  return 0;
}

int cmd_sweep(const Common& c) {
  const RunConfig cfg = resolve_config(c);
  SweepOptions opt;
  opt.workers = c.workers;
  opt.refine = c.refine;
  const SweepResult res = run_sweep(cfg, opt);
  write_sweep(res, cfg, cfg.output_dir);
  std::size_t aborted = res.manifest["aborted_rows"].get<std::size_t>();
  fmt::print("sweep: {} rows ({} aborted) written to {}\n", res.rows.size(), aborted, cfg.output_dir);
  if (res.manifest["fits"].contains("dev_l2"))
    fmt::print("dev_l2 slope {:.4f} (heuristic band [-0.75, -0.30])\n",
               res.manifest["fits"]["dev_l2"]["slope"].get<double>());
  return 0;
}

int cmd_validate(const std::string& suite, const Common& c) {
  const ValidationReport rep = run_validation_suite(suite, c.seed.value_or(suite == "likelihood" ? 11 : 7));
  rep.print(std::cout);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    open_out(fs::path(c.out) / ("validate_" + suite + ".json")) << rep.to_json().dump(2) << '\n';
  }
  return rep.passed() ? 0 : 1;
}

int cmd_fit(const std::string& results, const std::string& metric) {
  const ResultsTable table = read_results_csv(fs::path(results));
  const RateFit fit = fit_rate(table, metric);
  fmt::print("N,median_{}\n", metric);
  for (std::size_t q = 0; q < fit.n_values.size(); ++q) fmt::print("{},{:.17g}\n", fit.n_values[q], fit.medians[q]);
  fmt::print("slope={:.6f} intercept={:.6f} residual={:.6f}\n", fit.slope, fit.intercept, fit.residual);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid stochastic/deterministic axon simulator"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--seed", common.seed, "base seed");
    sub->add_option("--workers", common.workers, "worker threads (0 = all cores)");
    sub->add_flag("--refine", common.refine, "double the grid cells and halve dt");
  };

  auto* det = app.add_subcommand("det", "run the deterministic system");
  add_common(det);
  int N = 100;
  auto* stoch = app.add_subcommand("stoch", "run one stochastic trajectory");
  add_common(stoch);
  stoch->add_option("-N,--channels-per-unit", N, "channel scale N")->check(CLI::PositiveNumber);
  auto* sweep = app.add_subcommand("sweep", "run the convergence sweep");
  add_common(sweep);
  std::string suite;
  auto* validate = app.add_subcommand("validate", "run an oracle suite");
  add_common(validate);
  validate->add_option("suite", suite, "kernel | norms | martingale | likelihood")
      ->required()
      ->check(CLI::IsMember({"kernel", "norms", "martingale", "likelihood"}));
  std::string results, metric = "dev_l2";
  auto* fit = app.add_subcommand("fit", "fit log(median) against log N");
  fit->add_option("results", results, "results.csv")->required()->check(CLI::ExistingFile);
  fit->add_option("--metric", metric, "metric column");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*det) return cmd_det(common);
    if (*stoch) return cmd_stoch(common, N);
    if (*sweep) return cmd_sweep(common);
    if (*validate) return cmd_validate(suite, common);
    if (*fit) return cmd_fit(results, metric);
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
