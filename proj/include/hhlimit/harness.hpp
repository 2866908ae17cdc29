#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hhlimit/decomposition.hpp"
#include "hhlimit/deterministic.hpp"
#include "hhlimit/initial_conditions.hpp"
#include "hhlimit/kinetics.hpp"
#include "hhlimit/stochastic.hpp"

namespace hhlimit {

inline constexpr const char* kSoftwareVersion = "1.0.0";

struct RunConfig {
  double half_length = 1.0;
  double horizon = 2.0;
  int cells = 200;
  double dt = 1e-3;
  KineticsSpec kinetics;
  PotentialInit v0;
  ProportionInit p0;
  std::vector<int> n_values;
  int replicates = 16;
  std::uint64_t seed = 20240601;
  std::string output_dir = "out";
  InitMode init_mode = InitMode::stratified;
  int sample_stride = 10;
};

/// The shipped two-state scenario with the N sweep 25..800 and 16 replicates.
RunConfig default_config();
KineticsSpec default_kinetics();

/// Rejects nonpositive sizes, a non-increasing N list, v0 outside
/// [v_-, v_+] and p0 off the simplex.
void validate_config(const RunConfig& cfg);

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);
/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_digest(const RunConfig& cfg);

/// Grid, kinetics and initial data built from a config, with (M, 1/dt)
/// doubled when `refine` is set.
struct Scenario {
  Grid grid;
  ChannelKinetics kinetics;
  double horizon;
  double dt;
  int sample_stride;
  DeterministicState det_init;
};

Scenario build_scenario(const RunConfig& cfg, bool refine = false);

DetTrajectory run_reference(const Scenario& sc);
StochasticState make_stoch_init(const Scenario& sc, int N, InitMode mode, std::uint64_t seed);

struct DeviationMetrics {
  double dev_l2 = 0.0;                 ///< sup_t ||V - v||_L2
  double dev_h10 = 0.0;                ///< sup_t ||V - v||_H10
  std::vector<double> dev_hm1;         ///< per state: sup_t ||C_xi - mu p_xi||_H-1
  std::vector<double> mart_hm1;        ///< per state: sup_t ||M_xi||_H-1
  double wall_ms = 0.0;
};

/// Sup over the shared sample times. Throws when the sample times differ.
DeviationMetrics deviation_metrics(const StochTrajectory& stoch, const DetTrajectory& det, const ChannelKinetics& k);

/// Seed of replicate r at channel scale N.
std::uint64_t replicate_seed(std::uint64_t base, int N, int replicate);

struct ResultRow {
  int N = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  DeviationMetrics metrics;
  std::string status = "ok";
};

struct SweepOptions {
  int workers = 0;  ///< 0 selects the hardware concurrency
  bool refine = false;
};

struct SweepResult {
  std::vector<ResultRow> rows;  ///< sorted by (N, replicate)
  nlohmann::json manifest;
};

SweepResult run_sweep(const RunConfig& cfg, const SweepOptions& options = {});

std::vector<std::string> results_header(const std::vector<std::string>& state_names);
void write_results_csv(const std::vector<ResultRow>& rows, const std::vector<std::string>& state_names,
                       std::ostream& out);
/// Writes results.csv and manifest.json into `dir` (created if missing).
void write_sweep(const SweepResult& result, const RunConfig& cfg, const std::filesystem::path& dir);

/// Parsed results.csv: header plus rows of raw fields.
struct ResultsTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;
};

ResultsTable read_results_csv(std::istream& in);
ResultsTable read_results_csv(const std::filesystem::path& path);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  ///< root mean square of the log residuals
  std::vector<int> n_values;
  std::vector<double> medians;
};

/// Least squares of log(median metric) against log N over rows with status ok.
/// Requires at least three distinct N.
RateFit fit_rate(const ResultsTable& table, const std::string& metric);
RateFit fit_rate(const std::vector<int>& n_values, const std::vector<double>& medians);

/// Per-N medians of one metric over rows with status ok.
std::vector<std::pair<int, double>> medians_by_n(const ResultsTable& table, const std::string& metric);

}  // namespace hhlimit
