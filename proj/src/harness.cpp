#include "hhlimit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hhlimit/errors.hpp"

namespace hhlimit {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string status_for(const std::exception& e, const char* kind) {
  std::string msg = e.what();
  for (char& c : msg)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return fmt::format("aborted:{}:{}", kind, msg);
}

}  // namespace

KineticsSpec default_kinetics() {
  KineticsSpec spec;
  spec.states = {{"closed", 0.0, -0.2}, {"open", 1.0, 1.0}};
  spec.rates = {{"closed", "open", RateForm::sigmoid(0.05, 2.0, 4.0, 0.3)},
                {"open", "closed", RateForm::sigmoid(0.05, 1.0, -4.0, 0.3)}};
  spec.alpha_min = 0.05;
  spec.alpha_max = 5.0;
  return spec;
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.half_length = 1.0;
  cfg.horizon = 2.0;
  cfg.cells = 200;
  cfg.dt = 1e-3;
  cfg.kinetics = default_kinetics();
  cfg.v0 = PotentialInit{PotentialInit::Form::eigen, 1, 0.5, 0.0, 0.25};
  cfg.p0.form = ProportionInit::Form::uniform;
  cfg.p0.values = {0.7, 0.3};
  cfg.n_values = {25, 50, 100, 200, 400, 800};
  cfg.replicates = 16;
  cfg.seed = 20240601;
  cfg.output_dir = "out";
  cfg.init_mode = InitMode::stratified;
  cfg.sample_stride = 10;
  return cfg;
}

Scenario build_scenario(const RunConfig& cfg, bool refine) {
  const int cells = refine ? 2 * cfg.cells : cfg.cells;
  const double dt = refine ? 0.5 * cfg.dt : cfg.dt;
  const int stride = refine ? 2 * cfg.sample_stride : cfg.sample_stride;
  Grid grid(cfg.half_length, cells);
  ChannelKinetics k = make_kinetics(cfg.kinetics);
  DeterministicState init{0.0, make_potential(cfg.v0, grid), make_proportions(cfg.p0, grid, k.state_count())};
  return Scenario{grid, std::move(k), cfg.horizon, dt, stride, std::move(init)};
}

void validate_config(const RunConfig& cfg) {
  if (!(cfg.half_length > 0.0)) throw std::invalid_argument("half_length must be positive");
  if (!(cfg.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (cfg.cells < 2) throw std::invalid_argument("cells must be at least 2");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (cfg.replicates < 1) throw std::invalid_argument("replicates must be positive");
  if (cfg.sample_stride < 1) throw std::invalid_argument("sample_stride must be positive");
  for (std::size_t q = 0; q < cfg.n_values.size(); ++q) {
    if (cfg.n_values[q] < 1) throw std::invalid_argument("N values must be positive");
    if (q > 0 && cfg.n_values[q] <= cfg.n_values[q - 1])
      throw std::invalid_argument("N values must be strictly increasing");
  }
  const Scenario sc = build_scenario(cfg);
  const ChannelKinetics& k = sc.kinetics;
  for (double v : sc.det_init.v.values())
    if (v < k.v_minus() || v > k.v_plus()) throw std::invalid_argument("v0 must lie within [v_-, v_+]");
  validate_det_state(sc.det_init, k);
  if (cfg.dt > max_stoch_step(k) * (1.0 + 1e-12))
    throw std::invalid_argument(fmt::format("dt exceeds the rate-freezing guard {}", max_stoch_step(k)));
}

RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg = default_config();
  if (j.contains("half_length")) cfg.half_length = j.at("half_length").get<double>();
  if (j.contains("horizon")) cfg.horizon = j.at("horizon").get<double>();
  if (j.contains("cells")) cfg.cells = j.at("cells").get<int>();
  if (j.contains("dt")) cfg.dt = j.at("dt").get<double>();
  if (j.contains("kinetics")) cfg.kinetics = parse_kinetics(j.at("kinetics"));
  if (j.contains("v0")) cfg.v0 = parse_potential_init(j.at("v0"));
  if (j.contains("p0")) cfg.p0 = parse_proportion_init(j.at("p0"));
  if (j.contains("n_values")) cfg.n_values = j.at("n_values").get<std::vector<int>>();
  if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("init_mode")) {
    const std::string mode = j.at("init_mode").get<std::string>();
    if (mode == "stratified")
      cfg.init_mode = InitMode::stratified;
    else if (mode == "iid")
      cfg.init_mode = InitMode::iid;
    else
      throw std::invalid_argument("init_mode must be 'stratified' or 'iid'");
  }
  if (j.contains("sample_stride")) cfg.sample_stride = j.at("sample_stride").get<int>();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(nlohmann::json::parse(in));
}

nlohmann::json to_json(const RunConfig& cfg) {
  return {{"half_length", cfg.half_length},
          {"horizon", cfg.horizon},
          {"cells", cfg.cells},
          {"dt", cfg.dt},
          {"kinetics", to_json(cfg.kinetics)},
          {"v0", to_json(cfg.v0)},
          {"p0", to_json(cfg.p0)},
          {"n_values", cfg.n_values},
          {"replicates", cfg.replicates},
          {"seed", cfg.seed},
          {"output_dir", cfg.output_dir},
          {"init_mode", cfg.init_mode == InitMode::stratified ? "stratified" : "iid"},
          {"sample_stride", cfg.sample_stride}};
}

std::string config_digest(const RunConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

DetTrajectory run_reference(const Scenario& sc) {
  DetRunOptions opt;
  opt.sample_stride = sc.sample_stride;
  return run_det(sc.det_init, sc.horizon, sc.dt, sc.kinetics, opt);
}

StochasticState make_stoch_init(const Scenario& sc, int N, InitMode mode, std::uint64_t seed) {
  return StochasticState{sc.det_init.t, sc.det_init.v, init_channels(N, sc.det_init.p, mode, seed)};
}

DeviationMetrics deviation_metrics(const StochTrajectory& stoch, const DetTrajectory& det, const ChannelKinetics& k) {
  if (stoch.sample_times.size() != det.times.size()) throw std::invalid_argument("sample counts differ");
  DeviationMetrics m;
  for (std::size_t s = 0; s < det.times.size(); ++s) {
    if (std::abs(stoch.sample_times[s] - det.times[s]) > 1e-9 * std::max(1.0, std::abs(det.times[s])))
      throw std::invalid_argument("sample times differ");
    const GridFunction diff = stoch.snapshots[s] - det.states[s].v;
    m.dev_l2 = std::max(m.dev_l2, l2_norm(diff));
    m.dev_h10 = std::max(m.dev_h10, h10_norm(diff));
  }
  const ChannelDecomposition d = decompose(stoch, k);
  const auto emp = empirical_deviation(d, det, stoch.grid);
  const MartingaleSeries mart = martingale_series(d, stoch.grid);
  const int n = k.state_count();
  m.dev_hm1.assign(n, 0.0);
  m.mart_hm1.assign(n, 0.0);
  for (int xi = 0; xi < n; ++xi)
    for (std::size_t s = 0; s < d.sample_count(); ++s) {
      m.dev_hm1[xi] = std::max(m.dev_hm1[xi], hminus1_norm(emp[xi][s]));
      m.mart_hm1[xi] = std::max(m.mart_hm1[xi], hminus1_norm(mart.values[xi][s]));
    }
  return m;
}

std::uint64_t replicate_seed(std::uint64_t base, int N, int replicate) {
  return derive_key(derive_key(base, static_cast<std::uint64_t>(N)), static_cast<std::uint64_t>(replicate));
}

SweepResult run_sweep(const RunConfig& cfg, const SweepOptions& options) {
  validate_config(cfg);
  const Scenario sc = build_scenario(cfg, options.refine);
  const DetTrajectory det = run_reference(sc);
  const int n_states = sc.kinetics.state_count();

  struct Task {
    int N;
    int replicate;
  };
  std::vector<Task> tasks;
  for (int N : cfg.n_values)
    for (int r = 0; r < cfg.replicates; ++r) tasks.push_back({N, r});

  std::vector<ResultRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t q = next++; q < tasks.size(); q = next++) {
      ResultRow& row = rows[q];
      row.N = tasks[q].N;
      row.replicate = tasks[q].replicate;
      row.seed = replicate_seed(cfg.seed, row.N, row.replicate);
      const auto start = std::chrono::steady_clock::now();
      try {
        const StochasticState init = make_stoch_init(sc, row.N, cfg.init_mode, row.seed);
        StochRunOptions opt;
        opt.sample_stride = sc.sample_stride;
        const StochTrajectory traj = run_stoch(init, sc.horizon, sc.dt, sc.kinetics, row.seed, opt);
        row.metrics = deviation_metrics(traj, det, sc.kinetics);
        row.status = "ok";
      } catch (const InvariantViolation& e) {
        row.metrics = DeviationMetrics{};
        row.metrics.dev_l2 = row.metrics.dev_h10 = std::numeric_limits<double>::quiet_NaN();
        row.metrics.dev_hm1.assign(n_states, std::numeric_limits<double>::quiet_NaN());
        row.metrics.mart_hm1.assign(n_states, std::numeric_limits<double>::quiet_NaN());
        row.status = status_for(e, "invariant");
      } catch (const std::exception& e) {
        row.metrics = DeviationMetrics{};
        row.metrics.dev_l2 = row.metrics.dev_h10 = std::numeric_limits<double>::quiet_NaN();
        row.metrics.dev_hm1.assign(n_states, std::numeric_limits<double>::quiet_NaN());
        row.metrics.mart_hm1.assign(n_states, std::numeric_limits<double>::quiet_NaN());
        row.status = status_for(e, "error");
      }
      row.metrics.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
  };
  int workers = options.workers > 0 ? options.workers : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(tasks.size(), 1))));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(rows.begin(), rows.end(),
            [](const ResultRow& a, const ResultRow& b) { return std::tie(a.N, a.replicate) < std::tie(b.N, b.replicate); });

  std::vector<std::string> names;
  for (const StateSpec& s : sc.kinetics.states()) names.push_back(s.name);

  SweepResult result;
  result.rows = rows;
  nlohmann::json& man = result.manifest;
  man["software"] = "hhlimit";
  man["version"] = kSoftwareVersion;
  man["config_digest"] = config_digest(cfg);
  man["config"] = to_json(cfg);
  man["seed"] = cfg.seed;
  man["refine"] = options.refine;
  man["grid_cells"] = sc.grid.cells();
  man["dt"] = sc.dt;
  man["rows"] = rows.size();
  std::size_t aborted = 0;
  for (const ResultRow& r : rows) aborted += r.status != "ok";
  man["aborted_rows"] = aborted;

  std::ostringstream csv;
  write_results_csv(rows, names, csv);
  std::istringstream back(csv.str());
  const ResultsTable table = read_results_csv(back);
  nlohmann::json medians = nlohmann::json::object();
  nlohmann::json fits = nlohmann::json::object();
  for (std::size_t c = 3; c + 2 < table.header.size(); ++c) {
    const std::string& metric = table.header[c];
    for (const auto& [N, med] : medians_by_n(table, metric)) medians[std::to_string(N)][metric] = med;
    try {
      const RateFit fit = fit_rate(table, metric);
      fits[metric] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"residual", fit.residual}};
    } catch (const std::invalid_argument&) {
    }
  }
  man["medians"] = medians;
  man["fits"] = fits;
  man["slope_band"] = {{"metric", "dev_l2"},
                       {"range", {-0.75, -0.30}},
                       {"label", "heuristic: convergence in N is established without a rate"}};
  if (fits.contains("dev_l2")) {
    const double slope = fits["dev_l2"]["slope"].get<double>();
    man["slope_band"]["within"] = slope >= -0.75 && slope <= -0.30;
  }
  return result;
}

std::vector<std::string> results_header(const std::vector<std::string>& state_names) {
  std::vector<std::string> h = {"N", "replicate", "seed", "dev_l2", "dev_h10"};
  for (const auto& s : state_names) h.push_back("dev_hm1_" + s);
  for (const auto& s : state_names) h.push_back("mart_hm1_" + s);
  h.push_back("wall_ms");
  h.push_back("status");
  return h;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::vector<std::string>& state_names,
                       std::ostream& out) {
  const auto header = results_header(state_names);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (const ResultRow& r : rows) {
    fmt::print(out, "{},{},{},{:.17g},{:.17g}", r.N, r.replicate, r.seed, r.metrics.dev_l2, r.metrics.dev_h10);
    for (std::size_t s = 0; s < state_names.size(); ++s) fmt::print(out, ",{:.17g}", r.metrics.dev_hm1.at(s));
    for (std::size_t s = 0; s < state_names.size(); ++s) fmt::print(out, ",{:.17g}", r.metrics.mart_hm1.at(s));
    fmt::print(out, ",{:.3f},{}\n", r.metrics.wall_ms, r.status);
  }
}

void write_sweep(const SweepResult& result, const RunConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names;
  for (const StateSpec& s : cfg.kinetics.states) names.push_back(s.name);
  {
    std::ofstream out(dir / "results.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "results.csv").string());
    write_results_csv(result.rows, names, out);
  }
  std::ofstream man(dir / "manifest.json");
  if (!man) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
  man << result.manifest.dump(2) << '\n';
}

int ResultsTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return static_cast<int>(c);
  throw std::invalid_argument("no column named '" + name + "'");
}

ResultsTable read_results_csv(std::istream& in) {
  ResultsTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("results table is empty");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != t.header.size()) throw std::invalid_argument("malformed results row: " + line);
    t.rows.push_back(std::move(fields));
  }
  return t;
}

ResultsTable read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_results_csv(in);
}

std::vector<std::pair<int, double>> medians_by_n(const ResultsTable& table, const std::string& metric) {
  const int cn = table.column("N"), cm = table.column(metric), cs = table.column("status");
  std::map<int, std::vector<double>> groups;
  for (const auto& row : table.rows) {
    if (row[cs] != "ok") continue;
    groups[std::stoi(row[cn])].push_back(std::stod(row[cm]));
  }
  std::vector<std::pair<int, double>> out;
  for (auto& [N, values] : groups) out.emplace_back(N, median(values));
  return out;
}

RateFit fit_rate(const std::vector<int>& n_values, const std::vector<double>& medians) {
  if (n_values.size() != medians.size()) throw std::invalid_argument("N and median lists differ in length");
  std::vector<int> distinct = n_values;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw std::invalid_argument("rate fit needs at least three distinct N");
  RateFit fit;
  fit.n_values = n_values;
  fit.medians = medians;
  const std::size_t m = n_values.size();
  double sx = 0.0, sy = 0.0;
  std::vector<double> x(m), y(m);
  for (std::size_t q = 0; q < m; ++q) {
    if (!(medians[q] > 0.0) || n_values[q] < 1) throw std::invalid_argument("rate fit needs positive N and medians");
    x[q] = std::log(static_cast<double>(n_values[q]));
    y[q] = std::log(medians[q]);
    sx += x[q];
    sy += y[q];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t q = 0; q < m; ++q) {
    sxx += (x[q] - mx) * (x[q] - mx);
    sxy += (x[q] - mx) * (y[q] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t q = 0; q < m; ++q) {
    const double e = y[q] - (fit.intercept + fit.slope * x[q]);
    rss += e * e;
  }
  fit.residual = std::sqrt(rss / m);
  return fit;
}

RateFit fit_rate(const ResultsTable& table, const std::string& metric) {
  std::vector<int> ns;
  std::vector<double> meds;
  for (const auto& [N, med] : medians_by_n(table, metric)) {
    ns.push_back(N);
    meds.push_back(med);
  }
  return fit_rate(ns, meds);
}

}  // namespace hhlimit
