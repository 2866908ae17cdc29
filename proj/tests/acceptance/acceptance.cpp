// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hhlimit/decomposition.hpp"
#include "hhlimit/deterministic.hpp"
#include "hhlimit/harness.hpp"
#include "hhlimit/rng.hpp"

using namespace hhlimit;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt_num(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Moments {
  double mean = 0.0, variance = 0.0, se = 0.0;
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v / n;
  for (double v : x) m.variance += (v - m.mean) * (v - m.mean) / (n - 1.0);
  m.se = std::sqrt(m.variance / n);
  return m;
}

double median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

double inner_l2(const GridFunction& a, const GridFunction& b) {
  const double p = l2_norm(a + b), m = l2_norm(a - b);
  return 0.25 * (p * p - m * m);
}

GridFunction mode_fn(const Grid& g, int k) {
  return GridFunction::sample(g, [&](double x) { return dirichlet_mode(k, g.half_length(), x); });
}

std::vector<GridFunction> identity_test_functions(const Grid& g) {
  std::vector<GridFunction> out = {mode_fn(g, 1), mode_fn(g, 2)};
  CounterRng rng(0xACCE);
  for (int q = 0; q < 3; ++q) {
    GridFunction f(g);
    for (double& v : f.values()) v = 2.0 * rng.uniform() - 1.0;
    out.push_back(f);
  }
  return out;
}

/// Largest |<f, residual>| of the decomposition identity over states, samples and test functions.
double identity_residual(const StochTrajectory& tr, const DetTrajectory& det, const ChannelKinetics& k,
                         const std::vector<GridFunction>& fns) {
  const ChannelDecomposition d = decompose(tr, k);
  const MartingaleSeries M = martingale_series(d, tr.grid);
  const auto drift = integrated_drift(d, det, tr.grid);
  const auto dev = empirical_deviation(d, det, tr.grid);
  double worst = 0.0;
  for (int xi = 0; xi < d.state_count; ++xi)
    for (std::size_t s = 0; s < d.sample_count(); ++s) {
      const Functional r = dev[xi][s] - dev[xi][0] - drift[xi][s] - M.values[xi][s];
      for (const GridFunction& f : fns) worst = std::max(worst, std::abs(pairing(f, r)));
    }
  return worst;
}

double worst_identity = 0.0;
std::size_t identity_runs = 0;

// ---------------------------------------------------------------------------

void criterion1() {
  Stopwatch sw;
  const Grid g(1.0, 2000);
  const double delta = hminus1_norm(delta_functional(0.0, g));
  const double delta_exact = std::sqrt(std::tanh(1.0) / 2.0);
  NodalField phi(g);
  for (int j = 0; j <= g.cells(); ++j) phi.values()[j] = dirichlet_mode(1, 1.0, g.node(j));
  const double mode = hminus1_norm(density_functional(phi));
  const double mode_exact = 1.0 / std::sqrt(1.0 + std::numbers::pi * std::numbers::pi / 4.0);
  const double secs = sw.seconds();
  const bool ok = std::abs(delta - delta_exact) <= 1e-3 && std::abs(mode - mode_exact) <= 1e-3 && secs < 1.0;
  report(1, ok, "Sobolev oracle",
         "delta " + fmt_num("%.6f", delta) + " vs " + fmt_num("%.6f", delta_exact) + ", mode " +
             fmt_num("%.6f", mode) + " vs " + fmt_num("%.6f", mode_exact) + ", " + fmt_num("%.3f", secs) + " s");
}

void criterion2() {
  Stopwatch sw;
  KineticsSpec s;
  s.states = {{"closed", 0.0, -0.2}, {"open", 0.0, 1.0}};
  s.rates = {{"closed", "open", RateForm::constant(0.5)}, {"open", "closed", RateForm::constant(0.5)}};
  s.alpha_min = 0.01;
  s.alpha_max = 10.0;
  const ChannelKinetics k = make_kinetics(s);
  const double T = 0.5;
  auto error = [&](int cells, double dt) {
    const Grid g(1.0, cells);
    const DeterministicState init{0.0, mode_fn(g, 1), {NodalField(g, 0.5), NodalField(g, 0.5)}};
    const DetTrajectory tr = run_det(init, T, dt, k);
    const double decay = std::exp(-std::numbers::pi * std::numbers::pi / 4.0 * T);
    const GridFunction exact = GridFunction::sample(g, [&](double x) { return decay * dirichlet_mode(1, 1.0, x); });
    return l2_norm(tr.states.back().v - exact) / l2_norm(exact);
  };
  const double e1 = error(400, 1e-3), e2 = error(800, 5e-4);
  const double ratio = e1 / e2;
  const double secs = sw.seconds();
  report(2, e1 <= 1e-3 && ratio >= 3.0 && ratio <= 5.0 && secs < 10.0, "PDE vs heat kernel",
         "rel L2 " + fmt_num("%.3e", e1) + ", halved " + fmt_num("%.3e", e2) + ", ratio " + fmt_num("%.3f", ratio) +
             ", " + fmt_num("%.2f", secs) + " s");
}

void criterion3() {
  const Scenario sc = build_scenario(default_config());
  DetRunOptions opt;
  const DetTrajectory tr = run_det(sc.det_init, sc.horizon, sc.dt, sc.kinetics, opt);
  double mass = 0.0, vmin = 0.0, vmax = 0.0;
  for (const DeterministicState& st : tr.states)
    for (int j = 0; j <= sc.grid.cells(); ++j) {
      double sum = 0.0;
      for (const NodalField& p : st.p) sum += p.values()[j];
      mass = std::max(mass, std::abs(sum - 1.0));
      const double v = st.v.at_node(j);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  double v0min = 0.0, v0max = 0.0;
  for (double v : sc.det_init.v.values()) {
    v0min = std::min(v0min, v);
    v0max = std::max(v0max, v);
  }
  const double lo = std::min(sc.kinetics.v_minus(), v0min) - 1e-8;
  const double hi = std::max(sc.kinetics.v_plus(), v0max) + 1e-8;
  report(3, mass <= 1e-12 && vmin >= lo && vmax <= hi, "conservation and potential band",
         "mass error " + fmt_num("%.2e", mass) + ", v in [" + fmt_num("%.5f", vmin) + ", " + fmt_num("%.5f", vmax) +
             "] within [" + fmt_num("%.5f", lo) + ", " + fmt_num("%.5f", hi) + "]");
}

// Replays every run of the default sweep, checking the dissipation inequality
// at each sample and the decomposition identity on each path.
void criterion4_and_sweep_identity() {
  const RunConfig cfg = default_config();
  const Scenario sc = build_scenario(cfg);
  const DetTrajectory det = run_reference(sc);
  const std::vector<GridFunction> fns = identity_test_functions(sc.grid);
  const double l = sc.grid.half_length();
  const double c_max = sc.kinetics.max_conductance(), v_max = sc.kinetics.max_abs_potential();

  auto check = [&](const std::vector<double>& times, const std::vector<GridFunction>& snaps,
                   const std::vector<double>& dissipation, const std::vector<double>& bound, double& slack) {
    bool ok = true;
    const double s0 = l2_norm(snaps.front());
    double S = 0.0;
    for (std::size_t s = 0; s < times.size(); ++s) {
      S = std::max(S, sup_norm(snaps[s]));
      // The recorded bound uses the sup over every step, which dominates the sampled sup.
      const double sampled = s0 * s0 + l * (times[s] - times.front()) * c_max * S * (S + v_max);
      ok = ok && dissipation[s] <= bound[s] && bound[s] >= sampled * (1.0 - 1e-12);
      slack = std::min(slack, bound[s] - dissipation[s]);
    }
    return ok;
  };

  double slack = 1e300;
  std::vector<GridFunction> det_snaps;
  for (const auto& st : det.states) det_snaps.push_back(st.v);
  bool ok = check(det.times, det_snaps, det.dissipation, det.dissipation_bound, slack);
  std::size_t runs = 0;
  for (int N : cfg.n_values)
    for (int r = 0; r < cfg.replicates; ++r) {
      const std::uint64_t seed = replicate_seed(cfg.seed, N, r);
      StochRunOptions opt;
      opt.sample_stride = sc.sample_stride;
      const StochTrajectory tr =
          run_stoch(make_stoch_init(sc, N, cfg.init_mode, seed), sc.horizon, sc.dt, sc.kinetics, seed, opt);
      ok = check(tr.sample_times, tr.snapshots, tr.dissipation, tr.dissipation_bound, slack) && ok;
      worst_identity = std::max(worst_identity, identity_residual(tr, det, sc.kinetics, fns));
      ++identity_runs;
      ++runs;
    }
  report(4, ok, "dissipation bound on the reference and every sweep run",
         std::to_string(runs) + " stochastic runs + 1 deterministic, min slack " + fmt_num("%.4f", slack));
}

void criterion5_and_identity() {
  Stopwatch sw;
  RunConfig cfg = default_config();
  cfg.horizon = 1.0;
  cfg.sample_stride = 1 << 30;
  const Scenario sc = build_scenario(cfg);
  const DetTrajectory det = run_reference(sc);
  const int N = 100, R = 2000;
  const GridFunction phi = mode_fn(sc.grid, 1);
  const std::vector<GridFunction> fns = identity_test_functions(sc.grid);
  std::vector<std::vector<double>> pair(2), pred(2);
  StochRunOptions opt;
  opt.sample_stride = sc.sample_stride;
  for (int r = 0; r < R; ++r) {
    const std::uint64_t seed = derive_key(0x5EED5, static_cast<std::uint64_t>(r));
    const StochTrajectory tr =
        run_stoch(make_stoch_init(sc, N, InitMode::stratified, seed), cfg.horizon, sc.dt, sc.kinetics, seed, opt);
    const ChannelDecomposition d = decompose(tr, sc.kinetics);
    const std::size_t last = d.sample_count() - 1;
    for (int xi = 0; xi < 2; ++xi) {
      pair[xi].push_back(martingale_pairing(d, phi, xi, last));
      pred[xi].push_back(predicted_variance(d, phi, xi, last));
    }
    worst_identity = std::max(worst_identity, identity_residual(tr, det, sc.kinetics, fns));
    ++identity_runs;
  }
  const double bound = 8.0 * sc.grid.half_length() * sc.kinetics.alpha_max() * std::pow(sup_norm(phi), 2) * cfg.horizon / N;
  bool ok = true;
  std::string detail;
  for (int xi = 0; xi < 2; ++xi) {
    const Moments m = moments(pair[xi]);
    const double predicted = moments(pred[xi]).mean;
    std::vector<double> sq;
    for (double v : pair[xi]) sq.push_back(v * v);
    const Moments second = moments(sq);
    const bool a = std::abs(m.mean) <= 3.0 * m.se;
    const double rel = std::abs(m.variance - predicted) / predicted;
    const bool b = rel <= 0.15;
    const bool c = second.mean <= bound + 3.0 * second.se;
    ok = ok && a && b && c;
    detail += sc.kinetics.state(xi).name + ": mean " + fmt_num("%.2e", m.mean) + " (3SE " + fmt_num("%.2e", 3 * m.se) +
              "), var " + fmt_num("%.4e", m.variance) + " vs " + fmt_num("%.4e", predicted) + " (" +
              fmt_num("%.1f", 100 * rel) + "%), E[M^2] " + fmt_num("%.3e", second.mean) + " <= " +
              fmt_num("%.3e", bound) + "; ";
  }
  const double secs = sw.seconds();
  ok = ok && secs < 300.0;
  report(5, ok, "martingale suite N=100 T=1 R=2000", detail + fmt_num("%.1f", secs) + " s");
}

void criterion6() {
  report(6, identity_runs > 0 && worst_identity <= 1e-10, "decomposition identity on every stochastic run",
         std::to_string(identity_runs) + " runs, worst residual " + fmt_num("%.2e", worst_identity));
}

void criterion7() {
  Stopwatch sw;
  const Scenario sc = build_scenario(default_config());
  KineticsSpec ref;
  ref.states = sc.kinetics.states();
  for (const StateSpec& a : ref.states)
    for (const StateSpec& b : ref.states)
      if (a.name != b.name) ref.rates.push_back({a.name, b.name, RateForm::constant(1.0)});
  ref.alpha_min = 0.01;
  ref.alpha_max = 10.0;
  const ChannelKinetics reference = make_kinetics(ref);
  ChannelConfig one;
  one.N = 1;
  one.lattice = {0};
  one.positions = {0.0};
  one.states = {0};
  StochRunOptions opt;
  opt.evolve_potential = false;
  opt.sample_stride = 1 << 30;
  const double total_rate = 1.0 * (reference.state_count() - 1);
  std::vector<double> weights;
  for (int q = 0; q < 10000; ++q) {
    const std::uint64_t seed = derive_key(0x11CE, static_cast<std::uint64_t>(q));
    const StochTrajectory tr = run_stoch({0.0, sc.det_init.v, one}, 2.0, 0.01, reference, seed, opt);
    weights.push_back(std::exp(path_log_likelihood(tr, sc.kinetics, total_rate)));
  }
  const Moments m = moments(weights);
  const double secs = sw.seconds();
  report(7, std::abs(m.mean - 1.0) <= 3.0 * m.se && secs < 30.0, "likelihood identity, 1e4 reference paths",
         "E[h] " + fmt_num("%.4f", m.mean) + " +- " + fmt_num("%.4f", m.se) + ", " + fmt_num("%.2f", secs) + " s");
}

std::string masked_body(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  std::string line, out;
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string f; std::getline(hs, f, ',');) header.push_back(f);
  const auto wall = std::find(header.begin(), header.end(), "wall_ms") - header.begin();
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string f;
    for (long c = 0; std::getline(ls, f, ','); ++c) out += (c ? "," : "") + (c == wall ? std::string("*") : f);
    out += '\n';
  }
  return out;
}

void criterion8_and_10() {
  const RunConfig cfg = default_config();
  const auto root = std::filesystem::temp_directory_path() / "hhlimit_acceptance";
  std::filesystem::remove_all(root);

  Stopwatch sw;
  SweepOptions opt;
  opt.workers = 1;
  const SweepResult first = run_sweep(cfg, opt);
  const double secs = sw.seconds();
  write_sweep(first, cfg, root / "a");

  std::size_t aborted = 0;
  std::vector<double> l2_med, hm1_med;
  std::vector<int> ns;
  for (int N : cfg.n_values) {
    std::vector<double> l2, hm1;
    for (const ResultRow& r : first.rows) {
      if (r.N != N) continue;
      if (r.status != "ok") {
        ++aborted;
        continue;
      }
      l2.push_back(r.metrics.dev_l2);
      hm1.push_back(*std::max_element(r.metrics.dev_hm1.begin(), r.metrics.dev_hm1.end()));
    }
    ns.push_back(N);
    l2_med.push_back(median(l2));
    hm1_med.push_back(median(hm1));
  }
  bool decreasing = true;
  for (std::size_t q = 1; q < ns.size(); ++q)
    decreasing = decreasing && l2_med[q] < l2_med[q - 1] && hm1_med[q] < hm1_med[q - 1];
  // Least squares of log median against log N.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(ns.size());
  for (std::size_t q = 0; q < ns.size(); ++q) {
    const double x = std::log(ns[q]), y = std::log(l2_med[q]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double lib_slope = fit_rate(read_results_csv(root / "a" / "results.csv"), "dev_l2").slope;
  std::string meds;
  for (std::size_t q = 0; q < ns.size(); ++q)
    meds += std::to_string(ns[q]) + ":" + fmt_num("%.4f", l2_med[q]) + "/" + fmt_num("%.4f", hm1_med[q]) + " ";
  const bool ok8 = decreasing && aborted == 0 && slope >= -0.75 && slope <= -0.30 &&
                   std::abs(slope - lib_slope) <= 1e-9 && secs <= 1800.0;
  report(8, ok8, "convergence study, medians L2/H-1 by N",
         meds + "slope " + fmt_num("%.3f", slope) + ", aborted " + std::to_string(aborted) + ", " +
             fmt_num("%.1f", secs) + " s");

  opt.workers = 1;
  write_sweep(run_sweep(cfg, opt), cfg, root / "b");
  opt.workers = 4;
  write_sweep(run_sweep(cfg, opt), cfg, root / "c");
  const std::string a = masked_body(root / "a" / "results.csv");
  const std::string b = masked_body(root / "b" / "results.csv");
  const std::string c = masked_body(root / "c" / "results.csv");
  const bool ok10 = !a.empty() && a == b && a == c;
  report(10, ok10, "reproducible results.csv bodies (wall_ms masked)",
         std::to_string(std::count(a.begin(), a.end(), '\n')) + " rows compared across 3 sweeps, 1 and 4 workers");
  std::filesystem::remove_all(root);
}

void criterion9() {
  Stopwatch sw;
  const int N = 200, R = 1000;
  // Independent replicate sets at the two step sizes, so the two means are independent estimates.
  auto final_pairings = [&](double dt_scale, std::uint64_t base) {
    RunConfig cfg = default_config();
    cfg.dt *= dt_scale;
    cfg.sample_stride = 1 << 30;
    const Scenario sc = build_scenario(cfg);
    const GridFunction phi = mode_fn(sc.grid, 1);
    StochRunOptions opt;
    opt.sample_stride = sc.sample_stride;
    opt.record_rate_history = false;
    std::vector<double> out;
    for (int r = 0; r < R; ++r) {
      const std::uint64_t seed = replicate_seed(base, N, r);
      const StochTrajectory tr =
          run_stoch(make_stoch_init(sc, N, cfg.init_mode, seed), cfg.horizon, sc.dt, sc.kinetics, seed, opt);
      out.push_back(inner_l2(phi, tr.snapshots.back()));
    }
    return out;
  };
  const Moments mc = moments(final_pairings(1.0, 0xD7)), mf = moments(final_pairings(0.5, 0xD8));
  const double shift = mc.mean - mf.mean;
  const double se = std::sqrt(mc.se * mc.se + mf.se * mf.se);
  report(9, std::abs(shift) <= 3.0 * se, "weak self-convergence under dt halving, N=200 R=1000",
         "mean " + fmt_num("%.6f", mc.mean) + " vs " + fmt_num("%.6f", mf.mean) + ", shift " + fmt_num("%.2e", shift) +
             ", SE " + fmt_num("%.2e", se) + ", " + fmt_num("%.1f", sw.seconds()) + " s");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> steps = {
      {"1", criterion1}, {"2", criterion2}, {"3", criterion3}, {"4", criterion4_and_sweep_identity},
      {"5", criterion5_and_identity}, {"6", criterion6}, {"7", criterion7}, {"8/10", criterion8_and_10},
      {"9", criterion9}};
  for (const auto& [name, fn] : steps) {
    try {
      fn();
    } catch (const std::exception& e) {
      std::printf("[FAIL] criterion %s: threw %s\n", name, e.what());
      ++failures;
    }
  }
  std::printf("%s: %d failure(s)\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failures);
  return failures ? 1 : 0;
}
