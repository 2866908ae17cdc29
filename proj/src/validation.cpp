#include "hhlimit/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hhlimit/decomposition.hpp"
#include "hhlimit/harness.hpp"
#include "hhlimit/heat_kernel.hpp"
#include "hhlimit/rng.hpp"

namespace hhlimit {

namespace {

CheckResult within(std::string name, double value, double target, double tol) {
  CheckResult c;
  c.name = std::move(name);
  c.value = value;
  c.target = target;
  c.passed = std::abs(value - target) <= tol;
  c.detail = fmt::format("|{:.6g} - {:.6g}| <= {:.3g}", value, target, tol);
  return c;
}

CheckResult at_most(std::string name, double value, double limit) {
  CheckResult c;
  c.name = std::move(name);
  c.value = value;
  c.target = limit;
  c.passed = value <= limit;
  c.detail = fmt::format("{:.6g} <= {:.6g}", value, limit);
  return c;
}

GridFunction mode(int k, const Grid& g) {
  return GridFunction::sample(g, [&](double x) { return dirichlet_mode(k, g.half_length(), x); });
}

}  // namespace

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void ValidationReport::print(std::ostream& out) const {
  for (const CheckResult& c : checks)
    fmt::print(out, "[{}] {}/{}: {}\n", c.passed ? "PASS" : "FAIL", suite, c.name, c.detail);
  fmt::print(out, "{}: {}\n", suite, passed() ? "all checks passed" : "FAILED");
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json j;
  j["suite"] = suite;
  j["passed"] = passed();
  j["checks"] = nlohmann::json::array();
  for (const CheckResult& c : checks)
    j["checks"].push_back(
        {{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"target", c.target}, {"detail", c.detail}});
  return j;
}

ValidationReport validate_kernel() {
  ValidationReport r{"kernel", {}};
  KernelParams params;
  const Grid g(1.0, 400);
  const GridFunction phi = mode(1, g);

  const double factor = std::exp(-std::numbers::pi * std::numbers::pi / 4.0 * 0.1);
  const GridFunction decayed = apply_semigroup(0.1, phi, params);
  r.checks.push_back(at_most("eigen_decay_t0.1", sup_norm(decayed - factor * phi), 1e-4));

  CounterRng rng(derive_key(1, 2));
  double asym = 0.0;
  for (int q = 0; q < 200; ++q) {
    const double t = 0.01 + rng.uniform();
    const double x = 2.0 * rng.uniform() - 1.0, y = 2.0 * rng.uniform() - 1.0;
    const double a = absorbed_kernel(t, x, y, params), b = absorbed_kernel(t, y, x, params);
    asym = std::max(asym, std::abs(a - b) / std::max(1.0, std::abs(a)));
  }
  r.checks.push_back(at_most("symmetry", asym, 1e-12));

  const GridFunction f =
      GridFunction::sample(g, [](double x) { return std::exp(-8.0 * x * x) - std::exp(-8.0); });
  const GridFunction twice = apply_semigroup(0.05, apply_semigroup(0.05, f, params), params);
  const GridFunction once = apply_semigroup(0.1, f, params);
  r.checks.push_back(at_most("chapman_kolmogorov", sup_norm(twice - once), 1e-5));

  double worst = 0.0;
  bool monotone = true;
  for (double x : {-0.9, -0.3, 0.0, 0.5}) {
    double prev = 1.0;
    for (double t : {0.01, 0.05, 0.1, 0.3, 1.0}) {
      const double s = survival_probability(t, x, params);
      worst = std::max(worst, s);
      monotone = monotone && s < prev;
      prev = s;
    }
  }
  r.checks.push_back(at_most("submarkov_mass", worst, 1.0));
  r.checks.push_back(at_most("mass_strictly_decreasing", monotone ? 0.0 : 1.0, 0.0));

  const double kb = absorbed_kernel(0.2, 1.0, 0.3, params);
  r.checks.push_back(at_most("absorbed_at_boundary", std::abs(kb), params.truncation_tol * 10));
  return r;
}

ValidationReport validate_norms() {
  ValidationReport r{"norms", {}};
  const Grid g(1.0, 2000);
  const GridFunction phi = mode(1, g);
  r.checks.push_back(within("l2_phi1", l2_norm(phi), 1.0, 1e-6));
  r.checks.push_back(
      within("h10_phi1", h10_norm(phi), std::sqrt(1.0 + std::numbers::pi * std::numbers::pi / 4.0), 1e-4));
  r.checks.push_back(within("hm1_delta0", hminus1_norm(delta_functional(0.0, g)), std::sqrt(std::tanh(1.0) / 2.0),
                            1e-3));
  const NodalField phi_nodal =
      NodalField::sample(g, [&](double x) { return dirichlet_mode(1, g.half_length(), x); });
  r.checks.push_back(within("hm1_mu_phi1", hminus1_norm(density_functional(phi_nodal)),
                            1.0 / std::sqrt(1.0 + std::numbers::pi * std::numbers::pi / 4.0), 1e-3));

  const Grid small(1.0, 4);
  GridFunction hat(small);
  hat.values()[1] = 1.0;
  r.checks.push_back(within("l2_hat", l2_norm(hat), std::sqrt(1.0 / 3.0), 1e-14));
  r.checks.push_back(within("h10_hat", h10_norm(hat), std::sqrt(2.0 * 0.5 / 3.0 + 2.0 / 0.5), 1e-14));
  return r;
}

ValidationReport validate_martingale(int replicates, std::uint64_t seed) {
  ValidationReport r{"martingale", {}};
  RunConfig cfg = default_config();
  cfg.horizon = 1.0;
  cfg.sample_stride = 1 << 30;
  const Scenario sc = build_scenario(cfg);
  const ChannelKinetics& k = sc.kinetics;
  const int N = 100;
  const GridFunction phi = mode(1, sc.grid);

  std::vector<MartingaleStatsBuilder> builders;
  for (int xi = 0; xi < k.state_count(); ++xi)
    builders.emplace_back(xi, martingale_variance_bound(phi, sc.horizon, N, sc.grid.half_length(), k));

  StochRunOptions opt;
  opt.sample_stride = cfg.sample_stride;
  for (int rep = 0; rep < replicates; ++rep) {
    const std::uint64_t s = replicate_seed(seed, N, rep);
    const StochasticState init = make_stoch_init(sc, N, InitMode::stratified, s);
    const StochTrajectory traj = run_stoch(init, sc.horizon, sc.dt, k, s, opt);
    const ChannelDecomposition d = decompose(traj, k);
    const std::size_t last = d.sample_count() - 1;
    for (int xi = 0; xi < k.state_count(); ++xi)
      builders[xi].add(martingale_pairing(d, phi, xi, last), predicted_variance(d, phi, xi, last));
  }
  for (int xi = 0; xi < k.state_count(); ++xi) {
    const MartingaleStats st = builders[xi].finish();
    const std::string name = k.state(xi).name;
    r.checks.push_back(at_most("mean_within_3se_" + name, std::abs(st.mean), 3.0 * st.standard_error));
    r.checks.push_back(at_most("variance_rel_error_" + name,
                               std::abs(st.variance - st.predicted_variance) / st.predicted_variance, 0.15));
    r.checks.push_back(at_most("second_moment_bound_" + name, st.second_moment, st.bound + 3.0 * st.second_moment_se));
  }
  return r;
}

ValidationReport validate_likelihood(int paths, std::uint64_t seed) {
  ValidationReport r{"likelihood", {}};
  const double T = 2.0, dt = 0.01, ref_rate = 1.0;
  const Grid g(1.0, 20);

  KineticsSpec ref_spec;
  ref_spec.states = {{"closed", 0.0, -0.2}, {"open", 1.0, 1.0}};
  ref_spec.rates = {{"closed", "open", RateForm::constant(ref_rate)}, {"open", "closed", RateForm::constant(ref_rate)}};
  ref_spec.alpha_min = 0.01;
  ref_spec.alpha_max = 10.0;
  const ChannelKinetics reference = make_kinetics(ref_spec);
  const ChannelKinetics model = make_kinetics(default_kinetics());

  const GridFunction V = GridFunction::sample(g, [](double x) { return 0.5 * dirichlet_mode(1, 1.0, x); });
  std::vector<NodalField> p0 = {NodalField(g, 0.5), NodalField(g, 0.5)};

  StochRunOptions opt;
  opt.evolve_potential = false;
  opt.sample_stride = 1 << 30;
  double sum = 0.0, sum_sq = 0.0, identity = 0.0;
  for (int q = 0; q < paths; ++q) {
    const std::uint64_t s = derive_key(seed, q);
    StochasticState init{0.0, V, init_channels(1, p0, InitMode::iid, s)};
    const StochTrajectory traj = run_stoch(init, T, dt, reference, s, opt);
    const double h = std::exp(path_log_likelihood(traj, model, ref_rate));
    sum += h;
    sum_sq += h * h;
    identity = std::max(identity, std::abs(path_log_likelihood(traj, reference, ref_rate)));
  }
  const double mean = sum / paths;
  const double var = (sum_sq - paths * mean * mean) / (paths - 1);
  const double se = std::sqrt(var / paths);
  r.checks.push_back(within("reference_expectation_is_one", mean, 1.0, 3.0 * se));
  r.checks.push_back(at_most("identity_change_is_zero", identity, 1e-12));
  return r;
}

ValidationReport run_validation_suite(const std::string& suite, std::uint64_t seed) {
  if (suite == "kernel") return validate_kernel();
  if (suite == "norms") return validate_norms();
  if (suite == "martingale") return validate_martingale(2000, seed);
  if (suite == "likelihood") return validate_likelihood(10000, seed);
  throw std::invalid_argument("unknown suite '" + suite + "' (kernel | norms | martingale | likelihood)");
}

}  // namespace hhlimit
