#include "hhlimit/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hhlimit/errors.hpp"

namespace hhlimit {

namespace {

constexpr std::uint64_t kInitDomain = 0x1A17;
constexpr std::uint64_t kJumpDomain = 0x7C3B;

}  // namespace

std::vector<long> channel_lattice(int N, double half_length) {
  if (N < 1) throw std::invalid_argument("N must be positive");
  const double reach = N * half_length;
  const long lo = static_cast<long>(std::floor(-reach)) + 1;
  const long hi = static_cast<long>(std::ceil(reach)) - 1;
  std::vector<long> lattice;
  for (long i = lo; i <= hi; ++i) {
    const double x = static_cast<double>(i) / N;
    if (x > -half_length && x < half_length) lattice.push_back(i);
  }
  return lattice;
}

ChannelConfig init_channels(int N, std::span<const NodalField> p0, InitMode mode, std::uint64_t seed) {
  if (p0.size() < 2) throw std::invalid_argument("need one proportion field per state");
  const Grid& g = p0[0].grid();
  ChannelConfig cfg;
  cfg.N = N;
  cfg.lattice = channel_lattice(N, g.half_length());
  if (cfg.lattice.empty()) throw std::invalid_argument("N is too small to place any channel");
  const int n = static_cast<int>(p0.size());
  cfg.positions.reserve(cfg.lattice.size());
  cfg.states.reserve(cfg.lattice.size());

  std::vector<double> target(n, 0.0), assigned(n, 0.0), w(n);
  const std::uint64_t init_key = derive_key(seed, kInitDomain);
  for (std::size_t c = 0; c < cfg.lattice.size(); ++c) {
    const double x = static_cast<double>(cfg.lattice[c]) / N;
    cfg.positions.push_back(x);
    for (int s = 0; s < n; ++s) w[s] = std::max(0.0, p0[s].eval(x));
    int chosen = 0;
    if (mode == InitMode::stratified) {
      for (int s = 0; s < n; ++s) target[s] += w[s];
      double best = -std::numeric_limits<double>::infinity();
      for (int s = 0; s < n; ++s) {
        const double deficit = target[s] - assigned[s];
        if (deficit > best) {
          best = deficit;
          chosen = s;
        }
      }
      assigned[chosen] += 1.0;
    } else {
      CounterRng rng(derive_key(init_key, c));
      double total = 0.0;
      for (double v : w) total += v;
      const double u = rng.uniform() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (int s = 0; s < n; ++s) {
        acc += w[s];
        if (u < acc) {
          chosen = s;
          break;
        }
      }
      while (w[chosen] <= 0.0 && chosen > 0) --chosen;
    }
    cfg.states.push_back(chosen);
  }
  return cfg;
}

std::vector<long> state_counts(const ChannelConfig& channels, int state_count) {
  std::vector<long> counts(state_count, 0);
  for (int s : channels.states) ++counts.at(s);
  return counts;
}

Functional empirical_distribution(const ChannelConfig& channels, int state, const Grid& grid) {
  Functional F(grid);
  const double w = 1.0 / channels.N;
  for (std::size_t i = 0; i < channels.count(); ++i)
    if (channels.states[i] == state) F.add_point_mass(channels.positions[i], w);
  return F;
}

Functional channel_source(const ChannelConfig& channels, const GridFunction& V, const ChannelKinetics& k) {
  Functional F(V.grid());
  for (std::size_t i = 0; i < channels.count(); ++i) {
    const int s = channels.states[i];
    const double c = k.conductance(s);
    if (c == 0.0) continue;
    const double x = channels.positions[i];
    F.add_point_mass(x, c * (k.driving_potential(s) - eval_at(V, x)) / channels.N);
  }
  return F;
}

ChannelClocks::ChannelClocks(std::uint64_t seed, std::size_t count) : residual_(count) {
  const std::uint64_t key = derive_key(seed, kJumpDomain);
  streams_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    streams_.emplace_back(derive_key(key, i));
    residual_[i] = streams_[i].exponential();
  }
}

double max_stoch_step(const ChannelKinetics& k) { return 0.2 / ((k.state_count() - 1) * k.alpha_max()); }

// ---- HybridStepper ----------------------------------------------------------

HybridStepper::HybridStepper(const Grid& grid, const ChannelConfig& channels, const ChannelKinetics& k)
    : grid_(grid),
      kinetics_(&k),
      inv_N_(1.0 / channels.N),
      mass_(mass_matrix(grid)),
      stiffness_(stiffness_matrix(grid)),
      coupling_(grid.interior_count()),
      load_(grid.interior_count(), 0.0),
      rates_(k.state_count(), 0.0) {
  const int n = grid.interior_count();
  stencil_.reserve(channels.count());
  for (double x : channels.positions) {
    const HatWeights w = hat_weights(grid, x);
    Stencil st;
    if (w.left >= 1) {
      st.a = w.left - 1;
      st.wa = w.w_left;
    }
    if (w.left + 1 <= n) {
      st.b = w.left;
      st.wb = w.w_right;
    }
    stencil_.push_back(st);
  }
}

void HybridStepper::add_channel(std::size_t i, int state, double sign) {
  const double c = kinetics_->conductance(state) * inv_N_ * sign;
  if (c == 0.0) return;
  const double cv = c * kinetics_->driving_potential(state);
  const Stencil& st = stencil_[i];
  if (st.a >= 0) {
    coupling_.diag[st.a] += c * st.wa * st.wa;
    load_[st.a] += cv * st.wa;
  }
  if (st.b >= 0) {
    coupling_.diag[st.b] += c * st.wb * st.wb;
    load_[st.b] += cv * st.wb;
  }
  if (st.a >= 0 && st.b >= 0) coupling_.off[st.a] += c * st.wa * st.wb;
}

void HybridStepper::assemble_sources(const std::vector<int>& states) {
  std::fill(coupling_.diag.begin(), coupling_.diag.end(), 0.0);
  std::fill(coupling_.off.begin(), coupling_.off.end(), 0.0);
  std::fill(load_.begin(), load_.end(), 0.0);
  for (std::size_t i = 0; i < states.size(); ++i) add_channel(i, states[i], 1.0);
}

void HybridStepper::crank_nicolson(std::vector<double>& V, double tau) {
  const std::size_t n = V.size();
  SymTridiagonal lhs = mass_;
  SymTridiagonal rhs_op = mass_;
  for (std::size_t q = 0; q < n; ++q) {
    const double op = stiffness_.diag[q] + coupling_.diag[q];
    lhs.diag[q] += 0.5 * tau * op;
    rhs_op.diag[q] -= 0.5 * tau * op;
  }
  for (std::size_t q = 0; q + 1 < n; ++q) {
    const double op = stiffness_.off[q] + coupling_.off[q];
    lhs.off[q] += 0.5 * tau * op;
    rhs_op.off[q] -= 0.5 * tau * op;
  }
  std::vector<double> rhs(n);
  rhs_op.multiply(V, rhs);
  for (std::size_t q = 0; q < n; ++q) rhs[q] += tau * load_[q];
  V = lhs.solve(rhs);
}

void HybridStepper::step(StochasticState& state, double dt, ChannelClocks& clocks, std::vector<JumpRecord>& jumps,
                         std::span<double> frozen, bool evolve_potential) {
  const ChannelKinetics& k = *kinetics_;
  auto& states = state.channels.states;
  const std::size_t count = states.size();
  if (clocks.size() != count || stencil_.size() != count) throw std::invalid_argument("channel count mismatch");
  const auto V = state.V.values();

  // Frozen rates, exact jumps of the frozen chain per channel.
  pending_.clear();
  for (std::size_t i = 0; i < count; ++i) {
    const Stencil& st = stencil_[i];
    double vc = 0.0;
    if (st.a >= 0) vc += st.wa * V[st.a];
    if (st.b >= 0) vc += st.wb * V[st.b];
    if (!frozen.empty()) frozen[i] = vc;

    int s = states[i];
    double elapsed = 0.0;
    double& clock = clocks.residual(i);
    for (;;) {
      const double exit = k.rates_from(s, vc, rates_);
      const double hazard = exit * (dt - elapsed);
      if (clock > hazard) {
        clock -= hazard;
        break;
      }
      elapsed += clock / exit;
      CounterRng& rng = clocks.stream(i);
      const double u = rng.uniform() * exit;
      int to = -1;
      double acc = 0.0;
      for (int z = 0; z < k.state_count(); ++z) {
        if (z == s) continue;
        acc += rates_[z];
        to = z;
        if (u < acc) break;
      }
      pending_.push_back({elapsed, static_cast<int>(i), s, to});
      s = to;
      clock = rng.exponential();
    }
  }
  std::sort(pending_.begin(), pending_.end(), [](const JumpRecord& x, const JumpRecord& y) {
    return x.time < y.time || (x.time == y.time && x.channel < y.channel);
  });

  // PDE between consecutive jump times with the configuration held fixed.
  std::vector<double> v(V.begin(), V.end());
  if (evolve_potential) assemble_sources(states);
  double cursor = 0.0;
  for (const JumpRecord& j : pending_) {
    if (evolve_potential) {
      if (j.time > cursor) crank_nicolson(v, j.time - cursor);
      add_channel(j.channel, j.from, -1.0);
      add_channel(j.channel, j.to, 1.0);
    }
    cursor = j.time;
    states[j.channel] = j.to;
    jumps.push_back({state.t + j.time, j.channel, j.from, j.to});
  }
  if (evolve_potential) {
    if (dt > cursor) crank_nicolson(v, dt - cursor);
    std::copy(v.begin(), v.end(), state.V.values().begin());
  }
  state.t += dt;
}

std::pair<StochasticState, std::vector<JumpRecord>> step_stoch(const StochasticState& s, double dt,
                                                               const ChannelKinetics& k, ChannelClocks& clocks) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (dt > max_stoch_step(k) * (1.0 + 1e-12))
    throw std::invalid_argument(fmt::format("time step {} violates the rate-freezing guard (max {})", dt,
                                            max_stoch_step(k)));
  HybridStepper stepper(s.V.grid(), s.channels, k);
  std::pair<StochasticState, std::vector<JumpRecord>> out{s, {}};
  stepper.step(out.first, dt, clocks, out.second);
  return out;
}

// ---- runs -------------------------------------------------------------------

void validate_stoch_state(const StochasticState& s, const ChannelKinetics& k) {
  const ChannelConfig& c = s.channels;
  if (c.N < 1) throw std::invalid_argument("N must be positive");
  if (c.positions.size() != c.states.size()) throw std::invalid_argument("positions and states differ in length");
  for (std::size_t i = 0; i < c.count(); ++i) {
    if (!s.V.grid().contains_interior(c.positions[i])) throw std::invalid_argument("channel outside the open interval");
    if (c.states[i] < 0 || c.states[i] >= k.state_count()) throw std::invalid_argument("channel state out of range");
  }
  for (double v : s.V.values())
    if (!std::isfinite(v)) throw std::invalid_argument("initial potential must be finite");
}

StochTrajectory run_stoch(const StochasticState& init, double T, double dt, const ChannelKinetics& k,
                          std::uint64_t seed, const StochRunOptions& options) {
  validate_stoch_state(init, k);
  if (options.sample_stride < 1) throw std::invalid_argument("sample stride must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (dt > max_stoch_step(k) * (1.0 + 1e-12))
    throw std::invalid_argument(fmt::format("time step {} violates the rate-freezing guard (max {})", dt,
                                            max_stoch_step(k)));
  const std::vector<double> ends = step_times(T, dt);
  const Grid& g = init.V.grid();
  const std::size_t count = init.channels.count();

  StochTrajectory traj;
  traj.seed = seed;
  traj.N = init.channels.N;
  traj.grid = g;
  traj.initial_channels = init.channels;
  traj.step_times.reserve(ends.size() + 1);
  traj.step_times.push_back(init.t);
  for (double e : ends) traj.step_times.push_back(init.t + e);
  traj.step_jump_begin.push_back(0);
  if (options.record_rate_history) traj.frozen_potential.resize(ends.size() * count);

  const double s0 = l2_norm(init.V);
  const double l = g.half_length();
  traj.sup_potential = sup_norm(init.V);
  double dissipation = 0.0;

  auto record = [&](std::size_t step, const GridFunction& V) {
    const double t = traj.step_times[step];
    const double S = traj.sup_potential;
    const double bound = s0 * s0 + l * (t - init.t) * k.max_conductance() * S * (S + k.max_abs_potential());
    if (dissipation > bound) throw InvariantViolation("dissipation bound violated", t, dissipation);
    traj.sample_steps.push_back(step);
    traj.sample_times.push_back(t);
    traj.snapshots.push_back(V);
    traj.dissipation.push_back(dissipation);
    traj.dissipation_bound.push_back(bound);
  };
  record(0, init.V);

  StochasticState state = init;
  ChannelClocks clocks(seed, count);
  HybridStepper stepper(g, init.channels, k);
  double energy = dirichlet_energy(state.V);
  for (std::size_t n = 0; n < ends.size(); ++n) {
    const double h = traj.step_times[n + 1] - state.t;
    std::span<double> frozen;
    if (options.record_rate_history) frozen = std::span<double>(traj.frozen_potential).subspan(n * count, count);
    stepper.step(state, h, clocks, traj.jumps, frozen, options.evolve_potential);
    state.t = traj.step_times[n + 1];
    traj.step_jump_begin.push_back(traj.jumps.size());

    const double sup = sup_norm(state.V);
    if (!std::isfinite(sup)) throw InvariantViolation("potential is no longer finite", state.t, sup);
    traj.sup_potential = std::max(traj.sup_potential, sup);
    const double next_energy = dirichlet_energy(state.V);
    dissipation += 0.5 * h * (energy + next_energy);
    energy = next_energy;
    if ((n + 1) % options.sample_stride == 0 || n + 1 == ends.size()) record(n + 1, state.V);
  }
  return traj;
}

// ---- replay -----------------------------------------------------------------

ChannelReplay::ChannelReplay(const StochTrajectory& traj) : traj_(&traj), states_(traj.initial_channels.states) {}

std::span<const JumpRecord> ChannelReplay::step_jumps() const {
  if (step_ >= traj_->step_count()) return {};
  const std::size_t b = traj_->step_jump_begin[step_], e = traj_->step_jump_begin[step_ + 1];
  return std::span<const JumpRecord>(traj_->jumps).subspan(b, e - b);
}

void ChannelReplay::advance() {
  for (const JumpRecord& j : step_jumps()) states_[j.channel] = j.to;
  ++step_;
}

std::vector<int> states_at_step(const StochTrajectory& traj, std::size_t step) {
  if (step > traj.step_count()) throw std::out_of_range("step beyond trajectory");
  std::vector<int> states = traj.initial_channels.states;
  for (std::size_t q = 0; q < traj.step_jump_begin[step]; ++q) states[traj.jumps[q].channel] = traj.jumps[q].to;
  return states;
}

void write_potential_csv(const StochTrajectory& traj, std::ostream& out) {
  out << "t,node,x,V\n";
  for (std::size_t n = 0; n < traj.snapshots.size(); ++n) {
    const GridFunction& V = traj.snapshots[n];
    for (int j = 0; j <= traj.grid.cells(); ++j)
      fmt::print(out, "{:.17g},{},{:.17g},{:.17g}\n", traj.sample_times[n], j, traj.grid.node(j), V.at_node(j));
  }
}

void write_jumps_csv(const StochTrajectory& traj, const ChannelKinetics& k, std::ostream& out) {
  out << "t,i,from,to\n";
  for (const JumpRecord& j : traj.jumps)
    fmt::print(out, "{:.17g},{},{},{}\n", j.time, traj.initial_channels.lattice[j.channel], k.state(j.from).name,
               k.state(j.to).name);
}

}  // namespace hhlimit
