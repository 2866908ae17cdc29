#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "hhlimit/grid.hpp"
#include "hhlimit/kinetics.hpp"
#include "hhlimit/rng.hpp"
#include "hhlimit/tridiagonal.hpp"

namespace hhlimit {

enum class InitMode { stratified, iid };

/// Channels sit at i/N for every integer i with -N l < i < N l.
struct ChannelConfig {
  int N = 1;
  std::vector<long> lattice;
  std::vector<double> positions;
  std::vector<int> states;

  std::size_t count() const { return states.size(); }
};

/// Integers i with -N l < i < N l, in increasing order.
std::vector<long> channel_lattice(int N, double half_length);

/// Assigns initial states from p0 (one field per state). Stratified mode is
/// deterministic: each channel takes the state with the largest running
/// deficit between cumulative target mass and assigned count. iid mode
/// samples each channel from the categorical law p0(i/N).
ChannelConfig init_channels(int N, std::span<const NodalField> p0, InitMode mode, std::uint64_t seed);

std::vector<long> state_counts(const ChannelConfig& channels, int state_count);

/// (1/N) sum of delta_{i/N} over channels currently in `state`.
Functional empirical_distribution(const ChannelConfig& channels, int state, const Grid& grid);

/// (1/N) sum_i c(i) (v(i) - V(i/N)) delta_{i/N}.
Functional channel_source(const ChannelConfig& channels, const GridFunction& V, const ChannelKinetics& k);

struct StochasticState {
  double t = 0.0;
  GridFunction V;
  ChannelConfig channels;
};

struct JumpRecord {
  double time = 0.0;
  int channel = 0;  ///< index into ChannelConfig::states
  int from = 0;
  int to = 0;
};

/// Per-channel randomness: an independent counter-based stream and the
/// unused part of the current unit-exponential clock. Jumps fire when the
/// integrated exit rate exhausts the clock, which is exact for rates that
/// are constant on each step.
class ChannelClocks {
 public:
  ChannelClocks(std::uint64_t seed, std::size_t count);

  std::size_t size() const { return residual_.size(); }
  CounterRng& stream(std::size_t i) { return streams_[i]; }
  double& residual(std::size_t i) { return residual_[i]; }

 private:
  std::vector<CounterRng> streams_;
  std::vector<double> residual_;
};

/// Largest step accepted by the rate-freezing guard: dt (|E|-1) alpha_max <= 0.2.
double max_stoch_step(const ChannelKinetics& k);

/// Frozen-rate hybrid step. Rates are frozen at V(t, i/N); each channel's
/// jumps on (t, t+dt] are simulated exactly for the frozen chain; the PDE is
/// advanced by Crank-Nicolson between consecutive jump times with the
/// channel sources of the current configuration.
class HybridStepper {
 public:
  HybridStepper(const Grid& grid, const ChannelConfig& channels, const ChannelKinetics& k);

  /// Advances `state` by dt, appending the jumps (time ordered) to `jumps`.
  /// When `frozen` is non-empty it receives V(t, i/N) for every channel.
  void step(StochasticState& state, double dt, ChannelClocks& clocks, std::vector<JumpRecord>& jumps,
            std::span<double> frozen = {}, bool evolve_potential = true);

 private:
  struct Stencil {
    int a = -1;  // interior index of the left node, -1 when it is a boundary
    int b = -1;  // interior index of the right node, -1 when it is a boundary
    double wa = 0.0;
    double wb = 0.0;
  };

  void assemble_sources(const std::vector<int>& states);
  void add_channel(std::size_t i, int state, double sign);
  void crank_nicolson(std::vector<double>& V, double tau);

  Grid grid_;
  const ChannelKinetics* kinetics_;
  double inv_N_;
  std::vector<Stencil> stencil_;
  SymTridiagonal mass_;
  SymTridiagonal stiffness_;
  SymTridiagonal coupling_;       // sum_i (c_i/N) w_i w_i^T
  std::vector<double> load_;      // sum_i (c_i v_i/N) w_i
  std::vector<double> rates_;
  std::vector<JumpRecord> pending_;
};

std::pair<StochasticState, std::vector<JumpRecord>> step_stoch(const StochasticState& s, double dt,
                                                               const ChannelKinetics& k, ChannelClocks& clocks);

struct StochRunOptions {
  int sample_stride = 1;
  bool evolve_potential = true;  ///< false holds V at its initial value
  bool record_rate_history = true;
};

/// Everything a stochastic run leaves behind: snapshots of V, the jump log
/// (the realized jump measures), and the frozen channel potentials used on
/// each step (the rate history compensators are built from).
struct StochTrajectory {
  std::uint64_t seed = 0;
  int N = 1;
  Grid grid{1.0, 2};
  ChannelConfig initial_channels;

  std::vector<double> step_times;             ///< t_0..t_n
  std::vector<std::size_t> step_jump_begin;   ///< jumps of step n: [begin[n], begin[n+1])
  std::vector<JumpRecord> jumps;
  std::vector<double> frozen_potential;       ///< step-major, count() per step

  std::vector<std::size_t> sample_steps;      ///< step index of each sample (0 = initial)
  std::vector<double> sample_times;
  std::vector<GridFunction> snapshots;
  std::vector<double> dissipation;
  std::vector<double> dissipation_bound;
  double sup_potential = 0.0;

  std::size_t step_count() const { return step_times.empty() ? 0 : step_times.size() - 1; }
  std::size_t channel_count() const { return initial_channels.count(); }
  bool has_rate_history() const { return frozen_potential.size() == step_count() * channel_count(); }
  double frozen(std::size_t step, std::size_t channel) const {
    return frozen_potential[step * channel_count() + channel];
  }
};

void validate_stoch_state(const StochasticState& s, const ChannelKinetics& k);

/// Runs to T, asserting finiteness of sup ||V||_inf and the energy bound
/// ||V_0||^2 + l t (max c) S (S + max|v_s|) on the accumulated dissipation.
StochTrajectory run_stoch(const StochasticState& init, double T, double dt, const ChannelKinetics& k,
                          std::uint64_t seed, const StochRunOptions& options = {});

/// Walks the channel configuration forward one step at a time.
class ChannelReplay {
 public:
  explicit ChannelReplay(const StochTrajectory& traj);

  const std::vector<int>& states() const { return states_; }
  std::size_t step() const { return step_; }
  /// Jumps that happen during the current step.
  std::span<const JumpRecord> step_jumps() const;
  /// Applies the current step's jumps and moves to the next step.
  void advance();

 private:
  const StochTrajectory* traj_;
  std::vector<int> states_;
  std::size_t step_ = 0;
};

/// Channel configuration after the jumps of the first `step` steps.
std::vector<int> states_at_step(const StochTrajectory& traj, std::size_t step);

/// CSV t,node,x,V for every snapshot.
void write_potential_csv(const StochTrajectory& traj, std::ostream& out);
/// CSV t,i,from,to with lattice index i and state names.
void write_jumps_csv(const StochTrajectory& traj, const ChannelKinetics& k, std::ostream& out);

}  // namespace hhlimit
