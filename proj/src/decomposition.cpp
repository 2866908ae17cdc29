#include "hhlimit/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hhlimit {

namespace {

void require_rate_history(const StochTrajectory& traj) {
  if (!traj.has_rate_history()) throw std::invalid_argument("trajectory carries no rate history");
}

void require_matching_times(const ChannelDecomposition& d, const DetTrajectory& det) {
  if (det.times.size() != d.sample_times.size())
    throw std::invalid_argument("deterministic and stochastic sample counts differ");
  for (std::size_t n = 0; n < det.times.size(); ++n)
    if (std::abs(det.times[n] - d.sample_times[n]) > 1e-9 * std::max(1.0, std::abs(det.times[n])))
      throw std::invalid_argument("deterministic and stochastic sample times differ");
}

double mean_of(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return x.empty() ? 0.0 : acc / x.size();
}

double sample_variance(const std::vector<double>& x, double mean) {
  if (x.size() < 2) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / (x.size() - 1);
}

}  // namespace

Functional q_term(const ChannelConfig& channels, const GridFunction& V, int xi, const ChannelKinetics& k,
                  const NodalField& det_drift) {
  Functional Q = -1.0 * density_functional(det_drift);
  std::vector<double> rates(k.state_count());
  for (std::size_t i = 0; i < channels.count(); ++i) {
    const int s = channels.states[i];
    const double x = channels.positions[i];
    const double exit = k.rates_from(s, eval_at(V, x), rates);
    const double w = (s == xi ? -exit : rates[xi]) / channels.N;
    Q.add_point_mass(x, w);
  }
  return Q;
}

CompensatorAccumulator::CompensatorAccumulator(std::size_t channels, const ChannelKinetics& k)
    : kinetics_(&k),
      channels_(channels),
      n_(k.state_count()),
      into_(channels * n_, 0.0),
      out_(channels * n_, 0.0),
      rates_(n_, 0.0) {}

void CompensatorAccumulator::accumulate(std::size_t channel, int state, double V, double duration) {
  if (duration <= 0.0) return;
  const double exit = kinetics_->rates_from(state, V, rates_);
  double* into = &into_[channel * n_];
  for (std::size_t z = 0; z < n_; ++z) into[z] += rates_[z] * duration;
  out_[channel * n_ + state] += exit * duration;
}

ChannelDecomposition decompose(const StochTrajectory& traj, const ChannelKinetics& k) {
  require_rate_history(traj);
  const std::size_t count = traj.channel_count();
  const int n = k.state_count();

  ChannelDecomposition d;
  d.N = traj.N;
  d.state_count = n;
  d.positions = traj.initial_channels.positions;
  d.sample_steps = traj.sample_steps;
  d.sample_times = traj.sample_times;

  CompensatorAccumulator comp(count, k);
  std::vector<std::vector<double>> jumps(n, std::vector<double>(count, 0.0));
  std::vector<double> last(count);

  auto snapshot = [&](const std::vector<int>& states) {
    std::vector<std::vector<double>> intensity(n, std::vector<double>(count));
    std::vector<std::vector<double>> variance(n, std::vector<double>(count));
    for (int xi = 0; xi < n; ++xi)
      for (std::size_t i = 0; i < count; ++i) {
        intensity[xi][i] = comp.value(i, xi) - comp.exit(i, xi);
        variance[xi][i] = comp.value(i, xi) + comp.exit(i, xi);
      }
    d.jumps.push_back(jumps);
    d.intensity.push_back(std::move(intensity));
    d.variance.push_back(std::move(variance));
    d.states.push_back(states);
  };

  ChannelReplay replay(traj);
  std::size_t next_sample = 0;
  for (std::size_t step = 0; step <= traj.step_count(); ++step) {
    while (next_sample < traj.sample_steps.size() && traj.sample_steps[next_sample] == step) {
      snapshot(replay.states());
      ++next_sample;
    }
    if (step == traj.step_count()) break;

    const double t0 = traj.step_times[step], t1 = traj.step_times[step + 1];
    std::fill(last.begin(), last.end(), t0);
    const std::vector<int>& states = replay.states();
    for (const JumpRecord& j : replay.step_jumps()) {
      const std::size_t i = j.channel;
      comp.accumulate(i, j.from, traj.frozen(step, i), j.time - last[i]);
      last[i] = j.time;
      jumps[j.from][i] -= 1.0;
      jumps[j.to][i] += 1.0;
    }
    // Jumps are applied by advance(); accumulate the tails in the post-jump states.
    std::vector<int> after = states;
    for (const JumpRecord& j : replay.step_jumps()) after[j.channel] = j.to;
    for (std::size_t i = 0; i < count; ++i) comp.accumulate(i, after[i], traj.frozen(step, i), t1 - last[i]);
    replay.advance();
  }
  return d;
}

MartingaleSeries martingale_series(const ChannelDecomposition& d, const Grid& grid) {
  MartingaleSeries m;
  m.times = d.sample_times;
  m.values.assign(d.state_count, {});
  const double w = 1.0 / d.N;
  for (int xi = 0; xi < d.state_count; ++xi) {
    m.values[xi].reserve(d.sample_count());
    for (std::size_t s = 0; s < d.sample_count(); ++s) {
      Functional F(grid);
      const auto& J = d.jumps[s][xi];
      const auto& A = d.intensity[s][xi];
      for (std::size_t i = 0; i < d.positions.size(); ++i) {
        const double x = J[i] - A[i];
        if (x != 0.0) F.add_point_mass(d.positions[i], w * x);
      }
      m.values[xi].push_back(std::move(F));
    }
  }
  return m;
}

MartingaleSeries martingale_series(const StochTrajectory& traj, const ChannelKinetics& k) {
  return martingale_series(decompose(traj, k), traj.grid);
}

double martingale_pairing(const ChannelDecomposition& d, const GridFunction& phi, int xi, std::size_t sample) {
  const auto& J = d.jumps.at(sample).at(xi);
  const auto& A = d.intensity[sample][xi];
  double acc = 0.0;
  for (std::size_t i = 0; i < d.positions.size(); ++i) acc += eval_at(phi, d.positions[i]) * (J[i] - A[i]);
  return acc / d.N;
}

double predicted_variance(const ChannelDecomposition& d, const GridFunction& phi, int xi, std::size_t sample) {
  const auto& B = d.variance.at(sample).at(xi);
  double acc = 0.0;
  for (std::size_t i = 0; i < d.positions.size(); ++i) {
    const double f = eval_at(phi, d.positions[i]);
    acc += f * f * B[i];
  }
  return acc / (static_cast<double>(d.N) * d.N);
}

double predicted_variance(const StochTrajectory& traj, const GridFunction& phi, int xi, const ChannelKinetics& k) {
  const ChannelDecomposition d = decompose(traj, k);
  return predicted_variance(d, phi, xi, d.sample_count() - 1);
}

double martingale_variance_bound(double phi_sup, double t, int N, double half_length, double alpha_max) {
  if (N < 1) throw std::invalid_argument("N must be positive");
  return 8.0 * half_length * alpha_max * phi_sup * phi_sup * t / N;
}

double martingale_variance_bound(const GridFunction& phi, double t, int N, double half_length, const ChannelKinetics& k) {
  return martingale_variance_bound(sup_norm(phi), t, N, half_length, k.alpha_max());
}

std::vector<std::vector<Functional>> integrated_drift(const ChannelDecomposition& d, const DetTrajectory& det,
                                                      const Grid& grid) {
  require_matching_times(d, det);
  const double w = 1.0 / d.N;
  std::vector<std::vector<Functional>> out(d.state_count);
  for (int xi = 0; xi < d.state_count; ++xi) {
    const NodalField& p0 = det.states.front().p.at(xi);
    for (std::size_t s = 0; s < d.sample_count(); ++s) {
      Functional F(grid);
      const auto& A = d.intensity[s][xi];
      for (std::size_t i = 0; i < d.positions.size(); ++i)
        if (A[i] != 0.0) F.add_point_mass(d.positions[i], w * A[i]);
      NodalField dp(grid);
      const auto pt = det.states[s].p.at(xi).values();
      for (std::size_t j = 0; j < dp.values().size(); ++j) dp.values()[j] = pt[j] - p0.values()[j];
      F -= density_functional(dp);
      out[xi].push_back(std::move(F));
    }
  }
  return out;
}

std::vector<std::vector<Functional>> empirical_deviation(const ChannelDecomposition& d, const DetTrajectory& det,
                                                         const Grid& grid) {
  require_matching_times(d, det);
  std::vector<std::vector<Functional>> out(d.state_count);
  const double w = 1.0 / d.N;
  for (int xi = 0; xi < d.state_count; ++xi) {
    for (std::size_t s = 0; s < d.sample_count(); ++s) {
      Functional F(grid);
      const auto& states = d.states[s];
      for (std::size_t i = 0; i < d.positions.size(); ++i)
        if (states[i] == xi) F.add_point_mass(d.positions[i], w);
      F -= density_functional(det.states[s].p.at(xi));
      out[xi].push_back(std::move(F));
    }
  }
  return out;
}

double path_log_likelihood(const StochTrajectory& traj, const ChannelKinetics& k, double reference_total_rate) {
  require_rate_history(traj);
  if (!(reference_total_rate > 0.0)) throw std::invalid_argument("reference rate must be positive");
  const std::size_t count = traj.channel_count();
  const double moves = static_cast<double>(count) * (k.state_count() - 1);
  const double per_move = reference_total_rate / moves;

  double log_h = 0.0;
  std::vector<double> last(count);
  ChannelReplay replay(traj);
  for (std::size_t step = 0; step < traj.step_count(); ++step) {
    const double t0 = traj.step_times[step], t1 = traj.step_times[step + 1];
    std::fill(last.begin(), last.end(), t0);
    std::vector<int> states = replay.states();
    for (const JumpRecord& j : replay.step_jumps()) {
      const double V = traj.frozen(step, j.channel);
      log_h -= k.exit_rate(j.from, V) * (j.time - last[j.channel]);
      log_h += std::log(k.rate(j.from, j.to, V));
      last[j.channel] = j.time;
      states[j.channel] = j.to;
    }
    for (std::size_t i = 0; i < count; ++i) log_h -= k.exit_rate(states[i], traj.frozen(step, i)) * (t1 - last[i]);
    replay.advance();
  }
  const double T = traj.step_times.back() - traj.step_times.front();
  log_h += T * reference_total_rate - static_cast<double>(traj.jumps.size()) * std::log(per_move);
  return log_h;
}

void MartingaleStatsBuilder::add(double pairing, double predicted) {
  pairings_.push_back(pairing);
  predicted_.push_back(predicted);
}

MartingaleStats MartingaleStatsBuilder::finish() const {
  MartingaleStats s;
  s.state = state_;
  s.bound = bound_;
  s.replicates = pairings_.size();
  const double R = static_cast<double>(s.replicates);
  if (s.replicates == 0) return s;
  s.mean = mean_of(pairings_);
  s.variance = sample_variance(pairings_, s.mean);
  s.standard_error = std::sqrt(s.variance / R);
  s.predicted_variance = mean_of(predicted_);

  std::vector<double> centered(pairings_.size()), squares(pairings_.size());
  for (std::size_t r = 0; r < pairings_.size(); ++r) {
    centered[r] = (pairings_[r] - s.mean) * (pairings_[r] - s.mean);
    squares[r] = pairings_[r] * pairings_[r];
  }
  s.variance_se = std::sqrt(sample_variance(centered, mean_of(centered)) / R);
  s.second_moment = mean_of(squares);
  s.second_moment_se = std::sqrt(sample_variance(squares, s.second_moment) / R);
  return s;
}

nlohmann::json to_json(const MartingaleStats& s, const ChannelKinetics& k) {
  return {{"state", k.state(s.state).name},
          {"replicates", s.replicates},
          {"mean", s.mean},
          {"standard_error", s.standard_error},
          {"variance", s.variance},
          {"variance_se", s.variance_se},
          {"predicted_variance", s.predicted_variance},
          {"variance_relative_error",
           s.predicted_variance > 0.0 ? std::abs(s.variance - s.predicted_variance) / s.predicted_variance : 0.0},
          {"second_moment", s.second_moment},
          {"second_moment_se", s.second_moment_se},
          {"bound", s.bound}};
}

}  // namespace hhlimit
