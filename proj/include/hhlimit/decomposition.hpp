#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "hhlimit/deterministic.hpp"
#include "hhlimit/grid.hpp"
#include "hhlimit/kinetics.hpp"
#include "hhlimit/stochastic.hpp"

namespace hhlimit {

/// Instantaneous drift of C_xi - mu p_xi:
///   (1/N) sum_i sum_{z != xi} (1[X_i = z] a_{z,xi}(V(x_i)) - 1[X_i = xi] a_{xi,z}(V(x_i))) delta_{x_i}
///   - mu(det_drift).
Functional q_term(const ChannelConfig& channels, const GridFunction& V, int xi, const ChannelKinetics& k,
                  const NodalField& det_drift);

/// Running integrals of the frozen-rate intensities along a recorded path.
/// For channel i and target z, value(i, z) = int_0^t a_{X_i(s-), z}(V_s(x_i)) ds
/// (nothing accrues while X_i = z), and exit(i, z) = int_0^t 1[X_i = z] a_z ds.
class CompensatorAccumulator {
 public:
  CompensatorAccumulator(std::size_t channels, const ChannelKinetics& k);

  /// Adds `duration` of time spent in `state` at frozen potential V.
  void accumulate(std::size_t channel, int state, double V, double duration);
  double value(std::size_t channel, int target) const { return into_[channel * n_ + target]; }
  double exit(std::size_t channel, int state) const { return out_[channel * n_ + state]; }
  std::size_t channel_count() const { return channels_; }

 private:
  const ChannelKinetics* kinetics_;
  std::size_t channels_;
  std::size_t n_;
  std::vector<double> into_;
  std::vector<double> out_;
  std::vector<double> rates_;
};

/// Per-channel pieces of the decomposition for every state, at every sample
/// of a trajectory. For state xi and channel i:
///   jumps      = #jumps into xi - #jumps out of xi up to t
///   intensity  = int_0^t (a_{X,xi} if X != xi, else -a_X) ds
///   variance   = int_0^t (a_{X,xi} if X != xi, else a_X) ds
/// so that 1[X_i(t) = xi] = 1[X_i(0) = xi] + jumps and the martingale
/// coordinate is jumps - intensity.
struct ChannelDecomposition {
  int N = 1;
  int state_count = 0;
  std::vector<double> positions;
  std::vector<std::size_t> sample_steps;
  std::vector<double> sample_times;
  /// [sample][state][channel]
  std::vector<std::vector<std::vector<double>>> jumps;
  std::vector<std::vector<std::vector<double>>> intensity;
  std::vector<std::vector<std::vector<double>>> variance;
  /// Channel states at each sample.
  std::vector<std::vector<int>> states;

  std::size_t sample_count() const { return sample_times.size(); }
};

/// Replays the jump log against the recorded rate history. Throws if the
/// trajectory carries no rate history.
ChannelDecomposition decompose(const StochTrajectory& traj, const ChannelKinetics& k);

/// M_xi at every sample time, one Functional per (state, sample).
struct MartingaleSeries {
  std::vector<double> times;
  std::vector<std::vector<Functional>> values;  ///< [state][sample]
};

MartingaleSeries martingale_series(const ChannelDecomposition& d, const Grid& grid);
MartingaleSeries martingale_series(const StochTrajectory& traj, const ChannelKinetics& k);

/// <phi, M_xi> at sample `sample`.
double martingale_pairing(const ChannelDecomposition& d, const GridFunction& phi, int xi, std::size_t sample);

/// Realized-path value of the quadratic-variation formula
/// (1/N^2) sum_i phi(x_i)^2 int (delta_{xi,y} - delta_{xi,X(s-)})^2 nu_i(ds, dy).
double predicted_variance(const ChannelDecomposition& d, const GridFunction& phi, int xi, std::size_t sample);
double predicted_variance(const StochTrajectory& traj, const GridFunction& phi, int xi, const ChannelKinetics& k);

/// 8 l alpha_max ||phi||_inf^2 t / N.
double martingale_variance_bound(double phi_sup, double t, int N, double half_length, double alpha_max);
double martingale_variance_bound(const GridFunction& phi, double t, int N, double half_length, const ChannelKinetics& k);

/// int_0^t Q_xi ds at every sample: the integrated channel intensities minus
/// mu(p_t - p_0), with p taken from a deterministic trajectory sampled at the
/// same times. [state][sample].
std::vector<std::vector<Functional>> integrated_drift(const ChannelDecomposition& d, const DetTrajectory& det,
                                                      const Grid& grid);

/// C_xi(X_t) - mu p_{xi,t} at every sample. [state][sample].
std::vector<std::vector<Functional>> empirical_deviation(const ChannelDecomposition& d, const DetTrajectory& det,
                                                         const Grid& grid);

/// Log density of the path law with respect to the reference law in which
/// every configuration jumps at total rate `reference_total_rate`, split
/// evenly over the count (|E|-1) possible single-channel moves:
///   sum_jumps log a_{from,to}(V frozen) - int lambda_total ds
///   + T R - (#jumps) log(R / (count (|E|-1))).
/// Rate factors appear only at actual jumps.
double path_log_likelihood(const StochTrajectory& traj, const ChannelKinetics& k, double reference_total_rate);

/// Replicate summary of <phi, M_xi,t> at the final sample.
struct MartingaleStats {
  int state = 0;
  std::size_t replicates = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double variance = 0.0;            ///< sample variance of <phi, M>
  double variance_se = 0.0;
  double predicted_variance = 0.0;  ///< replicate mean of the path formula
  double second_moment = 0.0;       ///< mean of <phi, M>^2
  double second_moment_se = 0.0;
  double bound = 0.0;               ///< 8 l alpha_max ||phi||^2 t / N
};

/// Accumulates per-replicate martingale pairings into MartingaleStats.
class MartingaleStatsBuilder {
 public:
  MartingaleStatsBuilder(int state, double bound) : state_(state), bound_(bound) {}
  void add(double pairing, double predicted);
  MartingaleStats finish() const;

 private:
  int state_;
  double bound_;
  std::vector<double> pairings_;
  std::vector<double> predicted_;
};

nlohmann::json to_json(const MartingaleStats& s, const ChannelKinetics& k);

}  // namespace hhlimit
