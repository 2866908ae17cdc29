#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hhlimit {

/// Built-in voltage-dependent rate laws (evaluated before clamping):
///   constant(a)             -> a
///   sigmoid(a, b, k, V0)    -> a + b / (1 + exp(-k (V - V0)))
///   exp_clamped(a, k)       -> a exp(k V)
struct RateForm {
  enum class Kind { constant, sigmoid, exp_clamped };

  Kind kind = Kind::constant;
  std::vector<double> params;

  static RateForm constant(double a) { return {Kind::constant, {a}}; }
  static RateForm sigmoid(double a, double b, double k, double v0) { return {Kind::sigmoid, {a, b, k, v0}}; }
  static RateForm exp_clamped(double a, double k) { return {Kind::exp_clamped, {a, k}}; }

  double raw(double V) const;
  /// Lipschitz constant of the raw law on [lo, hi].
  double raw_lipschitz(double lo, double hi) const;
};

struct StateSpec {
  std::string name;
  double conductance = 0.0;
  double driving_potential = 0.0;
};

struct RateSpec {
  std::string from;
  std::string to;
  RateForm form;
};

/// Parsed kinetics configuration, prior to validation.
struct KineticsSpec {
  std::vector<StateSpec> states;
  std::vector<RateSpec> rates;
  double alpha_min = 1e-3;
  double alpha_max = 50.0;
};

/// Dense |E| x |E| matrix, row-major. For a generator, entry (from, to) is
/// the jump rate and the diagonal holds minus the exit rate, so each row
/// sums to zero and dp/dt = A^T p.
struct RateMatrix {
  int n = 0;
  std::vector<double> entries;

  double operator()(int row, int col) const { return entries[static_cast<std::size_t>(row) * n + col]; }
  double& operator()(int row, int col) { return entries[static_cast<std::size_t>(row) * n + col]; }
};

/// Validated channel kinetics: state set, conductances, driving potentials
/// and clamped transition rates. Immutable once built.
class ChannelKinetics {
 public:
  int state_count() const { return static_cast<int>(states_.size()); }
  const StateSpec& state(int s) const { return states_.at(s); }
  const std::vector<StateSpec>& states() const { return states_; }
  int index_of(const std::string& name) const;

  double conductance(int s) const { return states_[s].conductance; }
  double driving_potential(int s) const { return states_[s].driving_potential; }

  double alpha_min() const { return alpha_min_; }
  double alpha_max() const { return alpha_max_; }
  double v_minus() const { return v_minus_; }
  double v_plus() const { return v_plus_; }
  double max_conductance() const { return max_conductance_; }
  double max_abs_potential() const { return std::max(-v_minus_, v_plus_); }

  /// Clamped rate of the jump from -> to at voltage V. Throws if from == to.
  double rate(int from, int to, double V) const;
  double exit_rate(int from, double V) const;
  /// Writes rate(from, z, V) into out[z] (0 at z == from) and returns the exit rate.
  double rates_from(int from, double V, std::span<double> out) const;
  RateMatrix generator_matrix(double V) const;

  /// Lipschitz constant of the clamped rate from -> to on [lo, hi].
  double lipschitz_bound(int from, int to, double lo, double hi) const;

  const KineticsSpec& spec() const { return spec_; }

 private:
  friend ChannelKinetics make_kinetics(const KineticsSpec& spec);

  KineticsSpec spec_;
  std::vector<StateSpec> states_;
  std::vector<RateForm> forms_;  // |E| x |E|, diagonal unused
  double alpha_min_ = 0.0;
  double alpha_max_ = 0.0;
  double v_minus_ = 0.0;
  double v_plus_ = 0.0;
  double max_conductance_ = 0.0;
};

ChannelKinetics make_kinetics(const KineticsSpec& spec);

KineticsSpec parse_kinetics(const nlohmann::json& j);
nlohmann::json to_json(const KineticsSpec& spec);

}  // namespace hhlimit
