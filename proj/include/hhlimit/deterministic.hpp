#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "hhlimit/grid.hpp"
#include "hhlimit/kinetics.hpp"

namespace hhlimit {

/// Snapshot of the deterministic system: potential v and one proportion
/// field per channel state.
struct DeterministicState {
  double t = 0.0;
  GridFunction v;
  std::vector<NodalField> p;
};

/// v_t = v_xx - a v + b with a = sum c_s p_s and b = sum c_s v_s p_s.
struct ReactionCoefficients {
  NodalField a;
  NodalField b;
};

ReactionCoefficients reaction_coefficients(std::span<const NodalField> p, const ChannelKinetics& k);

/// Right-hand side of the proportion ODEs, one field per state, with the
/// rates evaluated at the nodal potential.
std::vector<NodalField> proportion_drift(const GridFunction& v, std::span<const NodalField> p,
                                         const ChannelKinetics& k);

/// Largest step the proportion substep accepts: dt * alpha_max * (|E| - 1) <= 0.5.
double max_det_step(const ChannelKinetics& k);

/// One Strang step: half step of the proportion ODEs (RK4, v frozen), a
/// Crank-Nicolson step of the potential with a, b frozen at the midpoint,
/// and a second half step of the proportions.
DeterministicState step_det(const DeterministicState& s, double dt, const ChannelKinetics& k);

struct DetRunOptions {
  int sample_stride = 1;
  /// Abort tolerance for the maximum-principle band; negative selects 1e-8 + dt^2.
  double bound_tolerance = -1.0;
};

struct DetTrajectory {
  std::vector<double> times;
  std::vector<DeterministicState> states;
  std::vector<double> dissipation;        ///< int_0^t ||Dv||^2 ds at each sample
  std::vector<double> dissipation_bound;  ///< explicit energy bound at each sample
  double sup_potential = 0.0;             ///< max_t ||v_t||_inf
  double min_potential = 0.0;             ///< min over all steps and nodes
  double max_potential = 0.0;             ///< max over all steps and nodes
  double sup_gradient = 0.0;              ///< max_t ||Dv_t||_inf
  double max_mass_error = 0.0;            ///< max_t max_node |sum_s p_s - 1|
  double min_proportion = 0.0;
  double max_proportion = 0.0;
};

/// Checks the state invariants (simplex at every node, finite potential).
void validate_det_state(const DeterministicState& s, const ChannelKinetics& k);

/// Integrates to T in steps of dt (the last one shortened if needed),
/// asserting the simplex, the maximum principle and the energy bound
/// ||v_0||^2 + l t (max c) S (S + max|v_s|) on the accumulated dissipation.
DetTrajectory run_det(const DeterministicState& init, double T, double dt, const ChannelKinetics& k,
                      const DetRunOptions& options = {});

/// CSV with columns t,node,x,v,p_<state>... for every sample and node.
void write_det_trajectory_csv(const DetTrajectory& traj, const ChannelKinetics& k, std::ostream& out);
/// CSV with columns t,l2,h10,dissipation.
void write_det_summary_csv(const DetTrajectory& traj, std::ostream& out);

}  // namespace hhlimit
