#include "hhlimit/deterministic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "hhlimit/errors.hpp"
#include "hhlimit/tridiagonal.hpp"

namespace hhlimit {

namespace {

constexpr double kClipTolerance = 1e-9;
constexpr double kMassTolerance = 1e-9;

// y = A^T x for the generator A (row = from state).
void apply_transpose(const RateMatrix& A, const double* x, double* y) {
  for (int to = 0; to < A.n; ++to) {
    double acc = 0.0;
    for (int from = 0; from < A.n; ++from) acc += A(from, to) * x[from];
    y[to] = acc;
  }
}

// Advances the proportions at every node by tau with the potential frozen.
void advance_proportions(std::vector<NodalField>& p, const GridFunction& v, double tau, const ChannelKinetics& k,
                         double t) {
  const int n = k.state_count();
  const Grid& g = v.grid();
  std::vector<double> x(n), k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int j = 0; j <= g.cells(); ++j) {
    const RateMatrix A = k.generator_matrix(v.at_node(j));
    for (int s = 0; s < n; ++s) x[s] = p[s].values()[j];
    apply_transpose(A, x.data(), k1.data());
    for (int s = 0; s < n; ++s) tmp[s] = x[s] + 0.5 * tau * k1[s];
    apply_transpose(A, tmp.data(), k2.data());
    for (int s = 0; s < n; ++s) tmp[s] = x[s] + 0.5 * tau * k2[s];
    apply_transpose(A, tmp.data(), k3.data());
    for (int s = 0; s < n; ++s) tmp[s] = x[s] + tau * k3[s];
    apply_transpose(A, tmp.data(), k4.data());

    bool clipped = false;
    for (int s = 0; s < n; ++s) {
      double y = x[s] + tau / 6.0 * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
      if (y < 0.0) {
        if (y < -kClipTolerance) throw InvariantViolation("negative proportion", t, y);
        y = 0.0;
        clipped = true;
      }
      if (y > 1.0 + kClipTolerance) throw InvariantViolation("proportion above one", t, y);
      x[s] = y;
    }
    if (clipped) {
      double sum = 0.0;
      for (double y : x) sum += y;
      for (double& y : x) y /= sum;
    }
    for (int s = 0; s < n; ++s) p[s].values()[j] = x[s];
  }
}

void check_step(double dt, const ChannelKinetics& k) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be positive");
  if (dt > max_det_step(k) * (1.0 + 1e-12))
    throw std::invalid_argument(fmt::format("time step {} violates the kinetics stability guard (max {})", dt,
                                            max_det_step(k)));
}

}  // namespace

ReactionCoefficients reaction_coefficients(std::span<const NodalField> p, const ChannelKinetics& k) {
  if (static_cast<int>(p.size()) != k.state_count()) throw std::invalid_argument("one proportion field per state");
  const Grid& g = p[0].grid();
  ReactionCoefficients rc{NodalField(g), NodalField(g)};
  for (int j = 0; j <= g.cells(); ++j) {
    double a = 0.0, b = 0.0;
    for (int s = 0; s < k.state_count(); ++s) {
      const double w = k.conductance(s) * p[s].values()[j];
      a += w;
      b += w * k.driving_potential(s);
    }
    rc.a.values()[j] = a;
    rc.b.values()[j] = b;
  }
  return rc;
}

std::vector<NodalField> proportion_drift(const GridFunction& v, std::span<const NodalField> p,
                                         const ChannelKinetics& k) {
  const int n = k.state_count();
  if (static_cast<int>(p.size()) != n) throw std::invalid_argument("one proportion field per state");
  const Grid& g = v.grid();
  std::vector<NodalField> drift(n, NodalField(g));
  std::vector<double> x(n), y(n);
  for (int j = 0; j <= g.cells(); ++j) {
    const RateMatrix A = k.generator_matrix(v.at_node(j));
    for (int s = 0; s < n; ++s) x[s] = p[s].values()[j];
    apply_transpose(A, x.data(), y.data());
    for (int s = 0; s < n; ++s) drift[s].values()[j] = y[s];
  }
  return drift;
}

double max_det_step(const ChannelKinetics& k) { return 0.5 / (k.alpha_max() * (k.state_count() - 1)); }

DeterministicState step_det(const DeterministicState& s, double dt, const ChannelKinetics& k) {
  check_step(dt, k);
  const Grid& g = s.v.grid();
  DeterministicState next{s.t + dt, s.v, s.p};

  advance_proportions(next.p, next.v, 0.5 * dt, k, s.t);

  const ReactionCoefficients rc = reaction_coefficients(next.p, k);
  SymTridiagonal op = stiffness_matrix(g);
  op.add_scaled(weighted_mass_matrix(g, rc.a.values()), 1.0);
  const SymTridiagonal mass = mass_matrix(g);

  SymTridiagonal lhs = mass;
  lhs.add_scaled(op, 0.5 * dt);
  SymTridiagonal rhs_op = mass;
  rhs_op.add_scaled(op, -0.5 * dt);

  std::vector<double> rhs(g.interior_count());
  rhs_op.multiply(next.v.values(), rhs);
  const Functional source = density_functional(rc.b);
  const auto loads = source.loads();
  for (std::size_t q = 0; q < rhs.size(); ++q) rhs[q] += dt * loads[q];
  next.v = GridFunction(g, lhs.solve(rhs));

  advance_proportions(next.p, next.v, 0.5 * dt, k, s.t + dt);
  return next;
}

void validate_det_state(const DeterministicState& s, const ChannelKinetics& k) {
  if (static_cast<int>(s.p.size()) != k.state_count()) throw std::invalid_argument("one proportion field per state");
  const Grid& g = s.v.grid();
  for (const NodalField& f : s.p)
    if (!(f.grid() == g)) throw std::invalid_argument("proportion grid differs from potential grid");
  for (double v : s.v.values())
    if (!std::isfinite(v)) throw std::invalid_argument("initial potential must be finite");
  for (int j = 0; j <= g.cells(); ++j) {
    double sum = 0.0;
    for (const NodalField& f : s.p) {
      const double v = f.values()[j];
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("initial proportions must lie in [0, 1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kMassTolerance) throw std::invalid_argument("initial proportions must sum to one");
  }
}

DetTrajectory run_det(const DeterministicState& init, double T, double dt, const ChannelKinetics& k,
                      const DetRunOptions& options) {
  validate_det_state(init, k);
  if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("horizon must be nonnegative");
  if (options.sample_stride < 1) throw std::invalid_argument("sample stride must be positive");
  check_step(dt, k);

  const Grid& g = init.v.grid();
  const double l = g.half_length();
  const double tol = options.bound_tolerance >= 0.0 ? options.bound_tolerance : 1e-8 + dt * dt;

  double v0_min = 0.0, v0_max = 0.0;
  for (double v : init.v.values()) {
    v0_min = std::min(v0_min, v);
    v0_max = std::max(v0_max, v);
  }
  const double lower = std::min(k.v_minus(), v0_min) - tol;
  const double upper = std::max(k.v_plus(), v0_max) + tol;
  const double s0 = l2_norm(init.v);

  DetTrajectory traj;
  traj.min_potential = v0_min;
  traj.max_potential = v0_max;
  traj.min_proportion = 1.0;
  traj.max_proportion = 0.0;
  traj.sup_potential = sup_norm(init.v);
  traj.sup_gradient = gradient_sup(init.v);

  auto observe = [&](const DeterministicState& s) {
    for (double v : s.v.values()) {
      traj.min_potential = std::min(traj.min_potential, v);
      traj.max_potential = std::max(traj.max_potential, v);
      if (!std::isfinite(v) || v < lower || v > upper) throw InvariantViolation("maximum principle violated", s.t, v);
    }
    traj.sup_potential = std::max(traj.sup_potential, sup_norm(s.v));
    traj.sup_gradient = std::max(traj.sup_gradient, gradient_sup(s.v));
    for (int j = 0; j <= g.cells(); ++j) {
      double sum = 0.0;
      for (const NodalField& f : s.p) {
        const double v = f.values()[j];
        traj.min_proportion = std::min(traj.min_proportion, v);
        traj.max_proportion = std::max(traj.max_proportion, v);
        sum += v;
      }
      const double err = std::abs(sum - 1.0);
      traj.max_mass_error = std::max(traj.max_mass_error, err);
      if (err > kMassTolerance) throw InvariantViolation("proportions left the simplex", s.t, sum);
    }
  };

  auto bound_at = [&](double t) {
    const double S = traj.sup_potential;
    return s0 * s0 + l * t * k.max_conductance() * S * (S + k.max_abs_potential());
  };

  double dissipation = 0.0;
  auto record = [&](const DeterministicState& s) {
    const double bound = bound_at(s.t);
    if (dissipation > bound) throw InvariantViolation("dissipation bound violated", s.t, dissipation);
    traj.times.push_back(s.t);
    traj.states.push_back(s);
    traj.dissipation.push_back(dissipation);
    traj.dissipation_bound.push_back(bound);
  };

  observe(init);
  record(init);
  if (T == 0.0) return traj;

  const std::vector<double> ends = step_times(T, dt);
  const std::size_t steps = ends.size();
  DeterministicState state = init;
  double energy = dirichlet_energy(state.v);
  for (std::size_t n = 0; n < steps; ++n) {
    const double t_next = init.t + ends[n];
    const double h = t_next - state.t;
    DeterministicState next = step_det(state, h, k);
    next.t = t_next;
    const double next_energy = dirichlet_energy(next.v);
    dissipation += 0.5 * h * (energy + next_energy);
    energy = next_energy;
    state = std::move(next);
    observe(state);
    if ((n + 1) % options.sample_stride == 0 || n + 1 == steps) record(state);
  }
  return traj;
}

void write_det_trajectory_csv(const DetTrajectory& traj, const ChannelKinetics& k, std::ostream& out) {
  out << "t,node,x,v";
  for (const StateSpec& s : k.states()) out << ",p_" << s.name;
  out << '\n';
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    const DeterministicState& s = traj.states[n];
    const Grid& g = s.v.grid();
    for (int j = 0; j <= g.cells(); ++j) {
      fmt::print(out, "{:.17g},{},{:.17g},{:.17g}", traj.times[n], j, g.node(j), s.v.at_node(j));
      for (const NodalField& f : s.p) fmt::print(out, ",{:.17g}", f.values()[j]);
      out << '\n';
    }
  }
}

void write_det_summary_csv(const DetTrajectory& traj, std::ostream& out) {
  out << "t,l2,h10,dissipation\n";
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    const GridFunction& v = traj.states[n].v;
    fmt::print(out, "{:.17g},{:.17g},{:.17g},{:.17g}\n", traj.times[n], l2_norm(v), h10_norm(v), traj.dissipation[n]);
  }
}

}  // namespace hhlimit
