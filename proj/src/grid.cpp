#include "hhlimit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hhlimit/tridiagonal.hpp"

namespace hhlimit {

namespace {

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw std::invalid_argument("grid mismatch");
}

}  // namespace

Grid::Grid(double half_length, int cells) : half_length_(half_length), cells_(cells), spacing_(0.0) {
  if (!(half_length > 0.0) || !std::isfinite(half_length))
    throw std::invalid_argument("half_length must be positive and finite");
  if (cells < 2) throw std::invalid_argument("grid needs at least 2 cells");
  spacing_ = 2.0 * half_length / cells;
}

double Grid::node(int j) const {
  if (j <= 0) return -half_length_;
  if (j >= cells_) return half_length_;
  return -half_length_ + j * spacing_;
}

Grid build_grid(double half_length, int cells) { return Grid(half_length, cells); }

HatWeights hat_weights(const Grid& grid, double x) {
  if (!grid.contains(x)) throw std::out_of_range("position outside the interval");
  const double s = (x + grid.half_length()) / grid.spacing();
  int cell = static_cast<int>(std::floor(s));
  cell = std::clamp(cell, 0, grid.cells() - 1);
  double theta = s - cell;
  theta = std::clamp(theta, 0.0, 1.0);
  return {cell, 1.0 - theta, theta};
}

// ---- GridFunction -----------------------------------------------------------

GridFunction::GridFunction(const Grid& grid) : grid_(grid), values_(grid.interior_count(), 0.0) {}

GridFunction::GridFunction(const Grid& grid, std::vector<double> interior_values)
    : grid_(grid), values_(std::move(interior_values)) {
  if (static_cast<int>(values_.size()) != grid.interior_count())
    throw std::invalid_argument("grid function needs one value per interior node");
}

double GridFunction::at_node(int j) const {
  if (j <= 0 || j >= grid_.cells()) return 0.0;
  return values_[j - 1];
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

// ---- Functional -------------------------------------------------------------

Functional::Functional(const Grid& grid) : grid_(grid), loads_(grid.interior_count(), 0.0) {}

Functional::Functional(const Grid& grid, std::vector<double> loads) : grid_(grid), loads_(std::move(loads)) {
  if (static_cast<int>(loads_.size()) != grid.interior_count())
    throw std::invalid_argument("functional needs one load per interior node");
}

void Functional::add_point_mass(double x, double weight) {
  const HatWeights w = hat_weights(grid_, x);
  const int n = grid_.interior_count();
  if (w.left >= 1) loads_[w.left - 1] += weight * w.w_left;
  if (w.left + 1 <= n) loads_[w.left] += weight * w.w_right;
}

Functional& Functional::operator+=(const Functional& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t k = 0; k < loads_.size(); ++k) loads_[k] += o.loads_[k];
  return *this;
}

Functional& Functional::operator-=(const Functional& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t k = 0; k < loads_.size(); ++k) loads_[k] -= o.loads_[k];
  return *this;
}

Functional& Functional::operator*=(double s) {
  for (double& v : loads_) v *= s;
  return *this;
}

Functional operator+(Functional a, const Functional& b) { return a += b; }
Functional operator-(Functional a, const Functional& b) { return a -= b; }
Functional operator*(double s, Functional a) { return a *= s; }

// ---- NodalField -------------------------------------------------------------

NodalField::NodalField(const Grid& grid, double fill) : grid_(grid), values_(grid.cells() + 1, fill) {}

NodalField::NodalField(const Grid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != grid.cells() + 1)
    throw std::invalid_argument("nodal field needs one value per node");
}

double NodalField::eval(double x) const {
  const HatWeights w = hat_weights(grid_, x);
  return w.w_left * values_[w.left] + w.w_right * values_[w.left + 1];
}

// ---- norms and pairings -----------------------------------------------------

double l2_norm(const GridFunction& u) {
  const Grid& g = u.grid();
  const double h = g.spacing();
  double acc = 0.0;
  for (int j = 0; j < g.cells(); ++j) {
    const double a = u.at_node(j), b = u.at_node(j + 1);
    acc += a * a + a * b + b * b;
  }
  return std::sqrt(acc * h / 3.0);
}

double dirichlet_energy(const GridFunction& u) {
  const Grid& g = u.grid();
  double acc = 0.0;
  for (int j = 0; j < g.cells(); ++j) {
    const double d = u.at_node(j + 1) - u.at_node(j);
    acc += d * d;
  }
  return acc / g.spacing();
}

double h10_norm(const GridFunction& u) {
  const double l2 = l2_norm(u);
  return std::sqrt(l2 * l2 + dirichlet_energy(u));
}

double sup_norm(const GridFunction& u) {
  double m = 0.0;
  for (double v : u.values()) m = std::max(m, std::abs(v));
  return m;
}

double gradient_sup(const GridFunction& u) {
  const Grid& g = u.grid();
  double m = 0.0;
  for (int j = 0; j < g.cells(); ++j) m = std::max(m, std::abs(u.at_node(j + 1) - u.at_node(j)));
  return m / g.spacing();
}

GridFunction riesz_representative(const Functional& F) {
  SymTridiagonal A = stiffness_matrix(F.grid());
  A.add_scaled(mass_matrix(F.grid()), 1.0);
  return GridFunction(F.grid(), A.solve(F.loads()));
}

double hminus1_norm(const Functional& F) {
  const GridFunction u = riesz_representative(F);
  double acc = 0.0;
  const auto loads = F.loads();
  const auto vals = u.values();
  for (std::size_t k = 0; k < loads.size(); ++k) acc += loads[k] * vals[k];
  return std::sqrt(std::max(acc, 0.0));
}

Functional delta_functional(double y, const Grid& grid) {
  if (!grid.contains_interior(y)) throw std::out_of_range("delta position must lie strictly inside the interval");
  Functional F(grid);
  F.add_point_mass(y, 1.0);
  return F;
}

Functional density_functional(const NodalField& f) {
  const Grid& g = f.grid();
  const double h = g.spacing();
  const auto v = f.values();
  Functional F(g);
  auto loads = F.loads();
  for (int j = 1; j < g.cells(); ++j) loads[j - 1] = h / 6.0 * v[j - 1] + 2.0 * h / 3.0 * v[j] + h / 6.0 * v[j + 1];
  return F;
}

double eval_at(const GridFunction& u, double x) {
  const HatWeights w = hat_weights(u.grid(), x);
  return w.w_left * u.at_node(w.left) + w.w_right * u.at_node(w.left + 1);
}

double pairing(const GridFunction& phi, const Functional& F) {
  require_same_grid(phi.grid(), F.grid());
  const auto a = phi.values();
  const auto b = F.loads();
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

std::vector<double> step_times(double T, double dt) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("horizon must be nonnegative");
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  std::vector<double> times;
  if (T == 0.0) return times;
  const long steps = static_cast<long>(std::ceil(T / dt - 1e-9));
  times.reserve(steps);
  for (long n = 1; n < steps; ++n) times.push_back(std::min(T, n * dt));
  times.push_back(T);
  return times;
}

double dirichlet_mode(int k, double half_length, double x) {
  return std::sin(k * std::numbers::pi * (x + half_length) / (2.0 * half_length));
}

}  // namespace hhlimit
