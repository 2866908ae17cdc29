#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hhlimit {

/// Uniform partition of the axon interval [-half_length, half_length] into
/// `cells` equal cells. Nodes are x_j = -half_length + j*h for j = 0..cells.
class Grid {
 public:
  Grid(double half_length, int cells);

  double half_length() const { return half_length_; }
  int cells() const { return cells_; }
  double spacing() const { return spacing_; }
  int interior_count() const { return cells_ - 1; }

  double node(int j) const;
  bool contains(double x) const { return x >= -half_length_ && x <= half_length_; }
  bool contains_interior(double x) const { return x > -half_length_ && x < half_length_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  double half_length_;
  int cells_;
  double spacing_;
};

Grid build_grid(double half_length, int cells);

/// Linear-interpolation weights of a point inside a cell. `left` is the node
/// index of the cell's left end; weights sum to one.
struct HatWeights {
  int left = 0;
  double w_left = 1.0;
  double w_right = 0.0;
};

HatWeights hat_weights(const Grid& grid, double x);

/// Continuous piecewise-linear function vanishing at both ends of the grid.
/// Only the interior nodal values are stored (index k <-> node k+1).
class GridFunction {
 public:
  explicit GridFunction(const Grid& grid);
  GridFunction(const Grid& grid, std::vector<double> interior_values);

  template <class F>
  static GridFunction sample(const Grid& grid, F&& f) {
    GridFunction u(grid);
    for (int j = 1; j < grid.cells(); ++j) u.values_[j - 1] = f(grid.node(j));
    return u;
  }

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Nodal value at node j in 0..cells, zero at the two boundary nodes.
  double at_node(int j) const;

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double s);

 private:
  Grid grid_;
  std::vector<double> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

/// Element of the discrete dual space, stored as its pairings with the
/// interior hat functions.
class Functional {
 public:
  explicit Functional(const Grid& grid);
  Functional(const Grid& grid, std::vector<double> loads);

  const Grid& grid() const { return grid_; }
  std::span<const double> loads() const { return loads_; }
  std::span<double> loads() { return loads_; }

  /// Adds `weight` times the point evaluation at x.
  void add_point_mass(double x, double weight);

  Functional& operator+=(const Functional& o);
  Functional& operator-=(const Functional& o);
  Functional& operator*=(double s);

 private:
  Grid grid_;
  std::vector<double> loads_;
};

Functional operator+(Functional a, const Functional& b);
Functional operator-(Functional a, const Functional& b);
Functional operator*(double s, Functional a);

/// Piecewise-linear field with values at every node, boundaries included.
class NodalField {
 public:
  explicit NodalField(const Grid& grid, double fill = 0.0);
  NodalField(const Grid& grid, std::vector<double> values);

  template <class F>
  static NodalField sample(const Grid& grid, F&& f) {
    NodalField u(grid);
    for (int j = 0; j <= grid.cells(); ++j) u.values_[j] = f(grid.node(j));
    return u;
  }

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double eval(double x) const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

double l2_norm(const GridFunction& u);
/// ||Du||^2 in L2 for the piecewise-constant derivative.
double dirichlet_energy(const GridFunction& u);
/// Full norm: sqrt(||u||_L2^2 + ||Du||_L2^2).
double h10_norm(const GridFunction& u);
double sup_norm(const GridFunction& u);
/// Largest absolute slope over all cells.
double gradient_sup(const GridFunction& u);

/// Riesz representative of F for the H1_0 inner product: solves (K + M)u = loads.
GridFunction riesz_representative(const Functional& F);
double hminus1_norm(const Functional& F);

Functional delta_functional(double y, const Grid& grid);
Functional density_functional(const NodalField& f);
double eval_at(const GridFunction& u, double x);
double pairing(const GridFunction& phi, const Functional& F);

/// Step end times t_1..t_n of [0, T] in steps of dt; the last step is
/// shortened so that t_n == T exactly. Empty when T == 0.
std::vector<double> step_times(double T, double dt);

/// Sine eigenfunction sin(k*pi*(x + l)/(2l)) of the Dirichlet Laplacian.
double dirichlet_mode(int k, double half_length, double x);

}  // namespace hhlimit
