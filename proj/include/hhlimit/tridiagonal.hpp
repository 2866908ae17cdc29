#pragma once

#include <span>
#include <vector>

#include "hhlimit/grid.hpp"

namespace hhlimit {

/// Symmetric tridiagonal matrix: diag has n entries, off has n-1 entries
/// (off[k] couples rows k and k+1).
struct SymTridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  explicit SymTridiagonal(std::size_t n = 0) : diag(n, 0.0), off(n > 0 ? n - 1 : 0, 0.0) {}

  std::size_t size() const { return diag.size(); }

  /// this += s * other
  void add_scaled(const SymTridiagonal& other, double s);
  void multiply(std::span<const double> x, std::span<double> y) const;
  /// Thomas algorithm; requires a nonsingular, diagonally stable matrix.
  std::vector<double> solve(std::span<const double> rhs) const;
};

/// Interior-node stiffness matrix (integral of phi_i' phi_j').
SymTridiagonal stiffness_matrix(const Grid& grid);
/// Interior-node consistent mass matrix (integral of phi_i phi_j).
SymTridiagonal mass_matrix(const Grid& grid);
/// Interior-node weighted mass matrix (integral of a phi_i phi_j) for a
/// piecewise-linear weight a given at all nodes.
SymTridiagonal weighted_mass_matrix(const Grid& grid, std::span<const double> a);

}  // namespace hhlimit
