#include "hhlimit/tridiagonal.hpp"

#include <stdexcept>

namespace hhlimit {

void SymTridiagonal::add_scaled(const SymTridiagonal& other, double s) {
  if (other.size() != size()) throw std::invalid_argument("tridiagonal size mismatch");
  for (std::size_t k = 0; k < diag.size(); ++k) diag[k] += s * other.diag[k];
  for (std::size_t k = 0; k < off.size(); ++k) off[k] += s * other.off[k];
}

void SymTridiagonal::multiply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = size();
  for (std::size_t k = 0; k < n; ++k) {
    double acc = diag[k] * x[k];
    if (k > 0) acc += off[k - 1] * x[k - 1];
    if (k + 1 < n) acc += off[k] * x[k + 1];
    y[k] = acc;
  }
}

std::vector<double> SymTridiagonal::solve(std::span<const double> rhs) const {
  const std::size_t n = size();
  if (rhs.size() != n) throw std::invalid_argument("tridiagonal rhs size mismatch");
  std::vector<double> x(n);
  if (n == 0) return x;
  std::vector<double> c(n);
  double pivot = diag[0];
  if (pivot == 0.0) throw std::runtime_error("singular tridiagonal system");
  c[0] = n > 1 ? off[0] / pivot : 0.0;
  x[0] = rhs[0] / pivot;
  for (std::size_t k = 1; k < n; ++k) {
    pivot = diag[k] - off[k - 1] * c[k - 1];
    if (pivot == 0.0) throw std::runtime_error("singular tridiagonal system");
    c[k] = k + 1 < n ? off[k] / pivot : 0.0;
    x[k] = (rhs[k] - off[k - 1] * x[k - 1]) / pivot;
  }
  for (std::size_t k = n - 1; k-- > 0;) x[k] -= c[k] * x[k + 1];
  return x;
}

SymTridiagonal stiffness_matrix(const Grid& grid) {
  const int n = grid.interior_count();
  const double h = grid.spacing();
  SymTridiagonal K(n);
  for (int k = 0; k < n; ++k) K.diag[k] = 2.0 / h;
  for (int k = 0; k + 1 < n; ++k) K.off[k] = -1.0 / h;
  return K;
}

SymTridiagonal mass_matrix(const Grid& grid) {
  const int n = grid.interior_count();
  const double h = grid.spacing();
  SymTridiagonal M(n);
  for (int k = 0; k < n; ++k) M.diag[k] = 2.0 * h / 3.0;
  for (int k = 0; k + 1 < n; ++k) M.off[k] = h / 6.0;
  return M;
}

SymTridiagonal weighted_mass_matrix(const Grid& grid, std::span<const double> a) {
  if (static_cast<int>(a.size()) != grid.cells() + 1)
    throw std::invalid_argument("weight must have one value per node");
  const int n = grid.interior_count();
  const double h = grid.spacing();
  SymTridiagonal W(n);
  // Cell [j, j+1] with linear weight: local matrix h/12 [[3a0+a1, a0+a1], [a0+a1, a0+3a1]].
  for (int j = 0; j < grid.cells(); ++j) {
    const double a0 = a[j], a1 = a[j + 1];
    const int left = j - 1, right = j;  // interior indices of nodes j, j+1
    if (left >= 0) W.diag[left] += h / 12.0 * (3.0 * a0 + a1);
    if (right < n) W.diag[right] += h / 12.0 * (a0 + 3.0 * a1);
    if (left >= 0 && right < n) W.off[left] += h / 12.0 * (a0 + a1);
  }
  return W;
}

}  // namespace hhlimit
