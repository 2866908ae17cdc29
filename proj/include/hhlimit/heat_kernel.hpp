#pragma once

#include <span>
#include <stdexcept>

#include "hhlimit/grid.hpp"

namespace hhlimit {

/// Parameters of the method-of-images series for the Dirichlet heat kernel
/// of d/dt u = u_xx on [-half_length, half_length].
struct KernelParams {
  double half_length = 1.0;
  double truncation_tol = 1e-14;  ///< stop once an image pair contributes less
  int image_cap = 64;             ///< max image pairs before giving up

  void validate() const;
};

/// Raised when the image series has not reached truncation_tol within image_cap pairs.
class ImageSeriesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transition density p_t(x, y) of Brownian motion (generator Laplacian)
/// killed on leaving the interval. Accepts the closed interval; the value is
/// zero up to the truncation tolerance at the ends.
double absorbed_kernel(double t, double x, double y, const KernelParams& params);

/// Probability that the absorbed motion started at x is still alive at t.
double survival_probability(double t, double x, const KernelParams& params);

/// Nodal values of P_t f, integrating the kernel exactly against the
/// piecewise-linear interpolant of f (per-cell closed form for each image).
GridFunction apply_semigroup(double t, const GridFunction& f, const KernelParams& params);

/// Nodal values of x -> p_t(x, y), i.e. P_t delta_y.
GridFunction point_response(double t, double y, const Grid& grid, const KernelParams& params);

/// x -> int_0^t f(s) P_{t-s} delta_y(x) ds with f sampled on the uniform grid
/// s_k = k t / (f.size() - 1). Composite trapezoid in time; the last
/// sub-interval integrates the free-space Gaussian in closed form.
GridFunction source_response(std::span<const double> f, double y, double t, const Grid& grid,
                             const KernelParams& params);

/// x -> int_0^t f(s) P_{t+lag-s} delta_y(x) ds for lag > 0 (no singularity);
/// f sampled uniformly on [0, t].
GridFunction lagged_source_response(std::span<const double> f, double y, double t, double lag, const Grid& grid,
                                    const KernelParams& params);

}  // namespace hhlimit
