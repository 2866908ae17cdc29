#include "hhlimit/heat_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hhlimit {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;  // 1/sqrt(pi)

double gaussian(double z, double t) {
  return std::exp(-z * z / (4.0 * t)) / std::sqrt(4.0 * std::numbers::pi * t);
}

// One image term sign * g(Y - center) in the shifted coordinate Y = y + l.
struct Image {
  double center;
  double sign;
};

// Images of pair k (k = 0 gives the direct term and its first reflection).
int images_of_pair(int k, double X, double L, Image out[4]) {
  if (k == 0) {
    out[0] = {X, 1.0};
    out[1] = {-X, -1.0};
    return 2;
  }
  const double shift = 2.0 * k * L;
  out[0] = {X + shift, 1.0};
  out[1] = {X - shift, 1.0};
  out[2] = {-X - shift, -1.0};
  out[3] = {-X + shift, -1.0};
  return 4;
}

[[noreturn]] void throw_unconverged(double t) {
  throw ImageSeriesError("image series did not converge within image_cap at t = " + std::to_string(t));
}

void require_positive_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("time must be positive");
}

// Mass of the Gaussian g(. - center) on [0, L].
double gaussian_mass(double center, double L, double s) {
  return 0.5 * (std::erf((L - center) / s) - std::erf(-center / s));
}

// int_0^tau g(u, d) du
double gaussian_time_integral(double tau, double d) {
  const double a = std::abs(d);
  return std::sqrt(tau / std::numbers::pi) * std::exp(-a * a / (4.0 * tau)) -
         0.5 * a * std::erfc(a / (2.0 * std::sqrt(tau)));
}

}  // namespace

void KernelParams::validate() const {
  if (!(half_length > 0.0)) throw std::invalid_argument("kernel half_length must be positive");
  if (!(truncation_tol > 0.0)) throw std::invalid_argument("truncation_tol must be positive");
  if (image_cap < 1) throw std::invalid_argument("image_cap must be at least 1");
}

double absorbed_kernel(double t, double x, double y, const KernelParams& params) {
  params.validate();
  require_positive_time(t);
  const double l = params.half_length;
  if (std::abs(x) > l || std::abs(y) > l) throw std::out_of_range("kernel arguments outside the interval");
  const double L = 2.0 * l;
  const double X = x + l, Y = y + l;
  double sum = 0.0;
  Image im[4];
  for (int k = 0; k <= params.image_cap; ++k) {
    const int n = images_of_pair(k, X, L, im);
    double pair = 0.0, magnitude = 0.0;
    for (int q = 0; q < n; ++q) {
      const double g = gaussian(Y - im[q].center, t);
      pair += im[q].sign * g;
      magnitude += g;
    }
    sum += pair;
    if (k >= 1 && magnitude < params.truncation_tol) return std::max(sum, 0.0);
  }
  throw_unconverged(t);
}

double survival_probability(double t, double x, const KernelParams& params) {
  params.validate();
  require_positive_time(t);
  const double l = params.half_length;
  if (std::abs(x) > l) throw std::out_of_range("position outside the interval");
  const double L = 2.0 * l;
  const double X = x + l;
  const double s = std::sqrt(4.0 * t);
  double sum = 0.0;
  Image im[4];
  for (int k = 0; k <= params.image_cap; ++k) {
    const int n = images_of_pair(k, X, L, im);
    double pair = 0.0, magnitude = 0.0;
    for (int q = 0; q < n; ++q) {
      const double m = gaussian_mass(im[q].center, L, s);
      pair += im[q].sign * m;
      magnitude += m;
    }
    sum += pair;
    if (k >= 1 && magnitude < params.truncation_tol) return std::clamp(sum, 0.0, 1.0);
  }
  throw_unconverged(t);
}

GridFunction apply_semigroup(double t, const GridFunction& f, const KernelParams& params) {
  params.validate();
  require_positive_time(t);
  const Grid& grid = f.grid();
  if (std::abs(grid.half_length() - params.half_length) > 1e-12 * params.half_length)
    throw std::invalid_argument("kernel and grid half lengths differ");

  const int M = grid.cells();
  const double h = grid.spacing();
  const double L = 2.0 * grid.half_length();
  const double s = std::sqrt(4.0 * t);

  std::vector<double> fv(M + 1), Yc(M + 1);
  double fmax = 0.0;
  for (int j = 0; j <= M; ++j) {
    fv[j] = f.at_node(j);
    Yc[j] = j * h;
    fmax = std::max(fmax, std::abs(fv[j]));
  }

  std::vector<double> erf_at(M + 1), exp_at(M + 1);
  GridFunction out(grid);
  auto vals = out.values();
  Image im[4];
  for (int i = 1; i < M; ++i) {
    const double X = Yc[i];
    double sum = 0.0;
    bool converged = false;
    for (int k = 0; k <= params.image_cap && !converged; ++k) {
      const int n = images_of_pair(k, X, L, im);
      double magnitude = 0.0;
      for (int q = 0; q < n; ++q) {
        const double m = im[q].center;
        for (int j = 0; j <= M; ++j) {
          const double z = (Yc[j] - m) / s;
          erf_at[j] = std::erf(z);
          exp_at[j] = std::exp(-z * z);
        }
        double term = 0.0;
        for (int c = 0; c < M; ++c) {
          const double B = (fv[c + 1] - fv[c]) / h;
          const double A = fv[c] - B * Yc[c];
          term += (A + B * m) * 0.5 * (erf_at[c + 1] - erf_at[c]) +
                  B * s * 0.5 * kInvSqrtPi * (exp_at[c] - exp_at[c + 1]);
        }
        sum += im[q].sign * term;
        magnitude += fmax * 0.5 * (erf_at[M] - erf_at[0]);
      }
      converged = k >= 1 && magnitude < params.truncation_tol;
    }
    if (!converged) throw_unconverged(t);
    vals[i - 1] = sum;
  }
  return out;
}

GridFunction point_response(double t, double y, const Grid& grid, const KernelParams& params) {
  return GridFunction::sample(grid, [&](double x) { return absorbed_kernel(t, x, y, params); });
}

GridFunction source_response(std::span<const double> f, double y, double t, const Grid& grid,
                             const KernelParams& params) {
  params.validate();
  require_positive_time(t);
  if (!grid.contains_interior(y)) throw std::out_of_range("source position must lie strictly inside the interval");
  if (f.size() < 2) throw std::invalid_argument("source samples need at least two time points");
  const std::size_t n = f.size() - 1;
  const double tau = t / static_cast<double>(n);

  GridFunction out(grid);
  auto vals = out.values();
  for (int j = 1; j < grid.cells(); ++j) {
    const double x = grid.node(j);
    double acc = 0.0;
    // Interior trapezoid panels [s_k, s_{k+1}] for k <= n-2: both ends have t - s > 0.
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double u0 = t - k * tau, u1 = t - (k + 1) * tau;
      acc += 0.5 * tau * (f[k] * absorbed_kernel(u0, x, y, params) + f[k + 1] * absorbed_kernel(u1, x, y, params));
    }
    // Last panel: the direct Gaussian is integrated exactly, the smooth image
    // remainder (zero at u = 0) by the trapezoid rule.
    const double d = x - y;
    const double fbar = 0.5 * (f[n - 1] + f[n]);
    const double remainder = absorbed_kernel(tau, x, y, params) - gaussian(d, tau);
    acc += fbar * gaussian_time_integral(tau, d) + 0.5 * tau * f[n - 1] * remainder;
    vals[j - 1] = acc;
  }
  return out;
}

GridFunction lagged_source_response(std::span<const double> f, double y, double t, double lag, const Grid& grid,
                                    const KernelParams& params) {
  params.validate();
  require_positive_time(t);
  require_positive_time(lag);
  if (!grid.contains_interior(y)) throw std::out_of_range("source position must lie strictly inside the interval");
  if (f.size() < 2) throw std::invalid_argument("source samples need at least two time points");
  const std::size_t n = f.size() - 1;
  const double tau = t / static_cast<double>(n);

  GridFunction out(grid);
  auto vals = out.values();
  for (int j = 1; j < grid.cells(); ++j) {
    const double x = grid.node(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double u0 = t + lag - k * tau, u1 = t + lag - (k + 1) * tau;
      acc += 0.5 * tau * (f[k] * absorbed_kernel(u0, x, y, params) + f[k + 1] * absorbed_kernel(u1, x, y, params));
    }
    vals[j - 1] = acc;
  }
  return out;
}

}  // namespace hhlimit
