#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hhlimit/heat_kernel.hpp"
#include "hhlimit/rng.hpp"
#include "oracles.hpp"

using namespace hhlimit;

namespace {

const double kPi2over4 = std::numbers::pi * std::numbers::pi / 4.0;

GridFunction phi1(const Grid& g) {
  return GridFunction::sample(g, [&](double x) { return dirichlet_mode(1, g.half_length(), x); });
}

}  // namespace

TEST_CASE("KernelParams validation") {
  KernelParams p;
  CHECK_NOTHROW(p.validate());
  p.truncation_tol = 0.0;
  CHECK_THROWS(p.validate());
  p.truncation_tol = 1e-14;
  p.image_cap = 0;
  CHECK_THROWS(p.validate());
  p.image_cap = 64;
  p.half_length = -1.0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("absorbed_kernel matches the spectral series") {
  CounterRng rng(41);
  for (double l : {1.0, 2.5}) {
    KernelParams p;
    p.half_length = l;
    for (int q = 0; q < 40; ++q) {
      const double t = 0.01 + 2.0 * rng.uniform();
      const double x = l * (2.0 * rng.uniform() - 1.0), y = l * (2.0 * rng.uniform() - 1.0);
      CHECK(absorbed_kernel(t, x, y, p) == doctest::Approx(oracle::spectral_kernel(t, x, y, l)).epsilon(1e-9));
    }
  }
}

TEST_CASE("absorbed_kernel symmetry, absorption and errors") {
  KernelParams p;
  CounterRng rng(43);
  for (int q = 0; q < 200; ++q) {
    const double t = 1e-3 + rng.uniform();
    const double x = 2.0 * rng.uniform() - 1.0, y = 2.0 * rng.uniform() - 1.0;
    CHECK(absorbed_kernel(t, x, y, p) == doctest::Approx(absorbed_kernel(t, y, x, p)).epsilon(1e-13));
    CHECK(absorbed_kernel(t, x, y, p) >= 0.0);
  }
  for (double t : {0.01, 0.1, 1.0}) {
    CHECK(std::abs(absorbed_kernel(t, 1.0, 0.2, p)) <= p.truncation_tol);
    CHECK(std::abs(absorbed_kernel(t, -1.0, -0.7, p)) <= p.truncation_tol);
  }
  CHECK_THROWS(absorbed_kernel(0.0, 0.0, 0.0, p));
  CHECK_THROWS(absorbed_kernel(-1.0, 0.0, 0.0, p));
}

TEST_CASE("image series cap is reported") {
  KernelParams p;
  p.image_cap = 1;
  p.truncation_tol = 1e-300;
  CHECK_THROWS_AS(absorbed_kernel(50.0, 0.1, 0.2, p), ImageSeriesError);
}

TEST_CASE("eigen-decay by quadrature of the kernel") {
  KernelParams p;
  const double t = 0.1;
  const double factor = std::exp(-kPi2over4 * t);
  CHECK(factor == doctest::Approx(0.7813441).epsilon(1e-6));
  CHECK(std::abs(factor - 0.781361) <= 1e-4);
  for (double x : {-0.7, -0.2, 0.0, 0.45, 0.9}) {
    const double integral = oracle::integrate_pieces(
        [&](double y) { return absorbed_kernel(t, x, y, p) * oracle::mode(1, 1.0, y); }, {-1.0, x, 1.0}, 1e-12);
    CHECK(std::abs(integral - factor * oracle::mode(1, 1.0, x)) <= 1e-6);
  }
}

TEST_CASE("apply_semigroup examples") {
  KernelParams p;
  const Grid g(1.0, 400);
  const GridFunction zero = apply_semigroup(0.1, GridFunction(g), p);
  CHECK(sup_norm(zero) == 0.0);
  const GridFunction phi = phi1(g);
  const GridFunction out = apply_semigroup(0.1, phi, p);
  CHECK(sup_norm(out - 0.781361 * phi) <= 1e-4);
  CHECK(sup_norm(apply_semigroup(60.0, phi, p)) <= 1e-12);
  CHECK_THROWS(apply_semigroup(0.0, phi, p));

  CounterRng rng(47);
  GridFunction f(g);
  for (double& v : f.values()) v = 2.0 * rng.uniform() - 1.0;
  for (double t : {1e-3, 0.01, 0.3}) CHECK(sup_norm(apply_semigroup(t, f, p)) <= sup_norm(f) + 1e-12);
}

TEST_CASE("Chapman-Kolmogorov on smooth data") {
  KernelParams p;
  const Grid g(1.0, 400);
  const GridFunction f =
      GridFunction::sample(g, [](double x) { return (1.0 - x * x) * std::cos(2.0 * x) + 0.3 * std::sin(3.0 * x) * (1 - x * x); });
  for (auto [s, t] : {std::pair{0.02, 0.05}, std::pair{0.1, 0.2}}) {
    const GridFunction two = apply_semigroup(s, apply_semigroup(t, f, p), p);
    const GridFunction one = apply_semigroup(s + t, f, p);
    CHECK(sup_norm(two - one) <= 1e-5);
  }
}

TEST_CASE("submarkov mass is below one and strictly decreasing") {
  KernelParams p;
  for (double x : {-0.95, -0.5, 0.0, 0.3, 0.8}) {
    double prev = 1.0 + 1e-15;
    for (double t : {0.005, 0.02, 0.1, 0.4, 1.0, 3.0}) {
      const double m = survival_probability(t, x, p);
      const double q = oracle::integrate_pieces([&](double y) { return oracle::spectral_kernel(t, x, y, 1.0); },
                                                {-1.0, x, 1.0}, 1e-10);
      CHECK(m == doctest::Approx(q).epsilon(1e-7));
      CHECK(m <= 1.0);
      CHECK(m < prev);
      prev = m;
    }
  }
}

TEST_CASE("source_response against the spectral closed form") {
  KernelParams p;
  const Grid g(1.0, 40);
  const double y = 0.13, t = 0.3;
  auto worst_error = [&](std::size_t samples) {
    const std::vector<double> ones(samples, 1.0);
    const GridFunction r = source_response(ones, y, t, g, p);
    double worst = 0.0;
    for (int j = 1; j < g.cells(); ++j) {
      const double x = g.node(j);
      // Green's function of -u'' on [-1, 1] minus the fast-converging tail int_t^inf P_s delta_y ds.
      double exact = (1.0 - std::max(x, y)) * (1.0 + std::min(x, y)) / 2.0;
      for (int k = 1; k < 2000; ++k) {
        const double lam = oracle::mode_eigenvalue(k, 1.0);
        exact -= oracle::mode(k, 1.0, x) * oracle::mode(k, 1.0, y) * std::exp(-lam * t) / lam;
      }
      worst = std::max(worst, std::abs(r.at_node(j) - exact));
    }
    return worst;
  };
  const double coarse = worst_error(301), mid = worst_error(3001), fine = worst_error(30001);
  CHECK(coarse <= 1e-3);
  CHECK(mid < coarse);
  CHECK(fine < mid);
  CHECK(fine <= 1e-7);
}

TEST_CASE("source_response zero, linearity and errors") {
  KernelParams p;
  const Grid g(1.0, 50);
  const std::vector<double> zeros(101, 0.0);
  CHECK(sup_norm(source_response(zeros, 0.2, 0.5, g, p)) == 0.0);
  CounterRng rng(53);
  std::vector<double> f(101), h(101), fh(101);
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = 2.0 * rng.uniform() - 1.0;
    h[k] = 2.0 * rng.uniform() - 1.0;
    fh[k] = f[k] + h[k];
  }
  const GridFunction a = source_response(f, 0.2, 0.5, g, p), b = source_response(h, 0.2, 0.5, g, p);
  const GridFunction ab = source_response(fh, 0.2, 0.5, g, p);
  CHECK(sup_norm(ab - (a + b)) <= 1e-12);
  CHECK_THROWS(source_response(f, 1.0, 0.5, g, p));
  CHECK_THROWS(source_response(f, -1.2, 0.5, g, p));
  CHECK_THROWS(source_response(f, 0.0, 0.0, g, p));
}

TEST_CASE("source response estimate with a calibrated constant") {
  KernelParams p;
  const Grid g(1.0, 100);
  const double t = 0.5;
  const std::vector<double> ones(201, 1.0);
  double c1 = 0.0;
  for (double y : {-0.9, -0.5, -0.13, 0.0, 0.27, 0.6, 0.95}) c1 = std::max(c1, h10_norm(source_response(ones, y, t, g, p)));
  CHECK(c1 > 0.0);

  CounterRng rng(59);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> f(201);
    double fsup = 0.0;
    for (double& v : f) {
      v = 2.0 * rng.uniform() - 1.0;
      fsup = std::max(fsup, std::abs(v));
    }
    const double y = -0.95 + 1.9 * rng.uniform();
    CHECK(h10_norm(source_response(f, y, t, g, p)) <= c1 * fsup);
  }

  // Calibration is stable under grid refinement.
  const Grid fine(1.0, 200);
  double c1_fine = 0.0;
  for (double y : {-0.9, -0.5, -0.13, 0.0, 0.27, 0.6, 0.95})
    c1_fine = std::max(c1_fine, h10_norm(source_response(ones, y, t, fine, p)));
  CHECK(std::abs(c1_fine - c1) <= 0.05 * c1);
}

TEST_CASE("lagged response estimate with calibrated C2(eps)") {
  KernelParams p;
  const Grid g(1.0, 100);
  const double t = 0.6;
  CounterRng rng(61);
  for (double eps : {0.05, 0.1}) {
    double c2 = 0.0;
    for (double y : {-0.9, -0.6, -0.3, 0.0, 0.2, 0.5, 0.8})
      for (double tau = eps; tau <= t + 1e-12; tau += 0.01) c2 = std::max(c2, h10_norm(point_response(tau, y, g, p)));
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> f(101);
      for (double& v : f) v = 2.0 * rng.uniform() - 1.0;
      double l1 = 0.0;
      const double ds = (t - eps) / 100.0;
      for (std::size_t k = 0; k + 1 < f.size(); ++k) l1 += 0.5 * ds * (std::abs(f[k]) + std::abs(f[k + 1]));
      const double y = -0.9 + 1.8 * rng.uniform();
      CHECK(h10_norm(lagged_source_response(f, y, t - eps, eps, g, p)) <= c2 * l1 * (1.0 + 1e-9));
    }
  }
}
