#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hhlimit/grid.hpp"
#include "hhlimit/rng.hpp"
#include "hhlimit/tridiagonal.hpp"
#include "oracles.hpp"

using namespace hhlimit;

namespace {

GridFunction phi1(const Grid& g) {
  return GridFunction::sample(g, [&](double x) { return dirichlet_mode(1, g.half_length(), x); });
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

GridFunction random_function(const Grid& g, CounterRng& rng) {
  GridFunction u(g);
  for (double& v : u.values()) v = 2.0 * rng.uniform() - 1.0;
  return u;
}

Functional random_functional(const Grid& g, CounterRng& rng) {
  Functional F(g);
  for (int q = 0; q < 5; ++q) F.add_point_mass(-0.99 + 1.98 * rng.uniform(), 2.0 * rng.uniform() - 1.0);
  NodalField f(g);
  for (double& v : f.values()) v = rng.uniform();
  F += density_functional(f);
  return F;
}

}  // namespace

TEST_CASE("build_grid examples") {
  const Grid g = build_grid(1.0, 4);
  CHECK(g.spacing() == doctest::Approx(0.5));
  const double expected[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int j = 0; j <= 4; ++j) CHECK(g.node(j) == doctest::Approx(expected[j]));
  CHECK_THROWS(build_grid(1.0, 1));
  CHECK_THROWS(build_grid(0.0, 4));
  CHECK_THROWS(build_grid(-1.0, 4));
  const Grid g2 = build_grid(2.5, 10);
  CHECK(g2.spacing() == doctest::Approx(0.5));
  CHECK(g2.interior_count() == 9);
  CHECK(g2.node(0) == -2.5);
  CHECK(g2.node(10) == 2.5);
}

TEST_CASE("l2_norm against quadrature") {
  CHECK(l2_norm(GridFunction(Grid(1.0, 8))) == 0.0);
  const Grid g(1.0, 2000);
  CHECK(l2_norm(phi1(g)) == doctest::Approx(1.0).epsilon(1e-6));

  const Grid small(1.0, 4);
  GridFunction hat(small);
  hat.values()[1] = 1.0;
  const auto vals = to_vec(hat.values());
  const double oracle_sq = oracle::integrate_pieces(
      [&](double x) { return std::pow(oracle::interpolant(vals, 1.0, x), 2); }, {-1, -0.5, 0, 0.5, 1});
  CHECK(l2_norm(hat) == doctest::Approx(std::sqrt(oracle_sq)).epsilon(1e-12));
  CHECK(l2_norm(hat) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));

  CounterRng rng(3);
  const Grid g7(1.3, 7);
  const GridFunction u = random_function(g7, rng);
  const auto uv = to_vec(u.values());
  std::vector<double> br;
  for (int j = 0; j <= 7; ++j) br.push_back(g7.node(j));
  const double q = oracle::integrate_pieces([&](double x) { return std::pow(oracle::interpolant(uv, 1.3, x), 2); }, br);
  CHECK(l2_norm(u) == doctest::Approx(std::sqrt(q)).epsilon(1e-11));
}

TEST_CASE("h10_norm examples") {
  CHECK(h10_norm(GridFunction(Grid(1.0, 8))) == 0.0);
  const Grid g(1.0, 4000);
  CHECK(h10_norm(phi1(g)) == doctest::Approx(std::sqrt(1.0 + std::numbers::pi * std::numbers::pi / 4.0)).epsilon(1e-4));
  for (int M : {4, 10}) {
    const Grid gm(1.0, M);
    const double h = gm.spacing();
    GridFunction hat(gm);
    hat.values()[1] = 1.0;
    // Derivative is +-1/h on the two supporting cells.
    const double d2 = oracle::integrate_pieces([&](double) { return 1.0 / (h * h); }, {gm.node(1), gm.node(2), gm.node(3)});
    CHECK(h10_norm(hat) == doctest::Approx(std::sqrt(2.0 * h / 3.0 + 2.0 / h)).epsilon(1e-12));
    CHECK(h10_norm(hat) == doctest::Approx(std::sqrt(2.0 * h / 3.0 + d2)).epsilon(1e-10));
  }
}

TEST_CASE("hminus1_norm oracles") {
  CHECK(hminus1_norm(Functional(Grid(1.0, 10))) == 0.0);
  const Grid g(1.0, 2000);
  CHECK(std::abs(hminus1_norm(delta_functional(0.0, g)) - std::sqrt(std::tanh(1.0) / 2.0)) <= 1e-3);
  const NodalField f = NodalField::sample(g, [](double x) { return oracle::mode(1, 1.0, x); });
  CHECK(std::abs(hminus1_norm(density_functional(f)) - 1.0 / std::sqrt(1.0 + std::numbers::pi * std::numbers::pi / 4.0)) <=
        1e-3);

  // Dense Gram matrices assembled by quadrature on a coarse grid.
  const Grid gc(1.0, 24);
  const oracle::DenseFem fem = oracle::dense_fem(1.0, 24);
  CounterRng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const Functional F = random_functional(gc, rng);
    Eigen::VectorXd loads(gc.interior_count());
    for (int q = 0; q < gc.interior_count(); ++q) loads[q] = F.loads()[q];
    CHECK(hminus1_norm(F) == doctest::Approx(oracle::dense_dual_norm(fem, loads)).epsilon(1e-10));
  }
  const SymTridiagonal K = stiffness_matrix(gc), Mm = mass_matrix(gc);
  for (int q = 0; q < gc.interior_count(); ++q) {
    CHECK(K.diag[q] == doctest::Approx(fem.stiffness(q, q)).epsilon(1e-10));
    CHECK(Mm.diag[q] == doctest::Approx(fem.mass(q, q)).epsilon(1e-10));
    if (q + 1 < gc.interior_count()) {
      CHECK(K.off[q] == doctest::Approx(fem.stiffness(q, q + 1)).epsilon(1e-10));
      CHECK(Mm.off[q] == doctest::Approx(fem.mass(q, q + 1)).epsilon(1e-10));
    }
  }
}

TEST_CASE("delta_functional") {
  const Grid g(1.0, 4);
  const Functional at_node = delta_functional(0.0, g);
  CHECK(at_node.loads()[0] == 0.0);
  CHECK(at_node.loads()[1] == 1.0);
  CHECK(at_node.loads()[2] == 0.0);
  const Functional mid = delta_functional(0.25, g);
  CHECK(mid.loads()[1] == doctest::Approx(0.5));
  CHECK(mid.loads()[2] == doctest::Approx(0.5));
  CHECK_THROWS(delta_functional(1.0, g));
  CHECK_THROWS(delta_functional(-1.0, g));
  CHECK_THROWS(delta_functional(1.5, g));

  CounterRng rng(5);
  const Grid g9(1.0, 9);
  const GridFunction u = random_function(g9, rng);
  for (int q = 0; q < 20; ++q) {
    const double y = -0.999 + 1.998 * rng.uniform();
    CHECK(pairing(u, delta_functional(y, g9)) == doctest::Approx(eval_at(u, y)).epsilon(1e-14));
  }
}

TEST_CASE("density_functional") {
  const Grid g(1.0, 10);
  const Functional zero = density_functional(NodalField(g, 0.0));
  for (double v : zero.loads()) CHECK(v == 0.0);
  const Functional one = density_functional(NodalField(g, 1.0));
  for (double v : one.loads()) CHECK(v == doctest::Approx(g.spacing()).epsilon(1e-14));

  const Grid fine(1.0, 2000);
  const NodalField f = NodalField::sample(fine, [](double x) { return oracle::mode(1, 1.0, x); });
  CHECK(pairing(phi1(fine), density_functional(f)) == doctest::Approx(1.0).epsilon(1e-6));

  // loads_j = int hat_j f by quadrature for a nonnegative random field.
  CounterRng rng(9);
  NodalField r(g);
  for (double& v : r.values()) v = rng.uniform();
  const Functional F = density_functional(r);
  const std::vector<double> rv = to_vec(r.values());
  auto rf = [&](double x) {
    const double s = (x + 1.0) / g.spacing();
    const int j = std::min(static_cast<int>(s), g.cells() - 1);
    return (1.0 - (s - j)) * rv[j] + (s - j) * rv[j + 1];
  };
  for (int j = 1; j < g.cells(); ++j) {
    auto hat = [&](double x) { return std::max(0.0, 1.0 - std::abs(x - g.node(j)) / g.spacing()); };
    const double q =
        oracle::integrate_pieces([&](double x) { return hat(x) * rf(x); }, {g.node(j - 1), g.node(j), g.node(j + 1)});
    CHECK(F.loads()[j - 1] == doctest::Approx(q).epsilon(1e-11));
  }
}

TEST_CASE("eval_at") {
  const Grid g(1.0, 4);
  GridFunction u(g, {1.0, 2.0, 3.0});
  CHECK(eval_at(u, -1.0) == 0.0);
  CHECK(eval_at(u, 1.0) == 0.0);
  CHECK(eval_at(u, 0.0) == 2.0);
  CHECK(eval_at(u, 0.25) == doctest::Approx(2.5));
  CHECK(eval_at(u, -0.75) == doctest::Approx(0.5));
  CHECK_THROWS(eval_at(u, 1.01));
}

TEST_CASE("pairing") {
  const Grid g(1.0, 6);
  CounterRng rng(2);
  const GridFunction u = random_function(g, rng);
  const GridFunction w = random_function(g, rng);
  CHECK(pairing(u, Functional(g)) == 0.0);
  const Functional F = random_functional(g, rng);
  CHECK(pairing(2.0 * u, F) == doctest::Approx(2.0 * pairing(u, F)).epsilon(1e-14));
  CHECK(pairing(0.3 * u + 1.7 * w, F) == doctest::Approx(0.3 * pairing(u, F) + 1.7 * pairing(w, F)).epsilon(1e-13));
  CHECK(pairing(u, delta_functional(0.1, g)) == doctest::Approx(eval_at(u, 0.1)));
  CHECK_THROWS(pairing(u, Functional(Grid(1.0, 7))));
}

TEST_CASE("duality consistency and Riesz sharpness") {
  CounterRng rng(23);
  for (int M : {8, 50, 300}) {
    const Grid g(1.0, M);
    for (int trial = 0; trial < 20; ++trial) {
      const Functional F = random_functional(g, rng);
      const double dual = hminus1_norm(F);
      for (int q = 0; q < 20; ++q) {
        GridFunction theta = random_function(g, rng);
        theta *= 1.0 / h10_norm(theta);
        CHECK(pairing(theta, F) <= dual + 1e-10);
      }
      GridFunction star = riesz_representative(F);
      star *= 1.0 / h10_norm(star);
      CHECK(std::abs(pairing(star, F) - dual) <= 1e-10);
    }
  }
}

TEST_CASE("hminus1 of delta_0 converges under refinement") {
  const double exact = std::sqrt(std::tanh(1.0) / 2.0);
  double prev = std::abs(hminus1_norm(delta_functional(0.0, Grid(1.0, 10))) - exact);
  for (int M = 20; M <= 2560; M *= 2) {
    const double err = std::abs(hminus1_norm(delta_functional(0.0, Grid(1.0, M))) - exact);
    CHECK(err <= 0.55 * prev);
    prev = err;
  }
}

TEST_CASE("Poincare-type sup bound") {
  CounterRng rng(31);
  for (double l : {0.5, 1.0, 2.0})
    for (int M : {10, 100, 1000}) {
      const Grid g(l, M);
      for (int trial = 0; trial < 20; ++trial) {
        const GridFunction u = random_function(g, rng);
        CHECK(sup_norm(u) <= std::sqrt(2.0 * l) * h10_norm(u));
      }
    }
}

TEST_CASE("step_times ends exactly at the horizon") {
  const auto t = step_times(0.5, 1e-3);
  REQUIRE(t.size() == 500);
  CHECK(t.back() == 0.5);
  CHECK(t.front() == doctest::Approx(1e-3));
  const auto u = step_times(1.0, 0.3);
  REQUIRE(u.size() == 4);
  CHECK(u[3] == 1.0);
  CHECK(u[2] == doctest::Approx(0.9));
  CHECK(step_times(0.0, 0.1).empty());
}
