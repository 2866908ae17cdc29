#include "hhlimit/initial_conditions.hpp"

#include <cmath>
#include <stdexcept>

namespace hhlimit {

namespace {

void check_weights(const std::vector<double>& w, int state_count, const char* what) {
  if (static_cast<int>(w.size()) != state_count)
    throw std::invalid_argument(std::string(what) + " must list one proportion per state");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " entries must lie in [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + " must sum to one");
}

}  // namespace

GridFunction make_potential(const PotentialInit& init, const Grid& grid) {
  const double l = grid.half_length();
  switch (init.form) {
    case PotentialInit::Form::eigen:
      if (init.mode < 1) throw std::invalid_argument("eigenfunction mode must be >= 1");
      return GridFunction::sample(grid, [&](double x) { return init.amplitude * dirichlet_mode(init.mode, l, x); });
    case PotentialInit::Form::gaussian: {
      if (!(init.width > 0.0)) throw std::invalid_argument("gaussian width must be positive");
      auto bump = [&](double x) {
        const double z = (x - init.center) / init.width;
        return std::exp(-z * z);
      };
      const double gl = bump(-l), gr = bump(l);
      return GridFunction::sample(grid, [&](double x) {
        const double chord = (gl * (l - x) + gr * (x + l)) / (2.0 * l);
        return init.amplitude * (bump(x) - chord);
      });
    }
  }
  throw std::invalid_argument("unknown potential form");
}

std::vector<NodalField> make_proportions(const ProportionInit& init, const Grid& grid, int state_count) {
  if (state_count < 2) throw std::invalid_argument("need at least two states");
  std::vector<NodalField> p(state_count, NodalField(grid));
  std::vector<double> w(state_count);
  if (init.form == ProportionInit::Form::uniform) {
    check_weights(init.values, state_count, "uniform proportions");
  } else {
    check_weights(init.left, state_count, "logistic left proportions");
    check_weights(init.right, state_count, "logistic right proportions");
  }
  for (int j = 0; j <= grid.cells(); ++j) {
    const double x = grid.node(j);
    if (init.form == ProportionInit::Form::uniform) {
      w = init.values;
    } else {
      const double s = 1.0 / (1.0 + std::exp(-init.steepness * (x - init.center)));
      for (int q = 0; q < state_count; ++q) w[q] = init.left[q] + (init.right[q] - init.left[q]) * s;
    }
    double sum = 0.0;
    for (double v : w) sum += v;
    double head = 0.0;
    for (int q = 0; q + 1 < state_count; ++q) {
      const double v = w[q] / sum;
      p[q].values()[j] = v;
      head += v;
    }
    p[state_count - 1].values()[j] = std::max(0.0, 1.0 - head);
  }
  return p;
}

PotentialInit parse_potential_init(const nlohmann::json& j) {
  PotentialInit init;
  const std::string form = j.value("form", "eigen");
  if (form == "eigen") {
    init.form = PotentialInit::Form::eigen;
    init.mode = j.value("mode", 1);
  } else if (form == "gaussian") {
    init.form = PotentialInit::Form::gaussian;
    init.center = j.value("center", 0.0);
    init.width = j.at("width").get<double>();
  } else {
    throw std::invalid_argument("unknown v0 form '" + form + "'");
  }
  init.amplitude = j.at("amplitude").get<double>();
  return init;
}

ProportionInit parse_proportion_init(const nlohmann::json& j) {
  ProportionInit init;
  const std::string form = j.value("form", "uniform");
  if (form == "uniform") {
    init.form = ProportionInit::Form::uniform;
    init.values = j.at("values").get<std::vector<double>>();
  } else if (form == "logistic") {
    init.form = ProportionInit::Form::logistic;
    init.left = j.at("left").get<std::vector<double>>();
    init.right = j.at("right").get<std::vector<double>>();
    init.center = j.value("center", 0.0);
    init.steepness = j.value("steepness", 1.0);
  } else {
    throw std::invalid_argument("unknown p0 form '" + form + "'");
  }
  return init;
}

nlohmann::json to_json(const PotentialInit& init) {
  if (init.form == PotentialInit::Form::eigen)
    return {{"form", "eigen"}, {"mode", init.mode}, {"amplitude", init.amplitude}};
  return {{"form", "gaussian"}, {"center", init.center}, {"width", init.width}, {"amplitude", init.amplitude}};
}

nlohmann::json to_json(const ProportionInit& init) {
  if (init.form == ProportionInit::Form::uniform) return {{"form", "uniform"}, {"values", init.values}};
  return {{"form", "logistic"},
          {"left", init.left},
          {"right", init.right},
          {"center", init.center},
          {"steepness", init.steepness}};
}

}  // namespace hhlimit
