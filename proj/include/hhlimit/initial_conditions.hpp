#pragma once

#include <vector>

#include <json.hpp>

#include "hhlimit/grid.hpp"

namespace hhlimit {

/// Initial potential: amplitude * sin(mode*pi*(x+l)/(2l)), or a Gaussian bump
/// amplitude * exp(-((x-center)/width)^2) with the chord through its end
/// values subtracted so that it vanishes at both ends.
struct PotentialInit {
  enum class Form { eigen, gaussian };
  Form form = Form::eigen;
  int mode = 1;
  double amplitude = 0.5;
  double center = 0.0;
  double width = 0.25;
};

/// Initial proportions: constant per state, or a logistic blend
/// left + (right - left) * sigma(steepness * (x - center)).
struct ProportionInit {
  enum class Form { uniform, logistic };
  Form form = Form::uniform;
  std::vector<double> values;  // uniform
  std::vector<double> left;    // logistic
  std::vector<double> right;   // logistic
  double center = 0.0;
  double steepness = 1.0;
};

GridFunction make_potential(const PotentialInit& init, const Grid& grid);

/// One field per state; every node sums to one (last state takes the remainder).
std::vector<NodalField> make_proportions(const ProportionInit& init, const Grid& grid, int state_count);

PotentialInit parse_potential_init(const nlohmann::json& j);
ProportionInit parse_proportion_init(const nlohmann::json& j);
nlohmann::json to_json(const PotentialInit& init);
nlohmann::json to_json(const ProportionInit& init);

}  // namespace hhlimit
