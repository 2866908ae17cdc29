#include "hhlimit/kinetics.hpp"

#include <cmath>
#include <stdexcept>

namespace hhlimit {

namespace {

std::size_t arity(RateForm::Kind kind) {
  switch (kind) {
    case RateForm::Kind::constant: return 1;
    case RateForm::Kind::sigmoid: return 4;
    case RateForm::Kind::exp_clamped: return 2;
  }
  return 0;
}

const char* kind_name(RateForm::Kind kind) {
  switch (kind) {
    case RateForm::Kind::constant: return "constant";
    case RateForm::Kind::sigmoid: return "sigmoid";
    case RateForm::Kind::exp_clamped: return "exp_clamped";
  }
  return "?";
}

RateForm::Kind parse_kind(const std::string& s) {
  if (s == "constant") return RateForm::Kind::constant;
  if (s == "sigmoid") return RateForm::Kind::sigmoid;
  if (s == "exp_clamped") return RateForm::Kind::exp_clamped;
  throw std::invalid_argument("unknown rate form '" + s + "'");
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double RateForm::raw(double V) const {
  switch (kind) {
    case Kind::constant: return params[0];
    case Kind::sigmoid: return params[0] + params[1] * logistic(params[2] * (V - params[3]));
    case Kind::exp_clamped: return params[0] * std::exp(params[1] * V);
  }
  return 0.0;
}

double RateForm::raw_lipschitz(double lo, double hi) const {
  switch (kind) {
    case Kind::constant: return 0.0;
    case Kind::sigmoid: {
      // derivative b k s(1-s) peaks at V0
      const double v = std::clamp(params[3], lo, hi);
      const double s = logistic(params[2] * (v - params[3]));
      return std::abs(params[1] * params[2]) * s * (1.0 - s);
    }
    case Kind::exp_clamped:
      return std::abs(params[1]) * std::max(std::abs(raw(lo)), std::abs(raw(hi)));
  }
  return 0.0;
}

int ChannelKinetics::index_of(const std::string& name) const {
  for (int s = 0; s < state_count(); ++s)
    if (states_[s].name == name) return s;
  throw std::invalid_argument("unknown channel state '" + name + "'");
}

double ChannelKinetics::rate(int from, int to, double V) const {
  if (from == to) throw std::invalid_argument("rate requires distinct states");
  const int n = state_count();
  if (from < 0 || from >= n || to < 0 || to >= n) throw std::out_of_range("state index out of range");
  return std::clamp(forms_[static_cast<std::size_t>(from) * n + to].raw(V), alpha_min_, alpha_max_);
}

double ChannelKinetics::exit_rate(int from, double V) const {
  double total = 0.0;
  for (int to = 0; to < state_count(); ++to)
    if (to != from) total += rate(from, to, V);
  return total;
}

double ChannelKinetics::rates_from(int from, double V, std::span<double> out) const {
  const int n = state_count();
  double total = 0.0;
  for (int to = 0; to < n; ++to) {
    if (to == from) {
      out[to] = 0.0;
      continue;
    }
    const double r = std::clamp(forms_[static_cast<std::size_t>(from) * n + to].raw(V), alpha_min_, alpha_max_);
    out[to] = r;
    total += r;
  }
  return total;
}

RateMatrix ChannelKinetics::generator_matrix(double V) const {
  const int n = state_count();
  RateMatrix A{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  for (int from = 0; from < n; ++from) {
    double exit = 0.0;
    for (int to = 0; to < n; ++to) {
      if (to == from) continue;
      const double r = rate(from, to, V);
      A(from, to) = r;
      exit += r;
    }
    A(from, from) = -exit;
  }
  return A;
}

double ChannelKinetics::lipschitz_bound(int from, int to, double lo, double hi) const {
  if (from == to) throw std::invalid_argument("rate requires distinct states");
  if (lo > hi) std::swap(lo, hi);
  const RateForm& f = forms_[static_cast<std::size_t>(from) * state_count() + to];
  double lip = f.raw_lipschitz(lo, hi);
  // Wherever the clamp is active the slope is zero; where it is not, a*k*exp(kV) <= |k| alpha_max.
  if (f.kind == RateForm::Kind::exp_clamped) lip = std::min(lip, std::abs(f.params[1]) * alpha_max_);
  return lip;
}

ChannelKinetics make_kinetics(const KineticsSpec& spec) {
  const int n = static_cast<int>(spec.states.size());
  if (n < 2) throw std::invalid_argument("kinetics need at least two states");
  if (!(spec.alpha_min > 0.0)) throw std::invalid_argument("alpha_min must be positive");
  if (!(spec.alpha_max >= spec.alpha_min) || !std::isfinite(spec.alpha_max))
    throw std::invalid_argument("alpha_max must be finite and at least alpha_min");

  ChannelKinetics k;
  k.spec_ = spec;
  k.states_ = spec.states;
  k.alpha_min_ = spec.alpha_min;
  k.alpha_max_ = spec.alpha_max;
  k.v_minus_ = spec.states[0].driving_potential;
  k.v_plus_ = spec.states[0].driving_potential;
  for (int s = 0; s < n; ++s) {
    const StateSpec& st = spec.states[s];
    for (int q = 0; q < s; ++q)
      if (spec.states[q].name == st.name) throw std::invalid_argument("duplicate state name '" + st.name + "'");
    if (!(st.conductance >= 0.0) || !std::isfinite(st.conductance))
      throw std::invalid_argument("conductance of state '" + st.name + "' must be nonnegative");
    if (!std::isfinite(st.driving_potential)) throw std::invalid_argument("driving potential must be finite");
    k.v_minus_ = std::min(k.v_minus_, st.driving_potential);
    k.v_plus_ = std::max(k.v_plus_, st.driving_potential);
    k.max_conductance_ = std::max(k.max_conductance_, st.conductance);
  }
  if (!(k.v_minus_ < 0.0)) throw std::invalid_argument("the smallest driving potential must be negative");
  if (!(k.v_plus_ > 0.0)) throw std::invalid_argument("the largest driving potential must be positive");

  k.forms_.assign(static_cast<std::size_t>(n) * n, RateForm{});
  std::vector<bool> seen(static_cast<std::size_t>(n) * n, false);
  for (const RateSpec& r : spec.rates) {
    const int from = k.index_of(r.from);
    const int to = k.index_of(r.to);
    if (from == to) throw std::invalid_argument("self transition for state '" + r.from + "'");
    const std::size_t idx = static_cast<std::size_t>(from) * n + to;
    if (seen[idx]) throw std::invalid_argument("duplicate rate " + r.from + " -> " + r.to);
    if (r.form.params.size() != arity(r.form.kind))
      throw std::invalid_argument(std::string("wrong parameter count for rate form ") + kind_name(r.form.kind));
    for (double p : r.form.params)
      if (!std::isfinite(p)) throw std::invalid_argument("rate parameters must be finite");
    seen[idx] = true;
    k.forms_[idx] = r.form;
  }
  for (int from = 0; from < n; ++from)
    for (int to = 0; to < n; ++to)
      if (from != to && !seen[static_cast<std::size_t>(from) * n + to])
        throw std::invalid_argument("missing rate " + spec.states[from].name + " -> " + spec.states[to].name);
  return k;
}

KineticsSpec parse_kinetics(const nlohmann::json& j) {
  KineticsSpec spec;
  for (const auto& s : j.at("states"))
    spec.states.push_back({s.at("name").get<std::string>(), s.at("c").get<double>(), s.at("v").get<double>()});
  for (const auto& r : j.at("rates")) {
    RateForm form{parse_kind(r.at("form").get<std::string>()), r.at("params").get<std::vector<double>>()};
    spec.rates.push_back({r.at("from").get<std::string>(), r.at("to").get<std::string>(), std::move(form)});
  }
  if (j.contains("clamp")) {
    const auto clamp = j.at("clamp").get<std::vector<double>>();
    if (clamp.size() != 2) throw std::invalid_argument("clamp must be [alpha_min, alpha_max]");
    spec.alpha_min = clamp[0];
    spec.alpha_max = clamp[1];
  }
  return spec;
}

nlohmann::json to_json(const KineticsSpec& spec) {
  nlohmann::json j;
  j["states"] = nlohmann::json::array();
  for (const auto& s : spec.states)
    j["states"].push_back({{"name", s.name}, {"c", s.conductance}, {"v", s.driving_potential}});
  j["rates"] = nlohmann::json::array();
  for (const auto& r : spec.rates)
    j["rates"].push_back({{"from", r.from}, {"to", r.to}, {"form", kind_name(r.form.kind)}, {"params", r.form.params}});
  j["clamp"] = {spec.alpha_min, spec.alpha_max};
  return j;
}

}  // namespace hhlimit
