#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace hhlimit {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double target = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
  void print(std::ostream& out) const;
  nlohmann::json to_json() const;
};

/// Heat kernel: eigen-decay, symmetry, Chapman-Kolmogorov, submarkov mass.
ValidationReport validate_kernel();
/// Sobolev norms and dual norm against closed forms.
ValidationReport validate_norms();
/// Martingale mean, variance identity and variance bound on the default
/// kinetics (N=100, T=1).
ValidationReport validate_martingale(int replicates = 2000, std::uint64_t seed = 7);
/// Change-of-measure identity on a one-channel frozen-potential instance.
ValidationReport validate_likelihood(int paths = 10000, std::uint64_t seed = 11);

/// Dispatches on "kernel" | "norms" | "martingale" | "likelihood".
ValidationReport run_validation_suite(const std::string& suite, std::uint64_t seed);

}  // namespace hhlimit
