#pragma once

#include <stdexcept>
#include <string>

namespace hhlimit {

/// A simulation left its admissible set (proportions off the simplex,
/// potential outside the maximum-principle band, a violated energy bound).
class InvariantViolation : public std::runtime_error {
 public:
  InvariantViolation(const std::string& what, double time, double value)
      : std::runtime_error(what + " at t=" + std::to_string(time) + " (value " + std::to_string(value) + ")"),
        time_(time),
        value_(value) {}

  double time() const { return time_; }
  double value() const { return value_; }

 private:
  double time_;
  double value_;
};

}  // namespace hhlimit
