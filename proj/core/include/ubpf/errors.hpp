#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ubpf {

// Invalid parameters, configs or inputs. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite states, collapsed weights and other numerical failures.
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every weight of an ensemble underflowed or became non-finite at an
// observation time; the estimator is no longer defined.
class WeightCollapse : public NumericalError {
 public:
  WeightCollapse(std::size_t time, std::string ensemble)
      : NumericalError("weight collapse in ensemble '" + ensemble + "' at time " +
                       std::to_string(time)),
        time_(time),
        ensemble_(std::move(ensemble)) {}

  std::size_t time() const noexcept { return time_; }
  const std::string& ensemble() const noexcept { return ensemble_; }

 private:
  std::size_t time_;
  std::string ensemble_;
};

}  // namespace ubpf
