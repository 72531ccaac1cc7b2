#pragma once

#include <stdexcept>
#include <string>

namespace tmflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid sampler, functional, or experiment parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Two ensembles were paired index-by-index without sharing a base sample.
class CouplingError : public Error {
 public:
  using Error::Error;
};

/// Coincident particles where the k-NN entropy estimator needs distinct ones.
class DegenerateConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite positions appeared while integrating a flow.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace tmflow
