#pragma once

#include <stdexcept>
#include <string>

namespace wgflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// a configured size cap (lattice count, permanent size, assignment size) was hit
class CapExceeded : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// malformed or inconsistent experiment configuration
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class NonFiniteState : public Error {
 public:
  NonFiniteState(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace wgflow
