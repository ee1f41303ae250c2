#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace difcast {

//! Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

//! A state became non-finite during time integration.
class IntegrationDiverged : public Error {
 public:
  IntegrationDiverged(std::int64_t step, const std::string& what)
      : Error("integration diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

class InsufficientLength : public Error {
 public:
  InsufficientLength(std::int64_t required, std::int64_t available)
      : Error("series too short: required " + std::to_string(required) + " samples, available " +
              std::to_string(available)),
        required_(required),
        available_(available) {}
  std::int64_t required() const { return required_; }
  std::int64_t available() const { return available_; }

 private:
  std::int64_t required_;
  std::int64_t available_;
};

class TuningFailed : public Error {
 public:
  using Error::Error;
};

class BandwidthTooSmall : public Error {
 public:
  using Error::Error;
};

//! Every kernel weight between a query point and the training data underflowed.
class OutOfSupport : public Error {
 public:
  using Error::Error;
};

class EigensolverFailed : public Error {
 public:
  EigensolverFailed(int converged, int requested, const std::string& detail)
      : Error("eigensolver failed: " + std::to_string(converged) + " of " + std::to_string(requested) +
              " eigenpairs converged (" + detail + ")"),
        converged_(converged) {}
  int converged() const { return converged_; }

 private:
  int converged_;
};

//! Total probability vanished (e.g. everything clipped away).
class DegenerateDensity : public Error {
 public:
  DegenerateDensity(std::int64_t step, const std::string& what)
      : Error("degenerate density at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class StageFailed : public Error {
 public:
  StageFailed(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace difcast
