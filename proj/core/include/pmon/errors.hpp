#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmon {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a model or schedule invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConstraintViolation : public ValidationError {
 public:
  ConstraintViolation(std::string constraint, const std::string& what)
      : ValidationError(what), constraint_(std::move(constraint)) {}
  [[nodiscard]] const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Sampled trajectory exceeds the unit speed bound or is not periodic.
class InfeasibleTrajectoryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A target never falls inside any agent's sensing range, so no periodic
/// covariance solution is guaranteed.
class UnobservedTargetError : public Error {
 public:
  UnobservedTargetError(std::size_t target, const std::string& what) : Error(what), target_(target) {}
  [[nodiscard]] std::size_t target() const { return target_; }

 private:
  std::size_t target_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t target, double q, const std::string& what) : Error(what), target_(target), q_(q) {}
  [[nodiscard]] std::size_t target() const { return target_; }
  [[nodiscard]] double q() const { return q_; }

 private:
  std::size_t target_;
  double q_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(std::size_t target, std::vector<double> residuals, const std::string& what)
      : Error(what), target_(target), residuals_(std::move(residuals)) {}
  [[nodiscard]] std::size_t target() const { return target_; }
  [[nodiscard]] const std::vector<double>& residual_history() const { return residuals_; }

 private:
  std::size_t target_;
  std::vector<double> residuals_;
};

/// The periodic sensitivity (Stein) equation has no unique solution.
class UniquenessError : public Error {
 public:
  UniquenessError(double spectral_radius, const std::string& what) : Error(what), radius_(spectral_radius) {}
  [[nodiscard]] double spectral_radius() const { return radius_; }

 private:
  double radius_;
};

class TrialFailureError : public Error {
 public:
  TrialFailureError(std::uint64_t seed, std::size_t trial, const std::string& what)
      : Error(what), seed_(seed), trial_(trial) {}
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::size_t trial() const { return trial_; }

 private:
  std::uint64_t seed_;
  std::size_t trial_;
};

}  // namespace pmon
