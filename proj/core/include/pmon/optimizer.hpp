#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <vector>

#include "pmon/errors.hpp"
#include "pmon/ipa.hpp"
#include "pmon/model.hpp"
#include "pmon/riccati.hpp"

namespace pmon {

struct DescentConfig {
  double kappa = 0.02;
  double epsilon = 1e-4;
  int max_iter = 100;
  double T_min = 0.1;
};

/// Throws ValidationError unless every field is positive (max_iter may be 0).
void check_config(const DescentConfig& config);

/// Euclidean projection of (tau, omega) onto {tau, omega >= 0,
/// sum(tau + omega) <= 1, sum (-1)^p tau_p = 0}; s0 and r are untouched.
[[nodiscard]] AgentParams project(const AgentParams& agent);

struct DescentRecord {
  int iter = 0;
  double J = 0.0;
  /// Scaled displacement of the step that produced this iterate; infinite
  /// for the initial row.
  double grad_norm = std::numeric_limits<double>::infinity();
  double T = 0.0;
  std::vector<AgentParams> agents;
};

struct DescentHistory {
  std::vector<DescentRecord> records;
  bool projected_initial = false;  ///< the starting point needed projection
  bool converged = false;          ///< stopped on grad_norm <= epsilon
};

struct DescentResult {
  Scenario scenario;
  DescentHistory history;
};

/// Raised when an iterate cannot be evaluated; carries everything computed
/// before the failure and the underlying error.
class DescentFailure : public Error {
 public:
  DescentFailure(int iterate, DescentHistory history, std::exception_ptr cause, const std::string& what)
      : Error(what), iterate_(iterate), history_(std::move(history)), cause_(std::move(cause)) {}
  [[nodiscard]] int iterate() const { return iterate_; }
  [[nodiscard]] const DescentHistory& history() const { return history_; }
  [[nodiscard]] std::exception_ptr cause() const { return cause_; }

 private:
  int iterate_;
  DescentHistory history_;
  std::exception_ptr cause_;
};

using DescentObserver = std::function<void(const DescentRecord&)>;

/// Projected gradient descent over every agent's schedule and the period.
[[nodiscard]] DescentResult descend(const Scenario& scenario, const DescentConfig& config,
                                    const NumericsConfig& numerics = {}, const DescentObserver& observer = {});

}  // namespace pmon
