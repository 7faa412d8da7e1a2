#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pmon/linalg.hpp"

namespace pmon {

/// Absolute tolerance used for the linear trajectory constraints.
inline constexpr double kFeasibilityTol = 1e-12;

/// A target on the line: linear stochastic state dynamics plus the
/// observation model agents use to measure it. Immutable once built.
///
/// Construction only checks shapes. Definiteness and detectability are
/// reported by validate_scenario so that every problem can be listed at once.
class TargetModel {
 public:
  /// Throws ValidationError when shapes are inconsistent or exceed kMaxDim.
  TargetModel(Matrix A, Matrix Q, Matrix H, Matrix R, double x);

  [[nodiscard]] const Matrix& A() const { return A_; }
  [[nodiscard]] const Matrix& Q() const { return Q_; }
  [[nodiscard]] const Matrix& H() const { return H_; }
  [[nodiscard]] const Matrix& R() const { return R_; }
  /// H^T R^-1 H.
  [[nodiscard]] const Matrix& G() const { return G_; }
  [[nodiscard]] double x() const { return x_; }
  [[nodiscard]] int state_dim() const { return static_cast<int>(A_.rows()); }
  [[nodiscard]] int obs_dim() const { return static_cast<int>(H_.rows()); }

 private:
  Matrix A_, Q_, H_, R_, G_;
  double x_;
};

/// Bang-dwell schedule of one agent over a normalized period. Dwell p lasts
/// omega[p] * T, then move p lasts tau[p] * T at unit speed, rightwards for
/// odd p (1-based) and leftwards for even p.
struct AgentParams {
  double s0 = 0.0;
  std::vector<double> tau;
  std::vector<double> omega;
  double r = 1.0;

  [[nodiscard]] std::size_t moves() const { return tau.size(); }
  bool operator==(const AgentParams&) const = default;
};

struct Scenario {
  std::vector<TargetModel> targets;
  std::vector<AgentParams> agents;
  double T = 1.0;
};

enum class ViolationKind {
  kPeriod,
  kTargetOrder,
  kProcessNoise,
  kMeasurementNoise,
  kObservationGain,
  kDetectability,
  kSensingRange,
  kParameterShape,
  kNegativeDuration,
  kDurationBudget,
  kClosure,
};

[[nodiscard]] std::string to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::optional<std::size_t> target;
  std::optional<std::size_t> agent;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Every violated invariant of the scenario; empty when valid.
[[nodiscard]] std::vector<Violation> validate_scenario(const Scenario& scenario);

/// Constraint checks for a single agent (shape, signs, budget, closure).
[[nodiscard]] std::vector<Violation> validate_agent(const AgentParams& agent, std::optional<std::size_t> index = {});

/// Sum over p of (-1)^p tau_p, zero for a closed trajectory.
[[nodiscard]] double closure_residual(const AgentParams& agent);

/// (A, H) detectable: no eigenvector of A with Re(lambda) >= -1e-10 lies in ker H.
[[nodiscard]] bool is_detectable(const Matrix& A, const Matrix& H);

/// Instantaneous signal-to-noise ratio of one agent's measurement.
[[nodiscard]] double snr_diagnostic(const TargetModel& target, double agent_pos, double r, const Vector& phi);

}  // namespace pmon
