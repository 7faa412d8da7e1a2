#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmon/linalg.hpp"
#include "pmon/model.hpp"
#include "pmon/riccati.hpp"

namespace pmon {

/// One differentiable parameter: an agent's s0, tau_p or omega_p, or the period.
struct ParameterId {
  enum class Kind { kS0, kTau, kOmega, kPeriod };
  Kind kind = Kind::kPeriod;
  std::size_t agent = 0;
  std::size_t index = 0;  ///< 0-based stage for tau / omega

  /// e.g. "agent1.s0", "agent2.tau3", "global.T" (1-based indices).
  [[nodiscard]] std::string name() const;
  bool operator==(const ParameterId&) const = default;
};

/// Per agent: s0, tau_1..P, omega_1..P; then the period last.
[[nodiscard]] std::vector<ParameterId> parameter_ids(const Scenario& scenario);

/// d eta_i / d theta on every grid interval, affine in q like eta itself:
/// value = start(k, n) + slope(k, n) * (q - q_k).
struct EtaDerivativeTable {
  std::size_t target_index = 0;
  std::vector<ParameterId> params;
  Eigen::MatrixXd start;
  Eigen::MatrixXd slope;

  /// False when the derivative vanishes on every interval.
  [[nodiscard]] bool active(std::size_t n) const;
};

[[nodiscard]] EtaDerivativeTable eta_derivative_table(const Scenario& scenario, const CoverageGrid& grid,
                                                      std::size_t target, ScheduleOptions options = {});

/// Homogeneous transition of the variational equation of one target.
struct SensitivitySystem {
  std::size_t target_index = 0;
  std::shared_ptr<const CoverageGrid> grid;
  std::vector<Matrix> sigma_h;  ///< one per grid node, identity at q = 0
  Matrix sigma_h_end;
  double spectral_radius_end = 0.0;
  /// int_0^1 Sigma_H^T Sigma_H dq, so that int tr(Sigma_H L Sigma_H^T) = tr(L * gram).
  Matrix gram;
};

[[nodiscard]] SensitivitySystem homogeneous_transition(const CovarianceCycle& cycle, const Scenario& scenario);

/// Variational forcing of `param` at one point: -T deta * Omega G Omega, plus
/// the unscaled Riccati drift for the period.
[[nodiscard]] Matrix variational_forcing(const ParameterId& param, const Matrix& omega, double eta, double deta,
                                         const TargetModel& target, double T);

/// Zero-initial-condition solution of the forced variational equation, one
/// matrix per grid node.
[[nodiscard]] std::vector<Matrix> particular_solution(const ParameterId& param, const CovarianceCycle& cycle,
                                                      const Scenario& scenario);

/// Solves L = S L S^T + C through (I - S (x) S) vec L = vec C.
/// Throws UniquenessError when the spectral radius of S is 1 or more.
[[nodiscard]] Matrix solve_stein(const Matrix& S, const Matrix& C);

[[nodiscard]] double stein_residual(const Matrix& S, const Matrix& C, const Matrix& lambda);

/// d Omega_bar / d theta = Sigma_H L Sigma_H^T + Sigma_ZI at every node.
[[nodiscard]] std::vector<Matrix> sensitivity_trace(const SensitivitySystem& system, const Matrix& lambda,
                                                    std::span<const Matrix> sigma_zi);

/// Per-interval defect of a sensitivity trace against the variational ODE:
/// ||X_{k+1} - X_k - h/2 (f_k + f_{k+1}) - h^2/12 (f'_k - f'_{k+1})||_F, with
/// f and its derivative along the solution using the interval's own eta.
[[nodiscard]] std::vector<double> variational_residuals(const ParameterId& param, std::span<const Matrix> trace,
                                                        const CovarianceCycle& cycle, const Scenario& scenario);

struct GradientBundle {
  struct Agent {
    double s0 = 0.0;
    std::vector<double> tau;
    std::vector<double> omega;
  };
  std::vector<Agent> agents;
  double period = 0.0;

  /// Shaped like `scenario`, all zeros.
  [[nodiscard]] static GradientBundle zeros(const Scenario& scenario);
  /// Values in parameter_ids order.
  [[nodiscard]] std::vector<double> values() const;
  [[nodiscard]] double& at(const ParameterId& id);
  [[nodiscard]] double at(const ParameterId& id) const;
  [[nodiscard]] bool all_finite() const;
};

/// Periodicity and Stein checks collected while assembling the gradient.
struct TargetSensitivityReport {
  std::size_t target_index = 0;
  double spectral_radius = 0.0;
  double max_stein_residual = 0.0;    ///< divided by 1 + ||L||_F
  double max_periodicity_gap = 0.0;   ///< ||X(1) - X(0)||_F / (1 + ||L||_F)
  std::size_t active_parameters = 0;
};

struct GradientResult {
  GradientBundle gradient;
  std::vector<TargetSensitivityReport> reports;
};

[[nodiscard]] GradientResult cost_gradient_with_report(const Scenario& scenario, std::span<const CovarianceCycle> cycles);
[[nodiscard]] GradientBundle cost_gradient(const Scenario& scenario, std::span<const CovarianceCycle> cycles);

}  // namespace pmon
