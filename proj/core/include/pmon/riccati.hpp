#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pmon/linalg.hpp"
#include "pmon/model.hpp"
#include "pmon/trajectory.hpp"

namespace pmon {

struct NumericsConfig {
  int base_steps = 2000;     ///< uniform RK4 steps per period before breakpoints are inserted
  double cycle_tol = 1e-9;   ///< relative period-start residual accepted as converged
  int max_cycles = 500;
};

/// eta(q) = start + slope * (q - q_k) on grid interval k.
struct EtaSegment {
  double start = 0.0;
  double slope = 0.0;

  [[nodiscard]] double at(double dq) const { return start + slope * dq; }
};

/// Normalized-time grid shared by every target, with each target's eta
/// stored as an affine function on every interval. Nodes include every eta
/// breakpoint, so each RK4 step sees a smooth integrand.
class CoverageGrid {
 public:
  CoverageGrid(std::vector<double> nodes, std::vector<std::vector<EtaSegment>> eta);

  static CoverageGrid from_paths(std::span<const PiecewiseLinearPath> paths, std::span<const double> ranges,
                                 std::span<const double> target_positions, int base_steps);
  static CoverageGrid from_scenario(const Scenario& scenario, int base_steps, ScheduleOptions options = {});

  [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }
  [[nodiscard]] std::size_t intervals() const { return nodes_.size() - 1; }
  [[nodiscard]] std::size_t targets() const { return eta_.size(); }
  [[nodiscard]] const std::vector<EtaSegment>& eta(std::size_t target) const { return eta_.at(target); }
  /// eta_i at node k (eta is continuous in q).
  [[nodiscard]] double eta_at_node(std::size_t target, std::size_t k) const;
  /// True when eta_i > 0 on some interval.
  [[nodiscard]] bool observed(std::size_t target) const;

 private:
  std::vector<double> nodes_;
  std::vector<std::vector<EtaSegment>> eta_;
};

/// Periodic steady-state covariance of one target on the grid.
struct CovarianceCycle {
  std::size_t target_index = 0;
  std::shared_ptr<const CoverageGrid> grid;
  std::vector<Matrix> omega_bar;       ///< one matrix per grid node
  double periodic_residual = 0.0;      ///< ||Omega(1) - Omega(0)||_F / ||Omega(0)||_F
  std::vector<double> residual_history;

  [[nodiscard]] std::size_t cycles() const { return residual_history.size(); }
};

/// T (A Omega + Omega A^T + Q - eta Omega G Omega), symmetrized.
[[nodiscard]] Matrix riccati_rhs(const Matrix& omega, double eta, const TargetModel& target, double T);

/// One period of the rescaled Riccati equation, one RK4 step per interval.
/// Throws DivergenceError on non-finite values.
[[nodiscard]] std::vector<Matrix> integrate_period(const Matrix& omega0, const CoverageGrid& grid,
                                                   std::size_t target, const TargetModel& model, double T);
[[nodiscard]] std::vector<Matrix> integrate_period(const Matrix& omega0, const Scenario& scenario,
                                                   std::size_t target, int base_steps = 2000);

struct CycleOptions {
  double tol = 1e-9;
  int max_cycles = 500;
  std::optional<Matrix> seed;  ///< SPD initial Omega(0); defaults to Q
};

/// Picard iteration over periods until the period-start residual is below tol.
/// Throws UnobservedTargetError or NonConvergenceError.
[[nodiscard]] CovarianceCycle limit_cycle(std::shared_ptr<const CoverageGrid> grid, const TargetModel& model,
                                          std::size_t target, double T, const CycleOptions& options = {});
[[nodiscard]] CovarianceCycle limit_cycle(const Scenario& scenario, std::size_t target, double tol = 1e-9,
                                          int max_cycles = 500);

/// int_0^1 tr(Omega(q)) dq for one cycle.
[[nodiscard]] double cycle_cost(const CovarianceCycle& cycle, const TargetModel& model, double T);

/// Sum of the per-target integrals; the time-averaged steady-state error.
[[nodiscard]] double steady_state_cost(const Scenario& scenario, std::span<const CovarianceCycle> cycles);

/// Grid, limit cycles and cost for a whole scenario.
struct Evaluation {
  std::shared_ptr<const CoverageGrid> grid;
  std::vector<CovarianceCycle> cycles;
  double cost = 0.0;
};

struct EvaluateOptions {
  NumericsConfig numerics;
  ScheduleOptions schedule;
  /// Optional per-target warm starts, e.g. from a previous descent iterate.
  std::vector<Matrix> seeds;
};

[[nodiscard]] Evaluation evaluate(const Scenario& scenario, const EvaluateOptions& options = {});

/// Same pipeline for arbitrary agent paths (one per scenario agent).
[[nodiscard]] Evaluation evaluate_paths(const Scenario& scenario, std::span<const PiecewiseLinearPath> paths,
                                        const NumericsConfig& numerics = {});

}  // namespace pmon
