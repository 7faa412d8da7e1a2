#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pmon/ipa.hpp"
#include "pmon/model.hpp"
#include "pmon/riccati.hpp"

namespace pmon {

struct McConfig {
  std::size_t n_trials = 500;
  double dt = 1e-3;
  int n_periods = 10;
  int burn_in_periods = 5;
  std::uint64_t rng_seed = 1;
  /// Each step's Brownian increments are sums of this many unit normals, so
  /// a run at dt with 2k substeps shares its noise path with a run at dt/2
  /// with k substeps.
  int noise_substeps = 1;
};

/// Throws ValidationError on dt <= 0, no trials, no substeps or burn-in >= periods.
void check_config(const McConfig& config);

/// Name of the generator behind every Monte Carlo stream.
inline constexpr const char* kRngAlgorithm = "mt19937_64/box-muller";

struct McTargetReport {
  std::size_t target_index = 0;
  double empirical_mse = 0.0;  ///< time and trial average of ||phi_hat - phi||^2 after burn-in
  double predicted = 0.0;      ///< int_0^1 tr(Omega_bar) dq
  [[nodiscard]] double ratio() const { return empirical_mse / predicted; }
};

struct McReport {
  std::vector<McTargetReport> targets;
  double empirical_total = 0.0;
  double predicted_total = 0.0;
  std::size_t n_trials = 0;
  double dt = 0.0;  ///< step actually used: T divided by a whole number of steps
  int n_periods = 0;
  int burn_in_periods = 0;
  std::uint64_t rng_seed = 0;
  std::string rng_algorithm;
};

/// Simulates the targets by Euler-Maruyama and runs the continuous filter on
/// the same step grid, with the covariance propagated from Q. Throws
/// TrialFailureError when a trial produces non-finite values.
[[nodiscard]] McReport kalman_bucy_monte_carlo(const Scenario& scenario, const McConfig& config,
                                               const NumericsConfig& numerics = {});

struct FdOptions {
  double h = 1e-5;
  /// Much tighter than the default so the cycle residual stays below the
  /// difference quotient's resolution. The fine base grid matters for
  /// directions the exact cost ignores (e.g. a first dwell that only shifts a
  /// closed orbit in time): there both quotients see only how the moving
  /// breakpoints split fixed grid cells, an O(step^4) artifact that must stay
  /// under the gradcheck threshold.
  NumericsConfig numerics{32000, 1e-13, 20000};
  /// A component is kink-adjacent when a schedule knot that it moves lies
  /// within margin_factor * h * |d knot / d theta| of distance 0 or r from a target.
  double margin_factor = 10.0;
};

struct FdComponent {
  ParameterId id;
  double value = 0.0;
  double step = 0.0;
  bool one_sided = false;
  bool step_shrunk = false;
  bool kink_adjacent = false;
  std::string error;  ///< non-empty when a perturbed evaluation failed
};

struct FdResult {
  GradientBundle gradient;
  std::vector<FdComponent> components;  ///< parameter_ids order
};

/// Central differences of the steady-state cost through the full pipeline.
[[nodiscard]] FdResult finite_difference_gradient(const Scenario& scenario, const FdOptions& options = {});

/// True when perturbing `id` can move a schedule knot across distance 0 or r.
[[nodiscard]] bool kink_adjacent(const Scenario& scenario, const ParameterId& id, double h, double margin_factor);

enum class GradcheckStatus { kPass, kFail, kBelowThreshold, kKinkExcluded, kError };

[[nodiscard]] const char* to_string(GradcheckStatus status);

struct GradcheckRow {
  ParameterId id;
  double ipa = 0.0;
  double fd = 0.0;
  double rel_error = 0.0;  ///< |ipa - fd| / |fd|
  GradcheckStatus status = GradcheckStatus::kPass;
  FdComponent fd_info;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  double rel_tol = 1e-3;
  double threshold = 1e-6;
  [[nodiscard]] bool passed() const;
  [[nodiscard]] std::size_t count(GradcheckStatus status) const;
};

/// IPA against finite differences, both on options.numerics. Components whose
/// magnitude stays at or below `threshold` in both, and kink-adjacent ones,
/// are reported but not judged.
[[nodiscard]] GradcheckReport gradcheck(const Scenario& scenario, const FdOptions& options = {},
                                        double rel_tol = 1e-3, double threshold = 1e-6);

struct MonotonicityCase {
  std::size_t index = 0;
  double worst = 0.0;  ///< max over nodes of lambda_max(Omega_1 - Omega_2)
  bool passed = false;
};

struct MonotonicityReport {
  std::vector<MonotonicityCase> cases;
  double tolerance = 1e-8;
  [[nodiscard]] std::size_t passes() const;
  [[nodiscard]] std::size_t failures() const { return cases.size() - passes(); }
};

/// Random pairs with eta_1 >= eta_2 and Omega_1(0) <= Omega_2(0); each case
/// passes when Omega_1 - Omega_2 stays negative semidefinite on the grid.
[[nodiscard]] MonotonicityReport monotonicity_harness(std::uint64_t rng_seed, std::size_t n_cases,
                                                      double tolerance = 1e-8);

}  // namespace pmon
