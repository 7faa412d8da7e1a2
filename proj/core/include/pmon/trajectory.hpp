#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pmon/model.hpp"

namespace pmon {

enum class SegmentKind { kDwell, kMove };

struct ScheduleEvent {
  double q;         ///< normalized start time of the segment
  SegmentKind kind;
  int direction;    ///< -1, 0 (dwell) or +1
  double position;  ///< agent position at the start of the segment
};

/// Compiled timeline of one agent over q in [0, 1].
///
/// Holds 2P + 1 segments: dwell 1, move 1, ..., dwell P, move P, and a
/// final dwell that lasts for the rest of the period. Segment k spans
/// [events[k].q, events[k+1].q) and the last one ends at q = 1.
struct EventSchedule {
  std::size_t agent_index = 0;
  std::vector<ScheduleEvent> events;
  std::size_t P = 0;
  double s0 = 0.0;
  double T = 1.0;

  [[nodiscard]] double segment_end(std::size_t k) const { return k + 1 < events.size() ? events[k + 1].q : 1.0; }
};

struct ScheduleOptions {
  /// Off only for perturbed parameters (finite-difference oracles), where
  /// the path may end away from s0.
  bool require_closure = true;
};

/// Throws ConstraintViolation naming the first violated constraint.
[[nodiscard]] EventSchedule compile_schedule(const AgentParams& agent, double T, std::size_t agent_index = 0,
                                             ScheduleOptions options = {});

[[nodiscard]] std::vector<EventSchedule> compile_schedules(const Scenario& scenario, ScheduleOptions options = {});

/// Index of the segment that contains q, taking the right-limit segment at
/// breakpoints (the last segment at q = 1).
[[nodiscard]] std::size_t segment_at(const EventSchedule& schedule, double q);

/// Position inside segment `k`, extended affinely to any q.
[[nodiscard]] double position_in_segment(const EventSchedule& schedule, std::size_t k, double q);

/// Exact position; throws DomainError for q outside [0, 1].
[[nodiscard]] double position(const EventSchedule& schedule, double q);

/// Partial derivatives of s(q) with the normalized time q held fixed.
struct PositionSensitivity {
  std::vector<double> d_tau;
  std::vector<double> d_omega;
  double d_s0 = 1.0;
  double d_T = 0.0;
};

[[nodiscard]] PositionSensitivity position_sensitivities(const EventSchedule& schedule, double q);

/// Same, with the formula of segment `k` evaluated at q.
[[nodiscard]] PositionSensitivity position_sensitivities_in_segment(const EventSchedule& schedule, std::size_t k,
                                                                    double q);

/// Subgradient of 1 - |alpha| / r: sign(alpha) strictly inside the range,
/// zero at alpha = 0, at |alpha| = r and outside.
[[nodiscard]] double range_sign(double alpha, double r);

/// Observation gain of agent at `pos` on a target at `x`.
[[nodiscard]] double proximity(double pos, double x, double r);

[[nodiscard]] double eta(const Scenario& scenario, std::size_t target, double q);
[[nodiscard]] double eta(std::span<const EventSchedule> schedules, const Scenario& scenario, std::size_t target,
                         double q);

/// d eta_i / d theta at fixed q, for every parameter of every agent and T.
struct EtaSensitivity {
  struct Agent {
    double d_s0 = 0.0;
    std::vector<double> d_tau;
    std::vector<double> d_omega;
  };
  std::vector<Agent> agents;
  double d_T = 0.0;
};

[[nodiscard]] EtaSensitivity eta_sensitivities(const Scenario& scenario, std::size_t target, double q);
[[nodiscard]] EtaSensitivity eta_sensitivities(std::span<const EventSchedule> schedules, const Scenario& scenario,
                                               std::size_t target, double q);

/// Continuous, piecewise-linear agent path over q in [0, 1].
struct PiecewiseLinearPath {
  std::vector<double> q;  ///< strictly increasing knots, q.front() = 0, q.back() = 1
  std::vector<double> s;

  [[nodiscard]] double at(double qq) const;
  /// Index of the linear piece containing qq (right-limit convention).
  [[nodiscard]] std::size_t piece(double qq) const;
};

[[nodiscard]] PiecewiseLinearPath to_path(const EventSchedule& schedule);

/// Normalized times inside (0, 1) where the path crosses `level`.
[[nodiscard]] std::vector<double> crossings(const PiecewiseLinearPath& path, double level);

/// Normalized times in [0, 1] where some eta_i may be non-smooth: knots of an
/// agent in (or at the edge of) target i's range, and range/target crossings.
[[nodiscard]] std::vector<double> eta_breakpoints(std::span<const PiecewiseLinearPath> paths,
                                                  std::span<const double> ranges, double x);

/// eta_i(q) as an evaluable trace with its breakpoints.
class EtaTrace {
 public:
  EtaTrace(const Scenario& scenario, std::size_t target);

  [[nodiscard]] std::size_t target_index() const { return target_; }
  [[nodiscard]] double operator()(double q) const;
  [[nodiscard]] const std::vector<double>& breakpoints() const { return breakpoints_; }

 private:
  std::size_t target_;
  double x_;
  std::vector<double> ranges_;
  std::vector<PiecewiseLinearPath> paths_;
  std::vector<double> breakpoints_;
};

}  // namespace pmon
