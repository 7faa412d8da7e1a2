#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pmon/model.hpp"
#include "pmon/trajectory.hpp"

namespace pmon {

/// Agent positions sampled on the uniform grid q_k = k / n, k = 0..n.
struct SampledTrajectory {
  std::vector<double> positions;
};

/// Linear interpolation of the samples.
[[nodiscard]] PiecewiseLinearPath to_path(const SampledTrajectory& samples);

struct ImprovedPolicy {
  AgentParams params;
  EventSchedule schedule;
  std::size_t switches = 0;
};

/// Replace each agent's trajectory by a bang-dwell one that starts every
/// target visit at the same time and place, heads for the visited target at
/// full speed, dwells on it, and leaves just in time for the next visit.
///
/// For isolated targets the new eta dominates the old one pointwise. Throws
/// InfeasibleTrajectoryError if a sampled trajectory exceeds unit speed or
/// is not periodic.
[[nodiscard]] std::vector<ImprovedPolicy> improve_policy(std::span<const SampledTrajectory> trajectories,
                                                         const Scenario& scenario);

/// Bang-dwell path (slopes in {-T, 0, +T}) to schedule parameters, inserting
/// zero-length segments where consecutive moves share a direction.
[[nodiscard]] AgentParams bang_dwell_params(const PiecewiseLinearPath& path, double T, double r);

/// Velocity changes between consecutive non-empty segments within a period.
[[nodiscard]] std::size_t count_switches(const EventSchedule& schedule);

/// Smallest gap between sensing neighborhoods, min |x_i - x_k| - 2 r_max.
[[nodiscard]] double min_neighborhood_gap(const Scenario& scenario);

}  // namespace pmon
