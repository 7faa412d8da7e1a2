#include "pmon/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "pmon/errors.hpp"

namespace pmon {
namespace {

constexpr double kSpeedSlack = 1e-12;
constexpr double kSlopeTol = 1e-9;

struct RangeInterval {
  std::size_t target;
  double lo;
  double hi;
};

// Open sub-intervals of [0, 1] where the path is strictly inside a target's range.
std::vector<RangeInterval> in_range_intervals(const PiecewiseLinearPath& path, const Scenario& scenario, double r) {
  std::vector<RangeInterval> out;
  for (std::size_t i = 0; i < scenario.targets.size(); ++i) {
    const double x = scenario.targets[i].x();
    std::optional<RangeInterval> open;
    for (std::size_t k = 0; k + 1 < path.q.size(); ++k) {
      const double qa = path.q[k], qb = path.q[k + 1];
      const double da = path.s[k] - x, db = path.s[k + 1] - x;
      // Parameter range in [0, 1] where |da + w (db - da)| < r.
      double w_lo = 0.0, w_hi = 1.0;
      const double slope = db - da;
      if (slope == 0.0) {
        if (!(std::abs(da) < r)) w_lo = 1.0, w_hi = 0.0;
      } else {
        double w1 = (-r - da) / slope, w2 = (r - da) / slope;
        if (w1 > w2) std::swap(w1, w2);
        w_lo = std::max(w_lo, w1);
        w_hi = std::min(w_hi, w2);
      }
      if (!(w_hi > w_lo)) continue;
      const double lo = w_lo == 0.0 ? qa : qa + w_lo * (qb - qa);
      const double hi = w_hi == 1.0 ? qb : qa + w_hi * (qb - qa);
      if (open && open->hi == lo) {
        open->hi = hi;
      } else {
        if (open) out.push_back(*open);
        open = RangeInterval{i, lo, hi};
      }
    }
    if (open) out.push_back(*open);
  }
  std::sort(out.begin(), out.end(), [](const RangeInterval& a, const RangeInterval& b) { return a.lo < b.lo; });
  return out;
}

struct Knot {
  double q;
  double s;
};

// Closest point to chi inside the set of positions reachable from a at ta
// that can still reach b by tb, on [ta, tb].
std::vector<Knot> clamped_visit(double ta, double a, double tb, double b, double chi, double T) {
  auto lo = [&](double q) { return std::max(a - T * (q - ta), b - T * (tb - q)); };
  auto hi = [&](double q) { return std::min(a + T * (q - ta), b + T * (tb - q)); };
  auto eval = [&](double q) {
    const double l = lo(q), h = hi(q);
    if (l > h) return 0.5 * (l + h);
    return std::clamp(chi, l, h);
  };
  std::vector<double> cand = {ta, tb,
                              (a - b + T * (ta + tb)) / (2.0 * T),
                              (b - a + T * (ta + tb)) / (2.0 * T),
                              ta + (a - chi) / T,
                              tb - (b - chi) / T,
                              ta + (chi - a) / T,
                              tb - (chi - b) / T};
  std::erase_if(cand, [&](double q) { return !(q > ta && q < tb); });
  cand.push_back(ta);
  cand.push_back(tb);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  std::vector<Knot> out;
  out.reserve(cand.size());
  for (double q : cand) out.push_back({q, q == ta ? a : (q == tb ? b : eval(q))});
  return out;
}

PiecewiseLinearPath improve_path(const PiecewiseLinearPath& path, const Scenario& scenario, double r) {
  const double T = scenario.T;
  const auto intervals = in_range_intervals(path, scenario, r);

  struct Start {
    double t;
    std::size_t target;
  };
  std::vector<Start> starts;
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto& prev = intervals[(k + intervals.size() - 1) % intervals.size()];
    if (prev.target != intervals[k].target) starts.push_back({intervals[k].lo, intervals[k].target});
  }

  const double s_start = path.s.front();
  if (starts.empty()) {
    PiecewiseLinearPath out;
    if (intervals.empty()) {
      out.q = {0.0, 1.0};
      out.s = {s_start, s_start};
      return out;
    }
    // A single target is visited throughout; anchor the visit at q = 0.
    const auto knots = clamped_visit(0.0, s_start, 1.0, s_start, scenario.targets[intervals.front().target].x(), T);
    for (const auto& kn : knots) {
      out.q.push_back(kn.q);
      out.s.push_back(kn.s);
    }
    return out;
  }

  std::vector<Knot> unrolled;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const double ta = starts[k].t;
    const bool wrap = k + 1 == starts.size();
    const double tb = wrap ? starts.front().t + 1.0 : starts[k + 1].t;
    const double a = path.at(ta);
    const double b = path.at(wrap ? starts.front().t : tb);
    const auto knots = clamped_visit(ta, a, tb, b, scenario.targets[starts[k].target].x(), T);
    for (const auto& kn : knots) {
      if (!unrolled.empty() && kn.q <= unrolled.back().q) continue;
      unrolled.push_back(kn);
    }
  }

  // Rotate [t_1, t_1 + 1] back onto [0, 1].
  auto value_at = [&](double q) {
    for (std::size_t k = 0; k + 1 < unrolled.size(); ++k) {
      if (q >= unrolled[k].q && q <= unrolled[k + 1].q) {
        const double h = unrolled[k + 1].q - unrolled[k].q;
        const double w = h > 0.0 ? (q - unrolled[k].q) / h : 0.0;
        return unrolled[k].s + w * (unrolled[k + 1].s - unrolled[k].s);
      }
    }
    return unrolled.back().s;
  };
  const double s_wrap = value_at(1.0);
  PiecewiseLinearPath out;
  out.q.push_back(0.0);
  out.s.push_back(s_wrap);
  for (const auto& kn : unrolled) {
    if (kn.q > 1.0 && kn.q - 1.0 > out.q.back()) {
      out.q.push_back(kn.q - 1.0);
      out.s.push_back(kn.s);
    }
  }
  for (const auto& kn : unrolled) {
    if (kn.q < 1.0 && kn.q > out.q.back()) {
      out.q.push_back(kn.q);
      out.s.push_back(kn.s);
    }
  }
  out.q.push_back(1.0);
  out.s.push_back(s_wrap);
  return out;
}

void check_feasible(const SampledTrajectory& samples, double T, std::size_t agent) {
  const auto& s = samples.positions;
  auto fail = [&](const std::string& msg) {
    std::ostringstream os;
    os << "agent " << agent + 1 << ": " << msg;
    throw InfeasibleTrajectoryError(os.str());
  };
  if (s.size() < 2) fail("sampled trajectory needs at least two samples");
  const double dq = 1.0 / static_cast<double>(s.size() - 1);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    if (!std::isfinite(s[k]) || !std::isfinite(s[k + 1])) fail("non-finite position sample");
    if (std::abs(s[k + 1] - s[k]) > T * dq * (1.0 + kSpeedSlack)) {
      std::ostringstream os;
      os << "speed bound exceeded near q = " << k * dq;
      fail(os.str());
    }
  }
  if (std::abs(s.back() - s.front()) > 1e-9 * (1.0 + std::abs(s.front()))) fail("trajectory is not periodic");
}

}  // namespace

PiecewiseLinearPath to_path(const SampledTrajectory& samples) {
  PiecewiseLinearPath path;
  const std::size_t n = samples.positions.size() - 1;
  path.q.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) path.q[k] = static_cast<double>(k) / static_cast<double>(n);
  path.s = samples.positions;
  return path;
}

AgentParams bang_dwell_params(const PiecewiseLinearPath& path, double T, double r) {
  AgentParams out;
  out.s0 = path.s.front();
  out.r = r;

  // Merge pieces into (direction, duration) runs, dropping empty ones.
  struct Run {
    int dir;
    double dq;
  };
  std::vector<Run> runs;
  for (std::size_t k = 0; k + 1 < path.q.size(); ++k) {
    const double dq = path.q[k + 1] - path.q[k];
    if (!(dq > 0.0)) continue;
    const double slope = (path.s[k + 1] - path.s[k]) / (T * dq);
    int dir = 0;
    if (std::abs(slope - 1.0) <= kSlopeTol) {
      dir = 1;
    } else if (std::abs(slope + 1.0) <= kSlopeTol) {
      dir = -1;
    } else if (std::abs(slope) > kSlopeTol && std::abs(path.s[k + 1] - path.s[k]) > 1e-12) {
      throw InfeasibleTrajectoryError("bang_dwell_params: path has a segment that is neither a move nor a dwell");
    }
    if (!runs.empty() && runs.back().dir == dir) {
      runs.back().dq += dq;
    } else {
      runs.push_back({dir, dq});
    }
  }
  while (!runs.empty() && runs.back().dir == 0) runs.pop_back();

  // Stage p (0-based) is dwell omega[p] followed by a move in direction +1 for even p.
  bool in_move = false;
  out.omega.push_back(0.0);
  out.tau.push_back(0.0);
  auto stage_dir = [&]() { return out.tau.size() % 2 == 1 ? 1 : -1; };
  auto next_stage = [&]() {
    out.omega.push_back(0.0);
    out.tau.push_back(0.0);
    in_move = false;
  };
  for (const auto& run : runs) {
    if (run.dir == 0) {
      if (in_move) next_stage();
      out.omega.back() += run.dq;
      continue;
    }
    if (run.dir != stage_dir()) next_stage();
    out.tau.back() += run.dq;
    in_move = true;
  }
  return out;
}

std::size_t count_switches(const EventSchedule& schedule) {
  std::size_t n = 0;
  std::optional<int> prev;
  for (std::size_t k = 0; k < schedule.events.size(); ++k) {
    if (!(schedule.segment_end(k) > schedule.events[k].q)) continue;
    const int v = schedule.events[k].direction;
    if (prev && *prev != v) ++n;
    prev = v;
  }
  return n;
}

double min_neighborhood_gap(const Scenario& scenario) {
  double r_max = 0.0;
  for (const auto& a : scenario.agents) r_max = std::max(r_max, a.r);
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < scenario.targets.size(); ++i) {
    gap = std::min(gap, scenario.targets[i + 1].x() - scenario.targets[i].x());
  }
  return gap - 2.0 * r_max;
}

std::vector<ImprovedPolicy> improve_policy(std::span<const SampledTrajectory> trajectories, const Scenario& scenario) {
  if (trajectories.size() != scenario.agents.size()) {
    throw ValidationError("improve_policy: need one sampled trajectory per agent");
  }
  std::vector<ImprovedPolicy> out;
  out.reserve(trajectories.size());
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    check_feasible(trajectories[j], scenario.T, j);
    const double r = scenario.agents[j].r;
    const auto improved = improve_path(to_path(trajectories[j]), scenario, r);
    ImprovedPolicy policy;
    policy.params = bang_dwell_params(improved, scenario.T, r);
    // Rounding in the knot arithmetic can leave ~1e-16 of closure error.
    if (std::abs(closure_residual(policy.params)) <= 1e-10) {
      const double fix = closure_residual(policy.params);
      auto& last = policy.params.tau.back();
      const double sign = policy.params.tau.size() % 2 == 0 ? 1.0 : -1.0;
      last = std::max(0.0, last - sign * fix);
    }
    policy.schedule = compile_schedule(policy.params, scenario.T, j);
    policy.switches = count_switches(policy.schedule);
    out.push_back(std::move(policy));
  }
  return out;
}

}  // namespace pmon
