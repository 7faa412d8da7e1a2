#include "pmon/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pmon/errors.hpp"

namespace pmon {
namespace {

int move_direction(std::size_t p_zero_based) { return p_zero_based % 2 == 0 ? 1 : -1; }

}  // namespace

EventSchedule compile_schedule(const AgentParams& agent, double T, std::size_t agent_index, ScheduleOptions options) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConstraintViolation("period", "period T must be positive");
  for (const auto& v : validate_agent(agent, agent_index)) {
    if (v.kind == ViolationKind::kClosure && !options.require_closure) continue;
    throw ConstraintViolation(to_string(v.kind), v.message);
  }

  EventSchedule out;
  out.agent_index = agent_index;
  out.P = agent.moves();
  out.s0 = agent.s0;
  out.T = T;
  out.events.reserve(2 * out.P + 1);

  double q = 0.0;
  double pos = agent.s0;
  for (std::size_t p = 0; p < out.P; ++p) {
    out.events.push_back({std::min(q, 1.0), SegmentKind::kDwell, 0, pos});
    q += agent.omega[p];
    const int dir = move_direction(p);
    out.events.push_back({std::min(q, 1.0), SegmentKind::kMove, dir, pos});
    q += agent.tau[p];
    pos += dir * T * agent.tau[p];
  }
  out.events.push_back({std::min(q, 1.0), SegmentKind::kDwell, 0, pos});
  return out;
}

std::vector<EventSchedule> compile_schedules(const Scenario& scenario, ScheduleOptions options) {
  std::vector<EventSchedule> out;
  out.reserve(scenario.agents.size());
  for (std::size_t j = 0; j < scenario.agents.size(); ++j) {
    out.push_back(compile_schedule(scenario.agents[j], scenario.T, j, options));
  }
  return out;
}

std::size_t segment_at(const EventSchedule& schedule, double q) {
  const auto it = std::upper_bound(schedule.events.begin(), schedule.events.end(), q,
                                   [](double value, const ScheduleEvent& e) { return value < e.q; });
  if (it == schedule.events.begin()) return 0;
  return static_cast<std::size_t>(std::distance(schedule.events.begin(), it)) - 1;
}

double position_in_segment(const EventSchedule& schedule, std::size_t k, double q) {
  const auto& e = schedule.events[k];
  if (e.kind == SegmentKind::kDwell) return e.position;
  return e.position + e.direction * schedule.T * (q - e.q);
}

double position(const EventSchedule& schedule, double q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    std::ostringstream os;
    os << "position: normalized time " << q << " outside [0, 1]";
    throw DomainError(os.str());
  }
  return position_in_segment(schedule, segment_at(schedule, q), q);
}

PositionSensitivity position_sensitivities_in_segment(const EventSchedule& schedule, std::size_t k, double q) {
  const std::size_t P = schedule.P;
  const double T = schedule.T;
  PositionSensitivity out;
  out.d_tau.assign(P, 0.0);
  out.d_omega.assign(P, 0.0);
  out.d_s0 = 1.0;
  out.d_T = (position_in_segment(schedule, k, q) - schedule.s0) / T;

  // Segment k belongs to stage p = k / 2 (0-based); even k dwells, odd k moves.
  const std::size_t p = k / 2;
  if (k % 2 == 0) {
    for (std::size_t m = 0; m < std::min(p, P); ++m) out.d_tau[m] = T * move_direction(m);
  } else {
    const int dp = move_direction(p);
    for (std::size_t m = 0; m < p; ++m) out.d_tau[m] = T * (move_direction(m) - dp);
    for (std::size_t m = 0; m <= p; ++m) out.d_omega[m] = -T * dp;
  }
  return out;
}

PositionSensitivity position_sensitivities(const EventSchedule& schedule, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("position_sensitivities: q outside [0, 1]");
  return position_sensitivities_in_segment(schedule, segment_at(schedule, q), q);
}

double range_sign(double alpha, double r) {
  if (!(std::abs(alpha) < r) || alpha == 0.0) return 0.0;
  return alpha > 0.0 ? 1.0 : -1.0;
}

double proximity(double pos, double x, double r) {
  const double d = std::abs(pos - x);
  return d < r ? 1.0 - d / r : 0.0;
}

double eta(std::span<const EventSchedule> schedules, const Scenario& scenario, std::size_t target, double q) {
  const double x = scenario.targets.at(target).x();
  double sum = 0.0;
  for (std::size_t j = 0; j < schedules.size(); ++j) sum += proximity(position(schedules[j], q), x, scenario.agents[j].r);
  return sum;
}

double eta(const Scenario& scenario, std::size_t target, double q) {
  const auto schedules = compile_schedules(scenario);
  return eta(schedules, scenario, target, q);
}

EtaSensitivity eta_sensitivities(std::span<const EventSchedule> schedules, const Scenario& scenario,
                                 std::size_t target, double q) {
  const double x = scenario.targets.at(target).x();
  EtaSensitivity out;
  out.agents.resize(schedules.size());
  for (std::size_t j = 0; j < schedules.size(); ++j) {
    const double r = scenario.agents[j].r;
    const auto& sched = schedules[j];
    auto& a = out.agents[j];
    a.d_tau.assign(sched.P, 0.0);
    a.d_omega.assign(sched.P, 0.0);
    const double w = -range_sign(position(sched, q) - x, r) / r;
    if (w == 0.0) continue;
    const auto ds = position_sensitivities(sched, q);
    a.d_s0 = w * ds.d_s0;
    for (std::size_t m = 0; m < sched.P; ++m) {
      a.d_tau[m] = w * ds.d_tau[m];
      a.d_omega[m] = w * ds.d_omega[m];
    }
    out.d_T += w * ds.d_T;
  }
  return out;
}

EtaSensitivity eta_sensitivities(const Scenario& scenario, std::size_t target, double q) {
  const auto schedules = compile_schedules(scenario);
  return eta_sensitivities(schedules, scenario, target, q);
}

std::size_t PiecewiseLinearPath::piece(double qq) const {
  const auto it = std::upper_bound(q.begin(), q.end(), qq);
  const auto idx = static_cast<std::ptrdiff_t>(std::distance(q.begin(), it)) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(q.size()) - 2));
}

double PiecewiseLinearPath::at(double qq) const {
  const std::size_t k = piece(qq);
  const double h = q[k + 1] - q[k];
  const double w = h > 0.0 ? (qq - q[k]) / h : 0.0;
  return s[k] + w * (s[k + 1] - s[k]);
}

PiecewiseLinearPath to_path(const EventSchedule& schedule) {
  PiecewiseLinearPath path;
  for (const auto& e : schedule.events) {
    if (!path.q.empty() && e.q <= path.q.back()) {
      path.s.back() = e.position;
      continue;
    }
    if (e.q >= 1.0) break;
    path.q.push_back(e.q);
    path.s.push_back(e.position);
  }
  path.q.push_back(1.0);
  path.s.push_back(position_in_segment(schedule, schedule.events.size() - 1, 1.0));
  return path;
}

std::vector<double> crossings(const PiecewiseLinearPath& path, double level) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < path.q.size(); ++k) {
    const double a = path.s[k] - level;
    const double b = path.s[k + 1] - level;
    if (a * b < 0.0) out.push_back(path.q[k] + a / (a - b) * (path.q[k + 1] - path.q[k]));
  }
  return out;
}

std::vector<double> eta_breakpoints(std::span<const PiecewiseLinearPath> paths, std::span<const double> ranges,
                                    double x) {
  std::vector<double> out;
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const auto& path = paths[j];
    const double r = ranges[j];
    for (std::size_t k = 0; k < path.q.size(); ++k) {
      if (std::abs(path.s[k] - x) <= r) out.push_back(path.q[k]);
    }
    for (double level : {x - r, x, x + r}) {
      const auto c = crossings(path, level);
      out.insert(out.end(), c.begin(), c.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EtaTrace::EtaTrace(const Scenario& scenario, std::size_t target) : target_(target), x_(scenario.targets.at(target).x()) {
  for (const auto& sched : compile_schedules(scenario)) paths_.push_back(to_path(sched));
  for (const auto& a : scenario.agents) ranges_.push_back(a.r);
  breakpoints_ = eta_breakpoints(paths_, ranges_, x_);
}

double EtaTrace::operator()(double q) const {
  double sum = 0.0;
  for (std::size_t j = 0; j < paths_.size(); ++j) sum += proximity(paths_[j].at(q), x_, ranges_[j]);
  return sum;
}

}  // namespace pmon
