#include "pmon/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pmon/errors.hpp"
#include "pmon/parallel.hpp"

namespace pmon {
namespace {

constexpr double kNodeMergeTol = 1e-13;

std::vector<double> merge_nodes(std::vector<double> raw) {
  std::sort(raw.begin(), raw.end());
  std::vector<double> nodes;
  nodes.reserve(raw.size());
  nodes.push_back(0.0);
  for (double q : raw) {
    if (!(q > 0.0 && q < 1.0)) continue;
    if (q - nodes.back() > kNodeMergeTol) nodes.push_back(q);
  }
  if (1.0 - nodes.back() <= kNodeMergeTol && nodes.size() > 1) nodes.pop_back();
  nodes.push_back(1.0);
  return nodes;
}

std::string target_label(std::size_t target) {
  std::ostringstream os;
  os << "target " << target + 1;
  return os.str();
}

void require_observed(const CoverageGrid& grid, std::size_t target) {
  if (!grid.observed(target)) {
    throw UnobservedTargetError(target, target_label(target) + " is never inside any agent's sensing range");
  }
}

}  // namespace

CoverageGrid::CoverageGrid(std::vector<double> nodes, std::vector<std::vector<EtaSegment>> eta)
    : nodes_(std::move(nodes)), eta_(std::move(eta)) {
  if (nodes_.size() < 2 || nodes_.front() != 0.0 || nodes_.back() != 1.0) {
    throw ValidationError("CoverageGrid: nodes must run from 0 to 1");
  }
  for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
    if (!(nodes_[k + 1] > nodes_[k])) throw ValidationError("CoverageGrid: nodes must be strictly increasing");
  }
  for (const auto& e : eta_) {
    if (e.size() != intervals()) throw ValidationError("CoverageGrid: one eta segment per interval required");
  }
}

CoverageGrid CoverageGrid::from_paths(std::span<const PiecewiseLinearPath> paths, std::span<const double> ranges,
                                      std::span<const double> target_positions, int base_steps) {
  if (base_steps < 1) throw ValidationError("base_steps must be positive");
  std::vector<double> raw;
  raw.reserve(static_cast<std::size_t>(base_steps) + 64);
  for (int k = 1; k < base_steps; ++k) raw.push_back(static_cast<double>(k) / base_steps);
  for (double x : target_positions) {
    const auto bp = eta_breakpoints(paths, ranges, x);
    raw.insert(raw.end(), bp.begin(), bp.end());
  }
  auto nodes = merge_nodes(std::move(raw));

  const std::size_t K = nodes.size() - 1;
  std::vector<std::vector<EtaSegment>> eta(target_positions.size(), std::vector<EtaSegment>(K));
  for (std::size_t k = 0; k < K; ++k) {
    const double mid = 0.5 * (nodes[k] + nodes[k + 1]);
    for (std::size_t j = 0; j < paths.size(); ++j) {
      const auto& path = paths[j];
      const std::size_t piece = path.piece(mid);
      const double dq = path.q[piece + 1] - path.q[piece];
      const double v = dq > 0.0 ? (path.s[piece + 1] - path.s[piece]) / dq : 0.0;
      const double s_mid = path.at(mid);
      for (std::size_t i = 0; i < target_positions.size(); ++i) {
        const double x = target_positions[i];
        const double r = ranges[j];
        if (!(std::abs(s_mid - x) < r)) continue;
        const double sign = s_mid > x ? 1.0 : (s_mid < x ? -1.0 : 0.0);
        const double s_start = s_mid + v * (nodes[k] - mid);
        auto& seg = eta[i][k];
        if (sign == 0.0) {
          seg.start += 1.0;
        } else {
          seg.start += 1.0 - sign * (s_start - x) / r;
          seg.slope += -sign * v / r;
        }
      }
    }
  }
  return CoverageGrid(std::move(nodes), std::move(eta));
}

CoverageGrid CoverageGrid::from_scenario(const Scenario& scenario, int base_steps, ScheduleOptions options) {
  std::vector<PiecewiseLinearPath> paths;
  std::vector<double> ranges;
  for (const auto& sched : compile_schedules(scenario, options)) paths.push_back(to_path(sched));
  for (const auto& a : scenario.agents) ranges.push_back(a.r);
  std::vector<double> xs;
  for (const auto& t : scenario.targets) xs.push_back(t.x());
  return from_paths(paths, ranges, xs, base_steps);
}

double CoverageGrid::eta_at_node(std::size_t target, std::size_t k) const {
  const auto& e = eta_.at(target);
  if (k < e.size()) return e[k].start;
  return e.back().at(nodes_[k] - nodes_[k - 1]);
}

bool CoverageGrid::observed(std::size_t target) const {
  const auto& e = eta_.at(target);
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k].at(0.5 * (nodes_[k + 1] - nodes_[k])) > 0.0) return true;
  }
  return false;
}

Matrix riccati_rhs(const Matrix& omega, double eta, const TargetModel& target, double T) {
  const Matrix a_omega = target.A() * omega;
  Matrix out = a_omega + a_omega.transpose() + target.Q();
  if (eta != 0.0) out.noalias() -= eta * (omega * target.G() * omega);
  return symmetrized(T * out);
}

std::vector<Matrix> integrate_period(const Matrix& omega0, const CoverageGrid& grid, std::size_t target,
                                     const TargetModel& model, double T) {
  const auto& nodes = grid.nodes();
  const auto& eta = grid.eta(target);
  std::vector<Matrix> out;
  out.reserve(nodes.size());
  out.push_back(symmetrized(omega0));
  Matrix omega = out.back();
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const double h = nodes[k + 1] - nodes[k];
    const auto& seg = eta[k];
    const Matrix k1 = riccati_rhs(omega, seg.at(0.0), model, T);
    const Matrix k2 = riccati_rhs(omega + 0.5 * h * k1, seg.at(0.5 * h), model, T);
    const Matrix k3 = riccati_rhs(omega + 0.5 * h * k2, seg.at(0.5 * h), model, T);
    const Matrix k4 = riccati_rhs(omega + h * k3, seg.at(h), model, T);
    omega = symmetrized(omega + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (!omega.allFinite()) {
      std::ostringstream os;
      os << target_label(target) << ": covariance diverged near q = " << nodes[k + 1];
      throw DivergenceError(target, nodes[k + 1], os.str());
    }
    out.push_back(omega);
  }
  return out;
}

std::vector<Matrix> integrate_period(const Matrix& omega0, const Scenario& scenario, std::size_t target,
                                     int base_steps) {
  const auto grid = CoverageGrid::from_scenario(scenario, base_steps);
  return integrate_period(omega0, grid, target, scenario.targets.at(target), scenario.T);
}

CovarianceCycle limit_cycle(std::shared_ptr<const CoverageGrid> grid, const TargetModel& model, std::size_t target,
                            double T, const CycleOptions& options) {
  require_observed(*grid, target);
  Matrix seed = options.seed ? *options.seed : model.Q();
  CovarianceCycle cycle;
  cycle.target_index = target;
  for (int n = 0; n < options.max_cycles; ++n) {
    auto trace = integrate_period(seed, *grid, target, model, T);
    const double scale = std::max(trace.front().norm(), std::numeric_limits<double>::min());
    const double residual = (trace.back() - trace.front()).norm() / scale;
    cycle.residual_history.push_back(residual);
    if (residual <= options.tol) {
      cycle.grid = std::move(grid);
      cycle.omega_bar = std::move(trace);
      cycle.periodic_residual = residual;
      return cycle;
    }
    seed = trace.back();
  }
  std::ostringstream os;
  os << target_label(target) << ": limit cycle did not converge in " << options.max_cycles
     << " periods (last residual " << cycle.residual_history.back() << ")";
  throw NonConvergenceError(target, cycle.residual_history, os.str());
}

CovarianceCycle limit_cycle(const Scenario& scenario, std::size_t target, double tol, int max_cycles) {
  auto grid = std::make_shared<const CoverageGrid>(CoverageGrid::from_scenario(scenario, NumericsConfig{}.base_steps));
  CycleOptions options;
  options.tol = tol;
  options.max_cycles = max_cycles;
  return limit_cycle(std::move(grid), scenario.targets.at(target), target, scenario.T, options);
}

double cycle_cost(const CovarianceCycle& cycle, const TargetModel& model, double T) {
  // Trapezoid with the endpoint-derivative correction; derivatives use the
  // one-sided eta of the interval so kinks at nodes do not spoil the order.
  const auto& grid = *cycle.grid;
  const auto& nodes = grid.nodes();
  const auto& eta = grid.eta(cycle.target_index);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const double h = nodes[k + 1] - nodes[k];
    const Matrix& a = cycle.omega_bar[k];
    const Matrix& b = cycle.omega_bar[k + 1];
    const double da = riccati_rhs(a, eta[k].at(0.0), model, T).trace();
    const double db = riccati_rhs(b, eta[k].at(h), model, T).trace();
    sum += 0.5 * h * (a.trace() + b.trace()) + h * h / 12.0 * (da - db);
  }
  return sum;
}

double steady_state_cost(const Scenario& scenario, std::span<const CovarianceCycle> cycles) {
  double total = 0.0;
  for (const auto& c : cycles) total += cycle_cost(c, scenario.targets.at(c.target_index), scenario.T);
  return total;
}

namespace {

Evaluation evaluate_on_grid(const Scenario& scenario, std::shared_ptr<const CoverageGrid> grid,
                            const NumericsConfig& numerics, const std::vector<Matrix>& seeds) {
  const std::size_t M = scenario.targets.size();
  for (std::size_t i = 0; i < M; ++i) require_observed(*grid, i);
  Evaluation ev;
  ev.grid = grid;
  ev.cycles.resize(M);
  parallel_for(M, [&](std::size_t i) {
    CycleOptions opt;
    opt.tol = numerics.cycle_tol;
    opt.max_cycles = numerics.max_cycles;
    if (i < seeds.size()) opt.seed = seeds[i];
    ev.cycles[i] = limit_cycle(grid, scenario.targets[i], i, scenario.T, opt);
  });
  ev.cost = steady_state_cost(scenario, ev.cycles);
  return ev;
}

}  // namespace

Evaluation evaluate(const Scenario& scenario, const EvaluateOptions& options) {
  auto grid = std::make_shared<const CoverageGrid>(
      CoverageGrid::from_scenario(scenario, options.numerics.base_steps, options.schedule));
  return evaluate_on_grid(scenario, std::move(grid), options.numerics, options.seeds);
}

Evaluation evaluate_paths(const Scenario& scenario, std::span<const PiecewiseLinearPath> paths,
                          const NumericsConfig& numerics) {
  if (paths.size() != scenario.agents.size()) throw ValidationError("evaluate_paths: one path per agent required");
  std::vector<double> ranges;
  for (const auto& a : scenario.agents) ranges.push_back(a.r);
  std::vector<double> xs;
  for (const auto& t : scenario.targets) xs.push_back(t.x());
  auto grid = std::make_shared<const CoverageGrid>(CoverageGrid::from_paths(paths, ranges, xs, numerics.base_steps));
  return evaluate_on_grid(scenario, std::move(grid), numerics, {});
}

}  // namespace pmon
