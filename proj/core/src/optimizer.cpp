#include "pmon/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pmon {
namespace {

// Closure weights (-1)^p for 1-based p; omega entries carry weight 0.
double closure_weight(std::size_t i, std::size_t P) { return i < P ? (i % 2 == 0 ? -1.0 : 1.0) : 0.0; }

bool feasible(const std::vector<double>& y, std::size_t P) {
  double total = 0.0;
  double closure = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0)) return false;
    total += y[i];
    closure += closure_weight(i, P) * y[i];
  }
  return total <= 1.0 + kFeasibilityTol && std::abs(closure) <= kFeasibilityTol;
}

std::vector<double> clipped(const std::vector<double>& y, std::size_t P, double mu, double lambda) {
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = std::max(0.0, y[i] - mu - lambda * closure_weight(i, P));
  return x;
}

// Root of the nonincreasing piecewise-linear closure residual in lambda.
double closure_multiplier(const std::vector<double>& y, std::size_t P, double mu) {
  auto g = [&](double lambda) {
    double s = 0.0;
    for (std::size_t i = 0; i < P; ++i) s += closure_weight(i, P) * std::max(0.0, y[i] - mu - lambda * closure_weight(i, P));
    return s;
  };
  if (P == 0) return 0.0;
  std::vector<double> bp;
  std::size_t n_even = 0;
  std::size_t n_odd = 0;
  for (std::size_t i = 0; i < P; ++i) {
    const double w = closure_weight(i, P);
    bp.push_back(w * (y[i] - mu));
    (w > 0.0 ? n_even : n_odd)++;
  }
  std::sort(bp.begin(), bp.end());
  std::vector<double> gv(bp.size());
  for (std::size_t i = 0; i < bp.size(); ++i) gv[i] = g(bp[i]);
  std::size_t first = 0;
  while (first < bp.size() && gv[first] > 0.0) ++first;
  if (first == bp.size()) {
    // Right of the last breakpoint only odd entries are active.
    return n_odd == 0 ? bp.back() : bp.back() + gv.back() / static_cast<double>(n_odd);
  }
  if (gv[first] == 0.0) return bp[first];
  if (first == 0) return n_even == 0 ? bp[0] : bp[0] + gv[0] / static_cast<double>(n_even);
  const double a = bp[first - 1];
  const double b = bp[first];
  if (b == a) return b;
  return a + gv[first - 1] / (gv[first - 1] - gv[first]) * (b - a);
}

double total(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

// With the budget active, solve for (mu, lambda) on the support of `x`.
bool refine_on_support(const std::vector<double>& y, std::size_t P, std::vector<double>& x) {
  double n = 0.0, se = 0.0, see = 0.0, sy = 0.0, sey = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(x[i] > 0.0)) continue;
    const double e = closure_weight(i, P);
    n += 1.0;
    se += e;
    see += e * e;
    sy += y[i];
    sey += e * y[i];
  }
  // n mu + se lambda = sy - 1 ; se mu + see lambda = sey
  const double det = n * see - se * se;
  double mu = 0.0;
  double lambda = 0.0;
  if (n == 0.0) return false;
  if (std::abs(det) > 1e-12) {
    mu = ((sy - 1.0) * see - se * sey) / det;
    lambda = (n * sey - se * (sy - 1.0)) / det;
  } else if (see == 0.0) {
    mu = (sy - 1.0) / n;
  } else {
    return false;
  }
  std::vector<double> cand(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = y[i] - mu - lambda * closure_weight(i, P);
    const bool on = x[i] > 0.0;
    if (on && v < -1e-12) return false;
    if (!on && v > 1e-12) return false;
    cand[i] = on ? std::max(0.0, v) : 0.0;
  }
  if (mu < -1e-12) return false;
  x = std::move(cand);
  return true;
}

}  // namespace

void check_config(const DescentConfig& config) {
  if (!(config.kappa > 0.0) || !(config.epsilon > 0.0) || !(config.T_min > 0.0) || config.max_iter < 0) {
    throw ValidationError("descent config: kappa, epsilon and T_min must be positive and max_iter nonnegative");
  }
}

AgentParams project(const AgentParams& agent) {
  const std::size_t P = agent.tau.size();
  if (agent.omega.size() != P) throw ValidationError("project: tau and omega lengths differ");
  std::vector<double> y(agent.tau);
  y.insert(y.end(), agent.omega.begin(), agent.omega.end());
  if (feasible(y, P)) return agent;

  auto solve = [&](double mu) { return clipped(y, P, mu, closure_multiplier(y, P, mu)); };
  std::vector<double> x = solve(0.0);
  if (total(x) > 1.0) {
    double lo = 0.0;
    double hi = 1.0;
    for (double v : y) hi = std::max(hi, std::abs(v) + 1.0);
    for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(solve(mid)) > 1.0 ? lo : hi) = mid;
    }
    x = solve(hi);
    std::vector<double> exact = x;
    if (refine_on_support(y, P, exact)) x = std::move(exact);
  }

  // Remove rounding left in the closure sum by adjusting the largest entry of
  // the sign class that owes it.
  double closure = 0.0;
  for (std::size_t i = 0; i < P; ++i) closure += closure_weight(i, P) * x[i];
  if (closure != 0.0) {
    std::size_t best = P;
    for (std::size_t i = 0; i < P; ++i) {
      if (closure_weight(i, P) * closure > 0.0 && (best == P || x[i] > x[best])) best = i;
    }
    if (best < P) x[best] = std::max(0.0, x[best] - std::abs(closure));
  }

  AgentParams out = agent;
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(P), out.tau.begin());
  std::copy(x.begin() + static_cast<std::ptrdiff_t>(P), x.end(), out.omega.begin());
  return out;
}

namespace {

struct IterateEval {
  Evaluation eval;
  GradientBundle grad;
};

}  // namespace

DescentResult descend(const Scenario& scenario, const DescentConfig& config, const NumericsConfig& numerics,
                      const DescentObserver& observer) {
  check_config(config);
  DescentResult result;
  result.scenario = scenario;
  for (auto& a : result.scenario.agents) {
    AgentParams p = project(a);
    if (!(p == a)) result.history.projected_initial = true;
    a = std::move(p);
  }
  result.scenario.T = std::max(result.scenario.T, config.T_min);

  std::vector<Matrix> seeds;
  auto evaluate_at = [&](const Scenario& sc, int iter) {
    try {
      EvaluateOptions opt;
      opt.numerics = numerics;
      opt.seeds = seeds;
      IterateEval it{evaluate(sc, opt), {}};
      it.grad = cost_gradient(sc, it.eval.cycles);
      if (!it.grad.all_finite()) throw DivergenceError(0, 0.0, "non-finite gradient");
      seeds.clear();
      for (const auto& c : it.eval.cycles) seeds.push_back(c.omega_bar.front());
      return it;
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "iterate " << iter << ": " << e.what();
      throw DescentFailure(iter, result.history, std::current_exception(), os.str());
    }
  };
  auto record = [&](const Scenario& sc, int iter, double J, double norm) {
    DescentRecord rec{iter, J, norm, sc.T, sc.agents};
    result.history.records.push_back(rec);
    if (observer) observer(rec);
  };

  IterateEval current = evaluate_at(result.scenario, 0);
  record(result.scenario, 0, current.eval.cost, std::numeric_limits<double>::infinity());

  const double kappa = config.kappa;
  for (int l = 0; l < config.max_iter; ++l) {
    Scenario next = result.scenario;
    double sq = 0.0;
    for (std::size_t j = 0; j < next.agents.size(); ++j) {
      const auto& g = current.grad.agents[j];
      AgentParams stepped = next.agents[j];
      stepped.s0 -= kappa * g.s0;
      for (std::size_t p = 0; p < stepped.tau.size(); ++p) {
        stepped.tau[p] -= kappa * g.tau[p];
        stepped.omega[p] -= kappa * g.omega[p];
      }
      stepped = project(stepped);
      const AgentParams& old = result.scenario.agents[j];
      sq += (stepped.s0 - old.s0) * (stepped.s0 - old.s0);
      for (std::size_t p = 0; p < stepped.tau.size(); ++p) {
        sq += (stepped.tau[p] - old.tau[p]) * (stepped.tau[p] - old.tau[p]);
        sq += (stepped.omega[p] - old.omega[p]) * (stepped.omega[p] - old.omega[p]);
      }
      next.agents[j] = std::move(stepped);
    }
    next.T = std::max(config.T_min, result.scenario.T - kappa * current.grad.period);
    sq += (next.T - result.scenario.T) * (next.T - result.scenario.T);
    const double norm = std::sqrt(sq) / kappa;

    current = evaluate_at(next, l + 1);
    result.scenario = std::move(next);
    record(result.scenario, l + 1, current.eval.cost, norm);
    if (norm <= config.epsilon) {
      result.history.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace pmon
