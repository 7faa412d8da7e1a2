#include "pmon/validate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "pmon/errors.hpp"
#include "pmon/parallel.hpp"
#include "pmon/trajectory.hpp"

namespace pmon {
namespace {

// Standard normals from mt19937_64 via Box-Muller. Both the engine and
// seed_seq are fully specified by the standard, so streams are portable.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Vector vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = (*this)();
    return v;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Matrix lower_cholesky(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw ValidationError("covariance is not positive definite");
  return llt.matrixL();
}

double wrap_unit(double q) {
  const double f = q - std::floor(q);
  return std::min(f, 1.0);
}

// Per-target data shared by every trial.
struct FilterPlan {
  Matrix A, H, chol_Q, chol_R_scaled, chol_omega0;
  std::vector<double> gamma;   // n_steps * N, sqrt of proximity
  std::vector<Matrix> gain;    // Omega_k H^T R^-1, one per step
};

}  // namespace

void check_config(const McConfig& config) {
  if (!(config.dt > 0.0) || config.n_trials == 0 || config.n_periods <= 0 || config.burn_in_periods < 0 ||
      config.burn_in_periods >= config.n_periods || config.noise_substeps < 1) {
    throw ValidationError("monte carlo config: need dt > 0, n_trials > 0, noise_substeps > 0 and 0 <= burn_in_periods < n_periods");
  }
}

McReport kalman_bucy_monte_carlo(const Scenario& scenario, const McConfig& config, const NumericsConfig& numerics) {
  check_config(config);
  EvaluateOptions eopt;
  eopt.numerics = numerics;
  const auto ev = evaluate(scenario, eopt);

  const auto schedules = compile_schedules(scenario);
  const std::size_t M = scenario.targets.size();
  const std::size_t N = schedules.size();
  const double T = scenario.T;
  const auto per_period = static_cast<std::size_t>(std::max(1.0, std::round(T / config.dt)));
  const double h = T / static_cast<double>(per_period);
  const std::size_t n_steps = per_period * static_cast<std::size_t>(config.n_periods);
  const std::size_t burn = per_period * static_cast<std::size_t>(config.burn_in_periods);

  auto eta_at = [&](std::size_t i, double t) {
    const double q = wrap_unit(t / T);
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      s += proximity(position(schedules[j], q), scenario.targets[i].x(), scenario.agents[j].r);
    }
    return s;
  };

  std::vector<FilterPlan> plans(M);
  for (std::size_t i = 0; i < M; ++i) {
    const auto& model = scenario.targets[i];
    auto& plan = plans[i];
    plan.A = model.A();
    plan.H = model.H();
    plan.chol_Q = lower_cholesky(model.Q());
    plan.chol_R_scaled = lower_cholesky(model.R()) / std::sqrt(h);
    plan.chol_omega0 = plan.chol_Q;
    const Matrix R_inv = model.R().inverse();
    plan.gamma.resize(n_steps * N);
    plan.gain.reserve(n_steps);
    Matrix omega = model.Q();
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double t = static_cast<double>(k) * h;
      const double q = wrap_unit(t / T);
      for (std::size_t j = 0; j < N; ++j) {
        plan.gamma[k * N + j] =
            std::sqrt(proximity(position(schedules[j], q), model.x(), scenario.agents[j].r));
      }
      plan.gain.push_back(omega * model.H().transpose() * R_inv);
      const double e0 = eta_at(i, t);
      const double e1 = eta_at(i, t + 0.5 * h);
      const double e2 = eta_at(i, t + h);
      const Matrix k1 = riccati_rhs(omega, e0, model, 1.0);
      const Matrix k2 = riccati_rhs(omega + 0.5 * h * k1, e1, model, 1.0);
      const Matrix k3 = riccati_rhs(omega + 0.5 * h * k2, e1, model, 1.0);
      const Matrix k4 = riccati_rhs(omega + h * k3, e2, model, 1.0);
      omega = symmetrized(omega + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      if (!omega.allFinite()) throw DivergenceError(i, q, "filter covariance diverged");
    }
  }

  std::vector<std::vector<double>> sums(config.n_trials, std::vector<double>(M, 0.0));
  const double sqrt_h = std::sqrt(h);
  parallel_for(config.n_trials, [&](std::size_t trial) {
    GaussianStream rng(config.rng_seed, trial);
    for (std::size_t i = 0; i < M; ++i) {
      const auto& plan = plans[i];
      const int L = static_cast<int>(plan.A.rows());
      const int m = static_cast<int>(plan.H.rows());
      Vector phi = plan.chol_omega0 * rng.vector(L);
      Vector est = Vector::Zero(L);
      double acc = 0.0;
      std::vector<Vector> meas(N, Vector::Zero(m));
      Vector drive(L);
      const double norm = 1.0 / std::sqrt(static_cast<double>(config.noise_substeps));
      for (std::size_t k = 0; k < n_steps; ++k) {
        if (k >= burn) acc += (est - phi).squaredNorm();
        // Noise is drawn for every agent, in range or not, so the draw order
        // never depends on the step size.
        for (auto& v : meas) v.setZero();
        drive.setZero();
        for (int sub = 0; sub < config.noise_substeps; ++sub) {
          for (auto& v : meas) v += rng.vector(m);
          drive += rng.vector(L);
        }
        Vector innovation = Vector::Zero(m);
        for (std::size_t j = 0; j < N; ++j) {
          const double g = plan.gamma[k * N + j];
          if (g == 0.0) continue;
          const Vector y = g * (plan.H * phi) + plan.chol_R_scaled * (norm * meas[j]);
          innovation += g * (y - g * (plan.H * est));
        }
        est += h * (plan.A * est + plan.gain[k] * innovation);
        phi += h * (plan.A * phi) + (sqrt_h * norm) * (plan.chol_Q * drive);
        if (!est.allFinite() || !phi.allFinite()) {
          std::ostringstream os;
          os << "monte carlo trial " << trial << " (seed " << config.rng_seed << ") produced non-finite values";
          throw TrialFailureError(config.rng_seed, trial, os.str());
        }
      }
      sums[trial][i] = acc;
    }
  });

  McReport report;
  report.n_trials = config.n_trials;
  report.dt = h;
  report.n_periods = config.n_periods;
  report.burn_in_periods = config.burn_in_periods;
  report.rng_seed = config.rng_seed;
  report.rng_algorithm = kRngAlgorithm;
  const double samples = static_cast<double>(config.n_trials) * static_cast<double>(n_steps - burn);
  for (std::size_t i = 0; i < M; ++i) {
    double total = 0.0;
    for (std::size_t trial = 0; trial < config.n_trials; ++trial) total += sums[trial][i];
    McTargetReport t;
    t.target_index = i;
    t.empirical_mse = total / samples;
    t.predicted = cycle_cost(ev.cycles[i], scenario.targets[i], T);
    report.empirical_total += t.empirical_mse;
    report.predicted_total += t.predicted;
    report.targets.push_back(t);
  }
  return report;
}

namespace {

double& parameter_ref(Scenario& sc, const ParameterId& id) {
  switch (id.kind) {
    case ParameterId::Kind::kS0:
      return sc.agents.at(id.agent).s0;
    case ParameterId::Kind::kTau:
      return sc.agents.at(id.agent).tau.at(id.index);
    case ParameterId::Kind::kOmega:
      return sc.agents.at(id.agent).omega.at(id.index);
    case ParameterId::Kind::kPeriod:
      break;
  }
  return sc.T;
}

double knot_derivative(const PositionSensitivity& ps, const ParameterId& id) {
  switch (id.kind) {
    case ParameterId::Kind::kS0:
      return ps.d_s0;
    case ParameterId::Kind::kTau:
      return ps.d_tau.at(id.index);
    case ParameterId::Kind::kOmega:
      return ps.d_omega.at(id.index);
    case ParameterId::Kind::kPeriod:
      break;
  }
  return ps.d_T;
}

}  // namespace

bool kink_adjacent(const Scenario& scenario, const ParameterId& id, double h, double margin_factor) {
  for (std::size_t j = 0; j < scenario.agents.size(); ++j) {
    if (id.kind != ParameterId::Kind::kPeriod && id.agent != j) continue;
    const auto& agent = scenario.agents[j];
    const auto sched = compile_schedule(agent, scenario.T, j, ScheduleOptions{false});
    for (std::size_t k = 0; k < sched.events.size(); ++k) {
      const double q = sched.events[k].q;
      const double p = sched.events[k].position;
      const double d = knot_derivative(position_sensitivities_in_segment(sched, k, q), id);
      if (d == 0.0) continue;
      const double margin = margin_factor * h * std::abs(d);
      for (const auto& target : scenario.targets) {
        const double dist = std::abs(p - target.x());
        if (dist <= margin || std::abs(dist - agent.r) <= margin) return true;
      }
    }
  }
  return false;
}

FdResult finite_difference_gradient(const Scenario& scenario, const FdOptions& options) {
  if (!(options.h > 0.0)) throw ValidationError("finite differences need h > 0");
  EvaluateOptions eopt;
  eopt.numerics = options.numerics;
  eopt.schedule.require_closure = false;
  auto cost = [&](const Scenario& sc) { return evaluate(sc, eopt).cost; };

  FdResult result;
  result.gradient = GradientBundle::zeros(scenario);
  const auto ids = parameter_ids(scenario);
  result.components.resize(ids.size());

  parallel_for(ids.size(), [&](std::size_t n) {
    const auto& id = ids[n];
    FdComponent& comp = result.components[n];
    comp.id = id;
    Scenario work = scenario;
    const double v = parameter_ref(work, id);
    double room_down = std::numeric_limits<double>::infinity();
    double room_up = std::numeric_limits<double>::infinity();
    if (id.kind == ParameterId::Kind::kTau || id.kind == ParameterId::Kind::kOmega) {
      const auto& a = scenario.agents[id.agent];
      double total = 0.0;
      for (std::size_t p = 0; p < a.tau.size(); ++p) total += a.tau[p] + a.omega[p];
      room_down = v;
      room_up = std::max(0.0, 1.0 - total);
    } else if (id.kind == ParameterId::Kind::kPeriod) {
      room_down = 0.5 * v;
    }
    const double h = options.h;
    auto at = [&](double delta) {
      parameter_ref(work, id) = v + delta;
      return cost(work);
    };
    try {
      const double room = std::min(room_down, room_up);
      if (room >= h) {
        comp.step = h;
        comp.value = (at(h) - at(-h)) / (2.0 * h);
      } else if (room >= 0.01 * h) {
        comp.step = room;
        comp.step_shrunk = true;
        comp.value = (at(room) - at(-room)) / (2.0 * room);
      } else {
        // Second-order one-sided quotient into the roomier side.
        const double dir = room_up >= room_down ? 1.0 : -1.0;
        const double side = dir > 0 ? room_up : room_down;
        double s = h;
        if (side < 2.0 * h) {
          s = 0.5 * side;
          comp.step_shrunk = true;
        }
        comp.step = s;
        comp.one_sided = true;
        const double f0 = at(0.0);
        const double f1 = at(dir * s);
        const double f2 = at(2.0 * dir * s);
        comp.value = dir * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * s);
      }
    } catch (const std::exception& e) {
      comp.error = e.what();
      comp.value = std::numeric_limits<double>::quiet_NaN();
    }
    comp.kink_adjacent = kink_adjacent(scenario, id, comp.step > 0.0 ? comp.step : h, options.margin_factor);
  });
  for (const auto& c : result.components) result.gradient.at(c.id) = c.value;
  return result;
}

const char* to_string(GradcheckStatus status) {
  switch (status) {
    case GradcheckStatus::kPass:
      return "pass";
    case GradcheckStatus::kFail:
      return "fail";
    case GradcheckStatus::kBelowThreshold:
      return "below-threshold";
    case GradcheckStatus::kKinkExcluded:
      return "kink-excluded";
    case GradcheckStatus::kError:
      return "error";
  }
  return "unknown";
}

bool GradcheckReport::passed() const {
  return count(GradcheckStatus::kFail) == 0 && count(GradcheckStatus::kError) == 0;
}

std::size_t GradcheckReport::count(GradcheckStatus status) const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [&](const auto& r) { return r.status == status; }));
}

GradcheckReport gradcheck(const Scenario& scenario, const FdOptions& options, double rel_tol, double threshold) {
  EvaluateOptions eopt;
  eopt.numerics = options.numerics;
  const auto ev = evaluate(scenario, eopt);
  const auto ipa = cost_gradient(scenario, ev.cycles);
  const auto fd = finite_difference_gradient(scenario, options);

  GradcheckReport report;
  report.rel_tol = rel_tol;
  report.threshold = threshold;
  for (const auto& comp : fd.components) {
    GradcheckRow row;
    row.id = comp.id;
    row.ipa = ipa.at(comp.id);
    row.fd = comp.value;
    row.fd_info = comp;
    row.rel_error = row.ipa == row.fd ? 0.0 : std::abs(row.ipa - row.fd) / std::abs(row.fd);
    if (!comp.error.empty()) {
      row.status = GradcheckStatus::kError;
    } else if (comp.kink_adjacent) {
      row.status = GradcheckStatus::kKinkExcluded;
    } else if (!(std::max(std::abs(row.ipa), std::abs(row.fd)) > threshold)) {
      row.status = GradcheckStatus::kBelowThreshold;
    } else {
      row.status = row.rel_error < rel_tol ? GradcheckStatus::kPass : GradcheckStatus::kFail;
    }
    report.rows.push_back(row);
  }
  return report;
}

std::size_t MonotonicityReport::passes() const {
  return static_cast<std::size_t>(std::count_if(cases.begin(), cases.end(), [](const auto& c) { return c.passed; }));
}

MonotonicityReport monotonicity_harness(std::uint64_t rng_seed, std::size_t n_cases, double tolerance) {
  MonotonicityReport report;
  report.tolerance = tolerance;
  report.cases.resize(n_cases);
  parallel_for(n_cases, [&](std::size_t c) {
    GaussianStream rng(rng_seed, c);
    const int L = 1 + static_cast<int>(c % 3);
    const int m = 1 + static_cast<int>(rng.uniform() * L) % L;
    Matrix A(L, L), B(L, L), H(m, L), C(L, L);
    for (int a = 0; a < L; ++a) {
      for (int b = 0; b < L; ++b) {
        A(a, b) = 0.5 * rng();
        B(a, b) = rng();
        C(a, b) = rng();
      }
      for (int r = 0; r < m; ++r) H(r, a) = rng();
    }
    const Matrix Q = B * B.transpose() + 0.1 * Matrix::Identity(L, L);
    const TargetModel model(A, Q, H, Matrix::Identity(m, m), 0.0);
    const double T = 0.5 + 1.5 * rng.uniform();

    // Piecewise-constant gains on a few random pieces.
    const int pieces = 1 + static_cast<int>(rng.uniform() * 6);
    std::vector<double> cuts;
    for (int p = 1; p < pieces; ++p) cuts.push_back(rng.uniform());
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> level2(static_cast<std::size_t>(pieces)), level1(static_cast<std::size_t>(pieces));
    for (std::size_t p = 0; p < level2.size(); ++p) {
      level2[p] = rng.uniform() < 0.3 ? 0.0 : 2.0 * rng.uniform();
      level1[p] = level2[p] + (rng.uniform() < 0.5 ? 1.5 * rng.uniform() : 0.0);
    }
    std::vector<double> raw;
    const int base = NumericsConfig{}.base_steps;
    for (int k = 0; k <= base; ++k) raw.push_back(static_cast<double>(k) / base);
    raw.insert(raw.end(), cuts.begin(), cuts.end());
    std::sort(raw.begin(), raw.end());
    std::vector<double> nodes{0.0};
    for (double q : raw) {
      if (q - nodes.back() > 1e-9) nodes.push_back(q);
    }
    nodes.back() = 1.0;
    std::vector<std::vector<EtaSegment>> eta(2);
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
      const double mid = 0.5 * (nodes[k] + nodes[k + 1]);
      const auto piece = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), mid) - cuts.begin());
      eta[0].push_back({level1[piece], 0.0});
      eta[1].push_back({level2[piece], 0.0});
    }
    const CoverageGrid grid(std::move(nodes), std::move(eta));

    const Matrix omega2 = C * C.transpose() + 0.5 * Matrix::Identity(L, L);
    Vector u = rng.vector(L);
    u /= u.norm();
    const double shrink = 0.9 * rng.uniform() * min_eigenvalue(omega2);
    const Matrix omega1 = omega2 - shrink * (u * u.transpose());

    const auto trace1 = integrate_period(omega1, grid, 0, model, T);
    const auto trace2 = integrate_period(omega2, grid, 1, model, T);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < trace1.size(); ++k) worst = std::max(worst, max_eigenvalue(trace1[k] - trace2[k]));
    report.cases[c] = {c, worst, worst <= tolerance};
  });
  return report;
}

}  // namespace pmon
