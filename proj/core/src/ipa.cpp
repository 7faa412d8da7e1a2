#include "pmon/ipa.hpp"

#include <cmath>
#include <sstream>

#include "pmon/errors.hpp"
#include "pmon/parallel.hpp"
#include "pmon/trajectory.hpp"

namespace pmon {

std::string ParameterId::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::kS0:
      os << "agent" << agent + 1 << ".s0";
      break;
    case Kind::kTau:
      os << "agent" << agent + 1 << ".tau" << index + 1;
      break;
    case Kind::kOmega:
      os << "agent" << agent + 1 << ".omega" << index + 1;
      break;
    case Kind::kPeriod:
      os << "global.T";
      break;
  }
  return os.str();
}

std::vector<ParameterId> parameter_ids(const Scenario& scenario) {
  using K = ParameterId::Kind;
  std::vector<ParameterId> ids;
  for (std::size_t j = 0; j < scenario.agents.size(); ++j) {
    const std::size_t P = scenario.agents[j].moves();
    ids.push_back({K::kS0, j, 0});
    for (std::size_t p = 0; p < P; ++p) ids.push_back({K::kTau, j, p});
    for (std::size_t p = 0; p < P; ++p) ids.push_back({K::kOmega, j, p});
  }
  ids.push_back({K::kPeriod, 0, 0});
  return ids;
}

bool EtaDerivativeTable::active(std::size_t n) const {
  return start.col(static_cast<Eigen::Index>(n)).cwiseAbs().maxCoeff() > 0.0 ||
         slope.col(static_cast<Eigen::Index>(n)).cwiseAbs().maxCoeff() > 0.0;
}

EtaDerivativeTable eta_derivative_table(const Scenario& scenario, const CoverageGrid& grid, std::size_t target,
                                        ScheduleOptions options) {
  const auto schedules = compile_schedules(scenario, options);
  EtaDerivativeTable table;
  table.target_index = target;
  table.params = parameter_ids(scenario);
  const auto K = static_cast<Eigen::Index>(grid.intervals());
  const auto n_params = static_cast<Eigen::Index>(table.params.size());
  table.start = Eigen::MatrixXd::Zero(K, n_params);
  table.slope = Eigen::MatrixXd::Zero(K, n_params);

  std::vector<Eigen::Index> offset(schedules.size());
  Eigen::Index next = 0;
  for (std::size_t j = 0; j < schedules.size(); ++j) {
    offset[j] = next;
    next += 1 + 2 * static_cast<Eigen::Index>(schedules[j].P);
  }
  const Eigen::Index col_T = n_params - 1;
  const double x = scenario.targets.at(target).x();
  const auto& nodes = grid.nodes();

  for (Eigen::Index k = 0; k < K; ++k) {
    const double qa = nodes[static_cast<std::size_t>(k)];
    const double qb = nodes[static_cast<std::size_t>(k) + 1];
    const double h = qb - qa;
    const double mid = 0.5 * (qa + qb);
    for (std::size_t j = 0; j < schedules.size(); ++j) {
      const auto& sched = schedules[j];
      const double r = scenario.agents[j].r;
      const double w = -range_sign(position(sched, mid) - x, r) / r;
      if (w == 0.0) continue;
      const std::size_t seg = segment_at(sched, mid);
      const auto a = position_sensitivities_in_segment(sched, seg, qa);
      const auto b = position_sensitivities_in_segment(sched, seg, qb);
      auto add = [&](Eigen::Index col, double va, double vb) {
        table.start(k, col) += w * va;
        table.slope(k, col) += w * (vb - va) / h;
      };
      const Eigen::Index o = offset[j];
      const auto P = static_cast<Eigen::Index>(sched.P);
      add(o, a.d_s0, b.d_s0);
      for (Eigen::Index m = 0; m < P; ++m) {
        add(o + 1 + m, a.d_tau[static_cast<std::size_t>(m)], b.d_tau[static_cast<std::size_t>(m)]);
        add(o + 1 + P + m, a.d_omega[static_cast<std::size_t>(m)], b.d_omega[static_cast<std::size_t>(m)]);
      }
      add(col_T, a.d_T, b.d_T);
    }
  }
  return table;
}

Matrix variational_forcing(const ParameterId& param, const Matrix& omega, double eta, double deta,
                           const TargetModel& target, double T) {
  Matrix out = -(T * deta) * (omega * target.G() * omega);
  if (param.kind == ParameterId::Kind::kPeriod) out += riccati_rhs(omega, eta, target, T) / T;
  return symmetrized(out);
}

namespace {

constexpr double kRk4Nodes[4] = {0.0, 0.5, 0.5, 1.0};

// Joint RK4 pass over one period: Omega (replayed from the cycle's start),
// Sigma_H, and one particular solution per requested parameter.
struct VariationalPass {
  std::vector<Matrix> sigma_h;
  Matrix sigma_h_end;
  Matrix gram;
  std::vector<Matrix> zi_end;
  std::vector<double> zi_integral;
  std::vector<std::vector<Matrix>> zi_trace;
};

VariationalPass run_pass(const CovarianceCycle& cycle, const TargetModel& model, double T,
                         const EtaDerivativeTable* table, std::span<const std::size_t> params, bool store) {
  const auto& grid = *cycle.grid;
  const auto& nodes = grid.nodes();
  const auto& eta = grid.eta(cycle.target_index);
  const int L = model.state_dim();
  const Matrix& A = model.A();
  const Matrix& G = model.G();
  const std::size_t n = params.size();

  VariationalPass out;
  Matrix Y = Matrix::Identity(L, L);
  out.gram = Matrix::Zero(L, L);
  std::vector<Matrix> X(n, Matrix::Zero(L, L));
  out.zi_integral.assign(n, 0.0);
  if (store) {
    out.sigma_h.reserve(nodes.size());
    out.sigma_h.push_back(Y);
    out.zi_trace.assign(n, {});
    for (auto& tr : out.zi_trace) {
      tr.reserve(nodes.size());
      tr.push_back(Matrix::Zero(L, L));
    }
  }

  std::vector<char> is_period(n, 0);
  if (table != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      is_period[i] = table->params[params[i]].kind == ParameterId::Kind::kPeriod;
    }
  }

  Matrix O[4], Kr[4], F[4], OGO[4];
  double et[4];
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const double h = nodes[k + 1] - nodes[k];
    const auto& seg = eta[k];
    O[0] = cycle.omega_bar[k];
    for (int s = 0; s < 4; ++s) {
      et[s] = seg.at(kRk4Nodes[s] * h);
      if (s > 0) O[s] = O[0] + (kRk4Nodes[s] * h) * Kr[s - 1];
      Kr[s] = riccati_rhs(O[s], et[s], model, T);
      F[s] = T * (A - et[s] * O[s] * G);
      OGO[s] = O[s] * G * O[s];
    }
    const Matrix& Ob = cycle.omega_bar[k + 1];
    const double eb = seg.at(h);
    const Matrix Fb = T * (A - eb * Ob * G);
    const Matrix OGOb = Ob * G * Ob;
    const Matrix Kb = riccati_rhs(Ob, eb, model, T);

    // Sigma_H and its Gram integral.
    {
      const Matrix a1 = F[0] * Y;
      const Matrix a2 = F[1] * (Y + 0.5 * h * a1);
      const Matrix a3 = F[2] * (Y + 0.5 * h * a2);
      const Matrix a4 = F[3] * (Y + h * a3);
      const Matrix Yb = Y + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      const Matrix Ma = Y.transpose() * Y;
      const Matrix Mb = Yb.transpose() * Yb;
      const Matrix Da = Y.transpose() * (F[0] + F[0].transpose()) * Y;
      const Matrix Db = Yb.transpose() * (Fb + Fb.transpose()) * Yb;
      out.gram += 0.5 * h * (Ma + Mb) + (h * h / 12.0) * (Da - Db);
      Y = Yb;
      if (!Y.allFinite()) {
        throw DivergenceError(cycle.target_index, nodes[k + 1], "homogeneous transition diverged");
      }
      if (store) out.sigma_h.push_back(Y);
    }

    for (std::size_t i = 0; i < n; ++i) {
      const auto col = static_cast<Eigen::Index>(params[i]);
      const auto row = static_cast<Eigen::Index>(k);
      const double d0 = table->start(row, col);
      const double d1 = table->slope(row, col);
      auto forcing = [&](int s) -> Matrix {
        Matrix f = -(T * (d0 + d1 * kRk4Nodes[s] * h)) * OGO[s];
        if (is_period[i]) f += Kr[s] / T;
        return f;
      };
      const Matrix f0 = forcing(0);
      Matrix fb = -(T * (d0 + d1 * h)) * OGOb;
      if (is_period[i]) fb += Kb / T;

      const Matrix& Xa = X[i];
      auto g = [&](int s, const Matrix& Z, const Matrix& f) -> Matrix {
        const Matrix FZ = F[s] * Z;
        return FZ + FZ.transpose() + f;
      };
      const Matrix b1 = g(0, Xa, f0);
      const Matrix b2 = g(1, Xa + 0.5 * h * b1, forcing(1));
      const Matrix b3 = g(2, Xa + 0.5 * h * b2, forcing(2));
      const Matrix b4 = g(3, Xa + h * b3, forcing(3));
      Matrix Xb = symmetrized(Xa + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4));
      const double da = 2.0 * (F[0] * Xa).trace() + f0.trace();
      const double db = 2.0 * (Fb * Xb).trace() + fb.trace();
      out.zi_integral[i] += 0.5 * h * (Xa.trace() + Xb.trace()) + (h * h / 12.0) * (da - db);
      if (!Xb.allFinite()) {
        throw DivergenceError(cycle.target_index, nodes[k + 1], "particular solution diverged");
      }
      X[i] = std::move(Xb);
      if (store) out.zi_trace[i].push_back(X[i]);
    }
  }
  out.sigma_h_end = Y;
  out.zi_end = std::move(X);
  return out;
}

// LU of (I - S (x) S), shared by every right-hand side of one target.
class SteinSolver {
 public:
  explicit SteinSolver(const Matrix& S) : L_(static_cast<int>(S.rows())) {
    const double rho = spectral_radius(S);
    if (!(rho < 1.0)) {
      std::ostringstream os;
      os << "periodic sensitivity equation has no unique solution: spectral radius " << rho << " >= 1";
      throw UniquenessError(rho, os.str());
    }
    const int n = L_ * L_;
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
    // vec(S L S^T) = (S (x) S) vec(L) with column-major vec.
    for (int a = 0; a < L_; ++a) {
      for (int b = 0; b < L_; ++b) {
        M.block(a * L_, b * L_, L_, L_) -= S(a, b) * Eigen::MatrixXd(S);
      }
    }
    lu_.compute(M);
  }

  [[nodiscard]] Matrix solve(const Matrix& C) const {
    Eigen::VectorXd c(L_ * L_);
    for (int col = 0; col < L_; ++col) {
      for (int row = 0; row < L_; ++row) c(col * L_ + row) = C(row, col);
    }
    const Eigen::VectorXd v = lu_.solve(c);
    Matrix out(L_, L_);
    for (int col = 0; col < L_; ++col) {
      for (int row = 0; row < L_; ++row) out(row, col) = v(col * L_ + row);
    }
    if (is_symmetric(C)) out = symmetrized(out);
    return out;
  }

 private:
  int L_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

std::size_t column_of(const EtaDerivativeTable& table, const ParameterId& param) {
  for (std::size_t n = 0; n < table.params.size(); ++n) {
    if (table.params[n] == param) return n;
  }
  throw ValidationError("unknown parameter " + param.name());
}

}  // namespace

SensitivitySystem homogeneous_transition(const CovarianceCycle& cycle, const Scenario& scenario) {
  const auto& model = scenario.targets.at(cycle.target_index);
  auto pass = run_pass(cycle, model, scenario.T, nullptr, {}, true);
  SensitivitySystem sys;
  sys.target_index = cycle.target_index;
  sys.grid = cycle.grid;
  sys.sigma_h = std::move(pass.sigma_h);
  sys.sigma_h_end = pass.sigma_h_end;
  sys.spectral_radius_end = spectral_radius(sys.sigma_h_end);
  sys.gram = pass.gram;
  return sys;
}

std::vector<Matrix> particular_solution(const ParameterId& param, const CovarianceCycle& cycle,
                                        const Scenario& scenario) {
  const auto table = eta_derivative_table(scenario, *cycle.grid, cycle.target_index);
  const std::size_t col = column_of(table, param);
  const std::size_t cols[1] = {col};
  auto pass = run_pass(cycle, scenario.targets.at(cycle.target_index), scenario.T, &table, cols, true);
  return std::move(pass.zi_trace.front());
}

Matrix solve_stein(const Matrix& S, const Matrix& C) { return SteinSolver(S).solve(C); }

double stein_residual(const Matrix& S, const Matrix& C, const Matrix& lambda) {
  return (lambda - S * lambda * S.transpose() - C).norm();
}

std::vector<Matrix> sensitivity_trace(const SensitivitySystem& system, const Matrix& lambda,
                                      std::span<const Matrix> sigma_zi) {
  if (sigma_zi.size() != system.sigma_h.size()) throw ValidationError("sensitivity_trace: grid size mismatch");
  std::vector<Matrix> out;
  out.reserve(sigma_zi.size());
  for (std::size_t k = 0; k < sigma_zi.size(); ++k) {
    const Matrix& Y = system.sigma_h[k];
    out.push_back(symmetrized(Y * lambda * Y.transpose() + sigma_zi[k]));
  }
  return out;
}

std::vector<double> variational_residuals(const ParameterId& param, std::span<const Matrix> trace,
                                          const CovarianceCycle& cycle, const Scenario& scenario) {
  const auto& grid = *cycle.grid;
  const auto& nodes = grid.nodes();
  if (trace.size() != nodes.size()) throw ValidationError("variational_residuals: grid size mismatch");
  const auto table = eta_derivative_table(scenario, grid, cycle.target_index);
  const auto col = static_cast<Eigen::Index>(column_of(table, param));
  const auto& model = scenario.targets.at(cycle.target_index);
  const double T = scenario.T;
  const auto& eta = grid.eta(cycle.target_index);

  const Matrix& A = model.A();
  const Matrix& G = model.G();
  const bool period = param.kind == ParameterId::Kind::kPeriod;
  // Right-hand side f and its derivative along the solution at one node, with
  // eta and d eta / d theta affine (slopes e1, de1) over the interval.
  struct Slope {
    Matrix f, df;
  };
  auto eval = [&](const Matrix& X, const Matrix& omega, double e, double e1, double de, double de1) {
    const Matrix OGO = omega * G * omega;
    const Matrix omega1 = riccati_rhs(omega, e, model, T);
    const Matrix OGO1 = omega1 * G * omega + omega * G * omega1;
    const Matrix F = T * (A - e * omega * G);
    const Matrix F1 = -T * (e1 * omega * G + e * omega1 * G);
    Matrix forcing = -(T * de) * OGO;
    Matrix forcing1 = -T * (de1 * OGO + de * OGO1);
    if (period) {
      forcing += omega1 / T;
      forcing1 += A * omega1 + omega1 * A.transpose() - e1 * OGO - e * OGO1;
    }
    const Matrix FX = F * X;
    Slope out;
    out.f = symmetrized(FX + FX.transpose() + forcing);
    const Matrix half = F1 * X + F * out.f;
    out.df = symmetrized(half + half.transpose() + forcing1);
    return out;
  };
  std::vector<double> out(grid.intervals());
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const double h = nodes[k + 1] - nodes[k];
    const auto row = static_cast<Eigen::Index>(k);
    const double d0 = table.start(row, col);
    const double ds = table.slope(row, col);
    const auto a = eval(trace[k], cycle.omega_bar[k], eta[k].at(0.0), eta[k].slope, d0, ds);
    const auto b = eval(trace[k + 1], cycle.omega_bar[k + 1], eta[k].at(h), eta[k].slope, d0 + ds * h, ds);
    // Hermite-corrected trapezoid, exact through cubics.
    out[k] = (trace[k + 1] - trace[k] - 0.5 * h * (a.f + b.f) - (h * h / 12.0) * (a.df - b.df)).norm();
  }
  return out;
}

GradientBundle GradientBundle::zeros(const Scenario& scenario) {
  GradientBundle g;
  for (const auto& a : scenario.agents) {
    g.agents.push_back({0.0, std::vector<double>(a.moves(), 0.0), std::vector<double>(a.moves(), 0.0)});
  }
  return g;
}

std::vector<double> GradientBundle::values() const {
  std::vector<double> out;
  for (const auto& a : agents) {
    out.push_back(a.s0);
    out.insert(out.end(), a.tau.begin(), a.tau.end());
    out.insert(out.end(), a.omega.begin(), a.omega.end());
  }
  out.push_back(period);
  return out;
}

double& GradientBundle::at(const ParameterId& id) {
  switch (id.kind) {
    case ParameterId::Kind::kS0:
      return agents.at(id.agent).s0;
    case ParameterId::Kind::kTau:
      return agents.at(id.agent).tau.at(id.index);
    case ParameterId::Kind::kOmega:
      return agents.at(id.agent).omega.at(id.index);
    case ParameterId::Kind::kPeriod:
      break;
  }
  return period;
}

double GradientBundle::at(const ParameterId& id) const { return const_cast<GradientBundle&>(*this).at(id); }

bool GradientBundle::all_finite() const {
  for (double v : values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

GradientResult cost_gradient_with_report(const Scenario& scenario, std::span<const CovarianceCycle> cycles) {
  if (cycles.size() != scenario.targets.size()) throw ValidationError("cost_gradient: one cycle per target required");
  const auto ids = parameter_ids(scenario);
  const std::size_t M = cycles.size();
  std::vector<std::vector<double>> partial(M, std::vector<double>(ids.size(), 0.0));
  std::vector<TargetSensitivityReport> reports(M);

  parallel_for(M, [&](std::size_t i) {
    const auto& cycle = cycles[i];
    if (!cycle.grid) throw ValidationError("cost_gradient: cycle without grid");
    const auto& model = scenario.targets[cycle.target_index];
    const auto table = eta_derivative_table(scenario, *cycle.grid, cycle.target_index);
    std::vector<std::size_t> active;
    for (std::size_t n = 0; n < ids.size(); ++n) {
      if (ids[n].kind == ParameterId::Kind::kPeriod || table.active(n)) active.push_back(n);
    }
    const auto pass = run_pass(cycle, model, scenario.T, &table, active, false);
    const SteinSolver stein(pass.sigma_h_end);
    auto& rep = reports[i];
    rep.target_index = cycle.target_index;
    rep.spectral_radius = spectral_radius(pass.sigma_h_end);
    rep.active_parameters = active.size();
    const Matrix& S = pass.sigma_h_end;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const Matrix& C = pass.zi_end[a];
      const Matrix lambda = stein.solve(C);
      const double scale = 1.0 + lambda.norm();
      rep.max_stein_residual = std::max(rep.max_stein_residual, stein_residual(S, C, lambda) / scale);
      const Matrix end = S * lambda * S.transpose() + C;
      rep.max_periodicity_gap = std::max(rep.max_periodicity_gap, (end - lambda).norm() / scale);
      partial[i][active[a]] = (lambda * pass.gram).trace() + pass.zi_integral[a];
    }
  });

  GradientResult result;
  result.gradient = GradientBundle::zeros(scenario);
  for (std::size_t n = 0; n < ids.size(); ++n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < M; ++i) sum += partial[i][n];
    result.gradient.at(ids[n]) = sum;
  }
  result.reports = std::move(reports);
  return result;
}

GradientBundle cost_gradient(const Scenario& scenario, std::span<const CovarianceCycle> cycles) {
  return cost_gradient_with_report(scenario, cycles).gradient;
}

}  // namespace pmon
