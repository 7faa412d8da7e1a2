#include "pmon/model.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include "pmon/errors.hpp"

namespace pmon {
namespace {

constexpr double kEigenRealThreshold = -1e-10;
constexpr double kKernelThreshold = 1e-10;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

std::string describe(const char* what, std::size_t index) {
  std::ostringstream os;
  os << what << ' ' << index + 1;
  return os.str();
}

}  // namespace

TargetModel::TargetModel(Matrix A, Matrix Q, Matrix H, Matrix R, double x)
    : A_(std::move(A)), Q_(std::move(Q)), H_(std::move(H)), R_(std::move(R)), x_(x) {
  const auto L = A_.rows();
  const auto m = H_.rows();
  require(L > 0 && A_.cols() == L, "A must be square and non-empty");
  require(Q_.rows() == L && Q_.cols() == L, "Q must match the dimension of A");
  require(m > 0 && H_.cols() == L, "H must have as many columns as A");
  require(R_.rows() == m && R_.cols() == m, "R must be square with as many rows as H");
  require(std::isfinite(x_), "target position must be finite");
  // G = H^T R^-1 H; R definiteness is checked by validate_scenario.
  const Matrix rinv_h = R_.fullPivLu().solve(H_);
  G_ = symmetrized(H_.transpose() * rinv_h);
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kPeriod: return "period";
    case ViolationKind::kTargetOrder: return "target-order";
    case ViolationKind::kProcessNoise: return "process-noise";
    case ViolationKind::kMeasurementNoise: return "measurement-noise";
    case ViolationKind::kObservationGain: return "observation-gain";
    case ViolationKind::kDetectability: return "detectability";
    case ViolationKind::kSensingRange: return "sensing-range";
    case ViolationKind::kParameterShape: return "parameter-shape";
    case ViolationKind::kNegativeDuration: return "negative-duration";
    case ViolationKind::kDurationBudget: return "duration-budget";
    case ViolationKind::kClosure: return "closure";
  }
  return "unknown";
}

double closure_residual(const AgentParams& agent) {
  double sum = 0.0;
  for (std::size_t p = 0; p < agent.tau.size(); ++p) {
    // p is 0-based, so (-1)^(p+1).
    sum += (p % 2 == 0 ? -1.0 : 1.0) * agent.tau[p];
  }
  return sum;
}

std::vector<Violation> validate_agent(const AgentParams& agent, std::optional<std::size_t> index) {
  std::vector<Violation> out;
  const std::string who = index ? describe("agent", *index) : std::string("agent");
  auto add = [&](ViolationKind kind, const std::string& msg) { out.push_back({kind, std::nullopt, index, who + ": " + msg}); };

  if (!(agent.r > 0.0) || !std::isfinite(agent.r)) add(ViolationKind::kSensingRange, "sensing range must be positive");
  if (!std::isfinite(agent.s0)) add(ViolationKind::kParameterShape, "initial position must be finite");
  if (agent.tau.size() != agent.omega.size() || agent.tau.empty()) {
    add(ViolationKind::kParameterShape, "tau and omega must be non-empty and of equal length");
    return out;
  }
  double total = 0.0;
  for (std::size_t p = 0; p < agent.tau.size(); ++p) {
    if (!(agent.tau[p] >= 0.0) || !(agent.omega[p] >= 0.0)) {
      std::ostringstream os;
      os << "durations must be nonnegative (segment " << p + 1 << ")";
      add(ViolationKind::kNegativeDuration, os.str());
    }
    total += agent.tau[p] + agent.omega[p];
  }
  if (!(total <= 1.0 + kFeasibilityTol)) {
    std::ostringstream os;
    os << "normalized durations sum to " << total << " > 1";
    add(ViolationKind::kDurationBudget, os.str());
  }
  const double closure = closure_residual(agent);
  if (!(std::abs(closure) <= kFeasibilityTol)) {
    std::ostringstream os;
    os << "trajectory does not close: alternating movement sum is " << closure;
    add(ViolationKind::kClosure, os.str());
  }
  return out;
}

bool is_detectable(const Matrix& A, const Matrix& H) {
  Eigen::EigenSolver<Matrix> es(A, true);
  if (es.info() != Eigen::Success) return false;
  const Eigen::MatrixXcd vectors = es.eigenvectors();
  const Eigen::MatrixXcd h = H.cast<std::complex<double>>();
  for (Eigen::Index k = 0; k < A.rows(); ++k) {
    if (es.eigenvalues()(k).real() < kEigenRealThreshold) continue;
    const Eigen::VectorXcd v = vectors.col(k);
    if (!((h * v).norm() > kKernelThreshold * v.norm())) return false;
  }
  return true;
}

std::vector<Violation> validate_scenario(const Scenario& scenario) {
  std::vector<Violation> out;
  if (!(scenario.T > 0.0) || !std::isfinite(scenario.T)) {
    out.push_back({ViolationKind::kPeriod, std::nullopt, std::nullopt, "period T must be positive"});
  }
  for (std::size_t i = 0; i < scenario.targets.size(); ++i) {
    const auto& t = scenario.targets[i];
    const std::string who = describe("target", i) + ": ";
    auto add = [&](ViolationKind kind, const std::string& msg) { out.push_back({kind, i, std::nullopt, who + msg}); };
    if (i > 0 && !(scenario.targets[i - 1].x() < t.x())) add(ViolationKind::kTargetOrder, "positions must be strictly increasing");
    if (!is_positive_definite(t.Q())) add(ViolationKind::kProcessNoise, "Q must be symmetric positive definite");
    const bool r_ok = is_positive_definite(t.R());
    if (!r_ok) add(ViolationKind::kMeasurementNoise, "R must be symmetric positive definite");
    if (r_ok && !is_positive_semidefinite(t.G())) add(ViolationKind::kObservationGain, "G = H^T R^-1 H must be positive semidefinite");
    if (!t.A().allFinite() || !t.H().allFinite() || !is_detectable(t.A(), t.H())) {
      add(ViolationKind::kDetectability, "(A, H) must be detectable");
    }
  }
  for (std::size_t j = 0; j < scenario.agents.size(); ++j) {
    auto agent_violations = validate_agent(scenario.agents[j], j);
    out.insert(out.end(), agent_violations.begin(), agent_violations.end());
  }
  return out;
}

double snr_diagnostic(const TargetModel& target, double agent_pos, double r, const Vector& phi) {
  if (!(r > 0.0)) throw DomainError("snr_diagnostic: sensing range must be positive");
  const double proximity = std::max(0.0, 1.0 - std::abs(agent_pos - target.x()) / r);
  const Vector hphi = target.H() * phi;
  return proximity * hphi.squaredNorm() / target.R().trace();
}

}  // namespace pmon
