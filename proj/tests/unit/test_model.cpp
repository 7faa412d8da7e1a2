#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "pmon/errors.hpp"
#include "pmon/linalg.hpp"
#include "pmon/model.hpp"

using namespace pmon;
using namespace pmon::testing;

namespace {

bool has_kind(const std::vector<Violation>& v, ViolationKind kind) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == kind; });
}

}  // namespace

TEST(TargetModel, CachesObservationGain) {
  const Matrix H = mat(1, 2, {1.0, 2.0});
  const Matrix R = scalar(4.0);
  const TargetModel t(Matrix::Identity(2, 2), Matrix::Identity(2, 2), H, R, 0.0);
  const Matrix expected = H.transpose() * H / 4.0;
  EXPECT_LT((t.G() - expected).norm(), 1e-15);
  EXPECT_EQ(t.state_dim(), 2);
  EXPECT_EQ(t.obs_dim(), 1);
}

TEST(TargetModel, RejectsInconsistentShapes) {
  const Matrix I2 = Matrix::Identity(2, 2);
  const Matrix I3 = Matrix::Identity(3, 3);
  EXPECT_THROW(TargetModel(mat(2, 3, {1, 2, 3, 4, 5, 6}), I2, I2, I2, 0.0), ValidationError);
  EXPECT_THROW(TargetModel(I2, I3, I2, I2, 0.0), ValidationError);
  EXPECT_THROW(TargetModel(I2, I2, mat(1, 3, {1, 0, 0}), scalar(1.0), 0.0), ValidationError);
  EXPECT_THROW(TargetModel(I2, I2, I2, scalar(1.0), 0.0), ValidationError);
  EXPECT_THROW(TargetModel(I2, I2, I2, I2, std::nan("")), ValidationError);
}

TEST(TargetModel, GainInvariantUnderJointScaling) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix H(2, 3);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 3; ++j) H(i, j) = N(rng);
    const Matrix R = random_spd(rng, 2, 0.2);
    const double c = 0.1 + 5.0 * std::abs(N(rng));
    const TargetModel a(Matrix::Identity(3, 3), Matrix::Identity(3, 3), H, R, 0.0);
    const TargetModel b(Matrix::Identity(3, 3), Matrix::Identity(3, 3), c * H, c * c * R, 0.0);
    EXPECT_LT((a.G() - b.G()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ValidateScenario, Scenario1IsValid) {
  EXPECT_TRUE(validate_scenario(scenario1()).empty());
}

TEST(ValidateScenario, SingleMoveCannotClose) {
  Scenario s = scenario1();
  s.agents[0].tau = {0.1};
  s.agents[0].omega = {0.0};
  const auto v = validate_scenario(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::kClosure);
  EXPECT_EQ(v[0].agent, std::optional<std::size_t>(0));
  EXPECT_NEAR(closure_residual(s.agents[0]), -0.1, 1e-15);
}

TEST(ValidateScenario, ZeroProcessNoiseIsReported) {
  Scenario s = scenario1();
  const Matrix I = Matrix::Identity(2, 2);
  s.targets[1] = TargetModel(s.targets[1].A(), Matrix::Zero(2, 2), I, I, 1.0);
  const auto v = validate_scenario(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::kProcessNoise);
  EXPECT_EQ(v[0].target, std::optional<std::size_t>(1));
}

TEST(ValidateScenario, ListsEveryViolation) {
  Scenario s = scenario1();
  s.T = -1.0;
  std::swap(s.targets[0], s.targets[1]);
  s.agents[0].tau = {0.6, 0.4, -0.1};
  s.agents[0].omega = {0.3, 0.0, 0.0};
  s.agents[0].r = 0.0;
  const auto v = validate_scenario(s);
  for (auto kind : {ViolationKind::kPeriod, ViolationKind::kTargetOrder, ViolationKind::kNegativeDuration,
                    ViolationKind::kDurationBudget, ViolationKind::kClosure, ViolationKind::kSensingRange}) {
    EXPECT_TRUE(has_kind(v, kind)) << to_string(kind);
  }
}

TEST(ValidateScenario, ShapeMismatch) {
  Scenario s = scenario1();
  s.agents[0].omega.pop_back();
  EXPECT_TRUE(has_kind(validate_scenario(s), ViolationKind::kParameterShape));
}

TEST(ValidateScenario, IndefiniteMeasurementNoise) {
  Scenario s = scenario1();
  const Matrix I = Matrix::Identity(2, 2);
  s.targets[0] = TargetModel(s.targets[0].A(), I, I, mat(2, 2, {1.0, 0.0, 0.0, -1.0}), -1.0);
  EXPECT_TRUE(has_kind(validate_scenario(s), ViolationKind::kMeasurementNoise));
}

TEST(ValidateScenario, UndetectablePair) {
  Scenario s = scenario1();
  const Matrix I = Matrix::Identity(2, 2);
  // Unstable mode along e2, which H cannot see.
  s.targets[0] = TargetModel(mat(2, 2, {-1.0, 0.0, 0.0, 0.5}), I, mat(1, 2, {1.0, 0.0}), scalar(1.0), -1.0);
  EXPECT_TRUE(has_kind(validate_scenario(s), ViolationKind::kDetectability));
}

TEST(ValidateScenario, Idempotent) {
  Scenario s = scenario1();
  s.T = 0.0;
  s.agents[0].tau = {0.9, 0.2, 0.2};
  EXPECT_EQ(validate_scenario(s), validate_scenario(s));
}

TEST(Detectability, EigenvectorCriterion) {
  const Matrix A = mat(2, 2, {-1.0, -0.1, -0.1, 0.01});
  EXPECT_TRUE(is_detectable(A, Matrix::Identity(2, 2)));
  // Stable hidden mode is fine.
  EXPECT_TRUE(is_detectable(mat(2, 2, {0.5, 0.0, 0.0, -2.0}), mat(1, 2, {1.0, 0.0})));
  // Marginal hidden mode is not.
  EXPECT_FALSE(is_detectable(mat(2, 2, {-1.0, 0.0, 0.0, 0.0}), mat(1, 2, {1.0, 0.0})));
}

TEST(Snr, Examples) {
  const Matrix I = Matrix::Identity(2, 2);
  const TargetModel t(Matrix::Zero(2, 2), I, I, I, 3.0);
  Vector phi(2);
  phi << 1.0, 1.0;
  EXPECT_DOUBLE_EQ(snr_diagnostic(t, 3.0, 0.9, phi), 1.0);
  EXPECT_NEAR(snr_diagnostic(t, 3.9, 0.9, phi), 0.0, 1e-15);
  EXPECT_EQ(snr_diagnostic(t, 1.0, 0.9, phi), 0.0);
  phi << 1.0, 0.0;
  EXPECT_NEAR(snr_diagnostic(t, 3.45, 0.9, phi), 0.25, 1e-15);
  EXPECT_THROW((void)snr_diagnostic(t, 3.0, 0.0, phi), DomainError);
}

TEST(Linalg, Definiteness) {
  EXPECT_TRUE(is_positive_definite(Matrix::Identity(3, 3)));
  EXPECT_FALSE(is_positive_definite(Matrix::Zero(2, 2)));
  EXPECT_TRUE(is_positive_semidefinite(Matrix::Zero(2, 2)));
  EXPECT_FALSE(is_positive_semidefinite(mat(2, 2, {1.0, 2.0, 2.0, 1.0})));
  EXPECT_NEAR(spectral_radius(mat(2, 2, {0.0, 1.0, -1.0, 0.0})), 1.0, 1e-14);
  EXPECT_TRUE(is_symmetric(symmetrized(mat(2, 2, {1.0, 2.0, 3.0, 4.0}))));
}
