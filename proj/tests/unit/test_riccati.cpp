#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "pmon/errors.hpp"
#include "pmon/linalg.hpp"
#include "pmon/riccati.hpp"

using namespace pmon;
using namespace pmon::testing;

namespace {

// Scenario 1 with the agent parked far from every target, so eta == 0.
Scenario unobserved_scenario(const Matrix& A, const Matrix& Q, double T) {
  Scenario s;
  s.T = T;
  const Matrix I = Matrix::Identity(A.rows(), A.rows());
  s.targets = {TargetModel(A, Q, I, I, 0.0)};
  AgentParams a;
  a.s0 = 100.0;
  a.tau = {0.0};
  a.omega = {1.0};
  a.r = 1.0;
  s.agents = {a};
  return s;
}

// Positive root of the scalar algebraic Riccati equation 2 a w + q - eta g w^2 = 0.
double scalar_fixed_point(double a, double q, double eta, double g) {
  return (a + std::sqrt(a * a + eta * g * q)) / (eta * g);
}

}  // namespace

TEST(RiccatiRhs, Examples) {
  const Scenario s = scalar_scenario(0.0);
  EXPECT_EQ(riccati_rhs(scalar(1.0), 1.0, s.targets[0], 1.0)(0, 0), 0.0);

  const TargetModel t = reference_target(0.0);
  const Matrix omega = mat(2, 2, {2.0, 0.3, 0.3, 1.0});
  const Matrix lyap = 6.0 * (t.A() * omega + omega * t.A().transpose() + t.Q());
  EXPECT_LT((riccati_rhs(omega, 0.0, t, 6.0) - lyap).norm(), 1e-14);
  EXPECT_LT((riccati_rhs(Matrix::Zero(2, 2), 0.7, t, 6.0) - 6.0 * t.Q()).norm(), 1e-15);

  const Matrix full = riccati_rhs(omega, 0.7, t, 6.0);
  EXPECT_EQ(full, full.transpose());
  EXPECT_LT((full - (lyap - 6.0 * 0.7 * omega * t.G() * omega)).norm(), 1e-13);
}

TEST(IntegratePeriod, LinearGrowthWithoutObservation) {
  const Scenario s = unobserved_scenario(Matrix::Zero(2, 2), Matrix::Identity(2, 2), 6.0);
  const auto trace = integrate_period(Matrix::Identity(2, 2), s, 0);
  EXPECT_LT((trace.back() - 7.0 * Matrix::Identity(2, 2)).norm(), 1e-12);
  EXPECT_LT((trace[trace.size() / 2] - 4.0 * Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(IntegratePeriod, ScalarFixedPointIsStationary) {
  const Scenario s = scalar_scenario(0.0);
  for (const auto& m : integrate_period(scalar(1.0), s, 0)) EXPECT_NEAR(m(0, 0), 1.0, 1e-15);
}

TEST(IntegratePeriod, ScenarioOneStaysPositiveDefinite) {
  const Scenario s = scenario1();
  for (std::size_t i = 0; i < 2; ++i) {
    for (const auto& m : integrate_period(s.targets[i].Q(), s, i)) {
      EXPECT_TRUE(is_symmetric(m, 0.0));
      EXPECT_GT(min_eigenvalue(m), 0.0);
    }
  }
}

TEST(IntegratePeriod, DivergenceNamesTarget) {
  const Scenario s = unobserved_scenario(scalar(1e3), scalar(1.0), 1e3);
  try {
    (void)integrate_period(scalar(1.0), s, 0);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.target(), 0u);
    EXPECT_GT(e.q(), 0.0);
    EXPECT_NE(std::string(e.what()).find("target 1"), std::string::npos);
  }
}

TEST(IntegratePeriod, MatchesFineReferenceSolution) {
  // The breakpoint-aligned grid keeps RK4 at full order; compare against the
  // same integrator on a grid sixteen times finer.
  const Scenario s = scenario1();
  const auto coarse = integrate_period(s.targets[1].Q(), s, 1, 500);
  const auto fine = integrate_period(s.targets[1].Q(), s, 1, 8000);
  EXPECT_LT((coarse.back() - fine.back()).norm() / fine.back().norm(), 1e-9);
}

TEST(CoverageGrid, NodesIncludeBreakpointsAndEtaMatches) {
  const Scenario s = scenario1();
  const auto grid = CoverageGrid::from_scenario(s, 400);
  const auto& nodes = grid.nodes();
  EXPECT_EQ(nodes.front(), 0.0);
  EXPECT_EQ(nodes.back(), 1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    const EtaTrace trace(s, i);
    for (double bp : trace.breakpoints()) {
      const auto it = std::lower_bound(nodes.begin(), nodes.end(), bp - 1e-13);
      ASSERT_NE(it, nodes.end());
      EXPECT_NEAR(*it, bp, 1e-13);
    }
    for (std::size_t k = 0; k < grid.intervals(); ++k) {
      const double h = nodes[k + 1] - nodes[k];
      EXPECT_NEAR(grid.eta(i)[k].at(0.5 * h), trace(nodes[k] + 0.5 * h), 1e-12);
      EXPECT_NEAR(grid.eta_at_node(i, k), trace(nodes[k]), 1e-12);
    }
    EXPECT_TRUE(grid.observed(i));
  }
}

TEST(CoverageGrid, RejectsMalformedInput) {
  EXPECT_THROW(CoverageGrid({0.0, 0.5}, {}), ValidationError);
  EXPECT_THROW(CoverageGrid({0.0, 0.5, 0.5, 1.0}, {}), ValidationError);
  EXPECT_THROW(CoverageGrid({0.0, 1.0}, {{}}), ValidationError);
  EXPECT_THROW((void)CoverageGrid::from_scenario(scenario1(), 0), ValidationError);
}

TEST(LimitCycle, ScalarClosedForms) {
  for (double a : {0.0, 1.0, -0.5}) {
    const Scenario s = scalar_scenario(a);
    const auto cycle = limit_cycle(s, 0);
    const double expected = scalar_fixed_point(a, 1.0, 1.0, 1.0);
    for (const auto& m : cycle.omega_bar) EXPECT_NEAR(m(0, 0), expected, 1e-6) << "a = " << a;
    EXPECT_LE(cycle.periodic_residual, 1e-9);
  }
  EXPECT_NEAR(scalar_fixed_point(1.0, 1.0, 1.0, 1.0), 1.0 + std::sqrt(2.0), 1e-15);
}

TEST(LimitCycle, UnobservedTargetIsAnError) {
  const Scenario s = unobserved_scenario(scalar(-1.0), scalar(1.0), 1.0);
  try {
    (void)limit_cycle(s, 0);
    FAIL() << "expected UnobservedTargetError";
  } catch (const UnobservedTargetError& e) {
    EXPECT_EQ(e.target(), 0u);
  }
}

TEST(LimitCycle, NonConvergenceCarriesHistory) {
  try {
    (void)limit_cycle(scenario1(), 0, 1e-9, 2);
    FAIL() << "expected NonConvergenceError";
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.residual_history().size(), 2u);
    EXPECT_GT(e.residual_history().front(), e.residual_history().back());
  }
}

TEST(LimitCycle, IndependentOfSeed) {
  const Scenario s = scenario1();
  auto grid = std::make_shared<const CoverageGrid>(CoverageGrid::from_scenario(s, 2000));
  for (std::size_t i = 0; i < 2; ++i) {
    CycleOptions from_q;
    CycleOptions from_big;
    from_big.seed = 10.0 * Matrix::Identity(2, 2);
    const auto a = limit_cycle(grid, s.targets[i], i, s.T, from_q);
    const auto b = limit_cycle(grid, s.targets[i], i, s.T, from_big);
    const double scale = a.omega_bar.front().norm();
    EXPECT_LE((a.omega_bar.front() - b.omega_bar.front()).norm(), 10.0 * from_q.tol * scale);
    for (const auto& m : a.omega_bar) EXPECT_GT(min_eigenvalue(m), 0.0);
  }
}

TEST(SteadyStateCost, ScalarAndAdditivity) {
  const Scenario s = scalar_scenario(0.0);
  EXPECT_NEAR(evaluate(s).cost, 1.0, 1e-9);

  Scenario twice = s;
  twice.targets.push_back(TargetModel(scalar(0.0), scalar(1.0), scalar(1.0), scalar(1.0), 0.5));
  // With a huge range both targets see eta = 1 to within 1e-9.
  twice.agents[0].r = 1e9;
  Scenario single = s;
  single.agents[0].r = 1e9;
  const auto both = evaluate(twice);
  EXPECT_NEAR(both.cost, 2.0 * evaluate(single).cost, 1e-9);
}

TEST(SteadyStateCost, ScenarioOneRegression) {
  const auto ev = evaluate(scenario1());
  // Frozen from this pipeline; cross-checked below against plain trapezoid on a fine grid.
  EXPECT_NEAR(ev.cost, 6.854659209673608, 1e-8);
  EvaluateOptions fine;
  fine.numerics.base_steps = 16000;
  const auto ref = evaluate(scenario1(), fine);
  double trapezoid = 0.0;
  for (const auto& c : ref.cycles) {
    const auto& q = ref.grid->nodes();
    for (std::size_t k = 0; k + 1 < q.size(); ++k) {
      trapezoid += 0.5 * (q[k + 1] - q[k]) * (c.omega_bar[k].trace() + c.omega_bar[k + 1].trace());
    }
  }
  EXPECT_NEAR(ev.cost, trapezoid, 1e-7 * trapezoid);
}

TEST(SteadyStateCost, StepHalvingConverges) {
  EvaluateOptions coarse, fine;
  coarse.numerics.base_steps = 2000;
  fine.numerics.base_steps = 4000;
  const double a = evaluate(scenario1(), coarse).cost;
  const double b = evaluate(scenario1(), fine).cost;
  EXPECT_LT(std::abs(a - b) / b, 1e-8);
}

TEST(Evaluate, DeterministicAndRequiresEveryTarget) {
  const auto a = evaluate(scenario1());
  const auto b = evaluate(scenario1());
  EXPECT_EQ(a.cost, b.cost);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.cycles[i].omega_bar.back(), b.cycles[i].omega_bar.back());

  Scenario s = scenario1();
  s.targets.push_back(reference_target(5.0));
  try {
    (void)evaluate(s);
    FAIL() << "expected UnobservedTargetError";
  } catch (const UnobservedTargetError& e) {
    EXPECT_EQ(e.target(), 2u);
    EXPECT_NE(std::string(e.what()).find("target 3"), std::string::npos);
  }
}

TEST(Evaluate, WarmStartReachesSameCycle) {
  const auto cold = evaluate(scenario1());
  EvaluateOptions warm;
  for (const auto& c : cold.cycles) warm.seeds.push_back(c.omega_bar.front());
  const auto hot = evaluate(scenario1(), warm);
  EXPECT_NEAR(hot.cost, cold.cost, 1e-8 * cold.cost);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(hot.cycles[i].cycles(), cold.cycles[i].cycles());
}
