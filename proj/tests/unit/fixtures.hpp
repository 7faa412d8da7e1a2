#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pmon/model.hpp"

namespace pmon::testing {

inline Matrix mat(int rows, int cols, std::initializer_list<double> row_major) {
  Matrix m(rows, cols);
  auto it = row_major.begin();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = *it++;
  return m;
}

inline Matrix scalar(double v) { return mat(1, 1, {v}); }

inline TargetModel reference_target(double x) {
  const Matrix I = Matrix::Identity(2, 2);
  return TargetModel(mat(2, 2, {-1.0, -0.1, -0.1, 0.01}), I, I, I, x);
}

inline AgentParams scenario1_agent() {
  AgentParams a;
  a.s0 = 0.0;
  a.tau = {0.2, 0.4, 0.2};
  a.omega = {0.05, 0.05, 0.05};
  a.r = 0.9;
  return a;
}

/// One agent, two targets at -1 and +1, T = 6.
inline Scenario scenario1() {
  Scenario s;
  s.T = 6.0;
  s.targets = {reference_target(-1.0), reference_target(1.0)};
  s.agents = {scenario1_agent()};
  return s;
}

/// Two agents, five targets at 3, 5, ..., 11, with the initial schedule as
/// given (not closed).
inline Scenario scenario2_initial() {
  Scenario s;
  s.T = 6.0;
  for (int i = 1; i <= 5; ++i) s.targets.push_back(reference_target(1.0 + 2.0 * i));
  AgentParams a;
  a.tau = {0.1, 0.01, 0.1, 0.1, 0.01, 0.1, 0.01, 0.1, 0.1, 0.01, 0.1};
  a.omega.assign(11, 0.0125);
  a.r = 0.9;
  a.s0 = 2.7;
  s.agents.push_back(a);
  a.s0 = 6.8;
  s.agents.push_back(a);
  return s;
}

/// Scalar target at 0 with a = `a`, q = g = 1 and one agent dwelling on it
/// for the whole period, so eta == 1.
inline Scenario scalar_scenario(double a, double T = 1.0) {
  Scenario s;
  s.T = T;
  s.targets = {TargetModel(scalar(a), scalar(1.0), scalar(1.0), scalar(1.0), 0.0)};
  AgentParams ag;
  ag.s0 = 0.0;
  ag.tau = {0.0};
  ag.omega = {1.0};
  ag.r = 1.0;
  s.agents = {ag};
  return s;
}

inline Matrix random_spd(std::mt19937_64& rng, int n, double floor) {
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = N(rng);
  Matrix out = B * B.transpose() / n;
  out += floor * Matrix::Identity(n, n);
  return out;
}

/// Feasible one-agent, two-target scenario with L = 2 and P = 3. The agent
/// starts near the left target, turns near the right one, swings back past
/// its start and returns. Every turning point keeps at least `margin` from
/// distance 0 and r of both targets.
inline Scenario random_two_target_scenario(std::uint64_t seed, double margin = 0.05) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };

  for (;;) {
    Scenario s;
    s.T = u(6.0, 10.0);
    const double d = u(1.2, 2.4);
    const double r = u(0.7, 1.1);
    for (double x : {-0.5 * d, 0.5 * d}) {
      Matrix A(2, 2);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) A(i, j) = 0.4 * N(rng);
      A -= 0.3 * Matrix::Identity(2, 2);
      Matrix H = Matrix::Identity(2, 2);
      H(0, 1) = 0.5 * N(rng);
      H(1, 0) = 0.5 * N(rng);
      s.targets.emplace_back(A, random_spd(rng, 2, 0.3), H, random_spd(rng, 2, 0.5), x);
    }
    const double x1 = -0.5 * d, x2 = 0.5 * d;
    AgentParams a;
    a.r = r;
    a.s0 = x1 + u(-0.4, 0.4);
    const double p1 = x2 + u(-0.4, 0.4);
    const double p2 = a.s0 - u(0.1, 0.5);
    a.tau = {(p1 - a.s0) / s.T, (p1 - p2) / s.T, (a.s0 - p2) / s.T};
    const double used = a.tau[0] + a.tau[1] + a.tau[2];
    if (used > 0.85) continue;
    const double budget = (1.0 - used) * u(0.5, 0.95);
    std::vector<double> w = {u(0.2, 1.0), u(0.2, 1.0), u(0.2, 1.0)};
    const double wsum = w[0] + w[1] + w[2];
    for (double& v : w) v *= budget / wsum;
    a.omega = w;
    a.tau[1] = a.tau[0] + a.tau[2];  // exact closure

    bool clear = true;
    for (double p : {a.s0, p1, p2}) {
      for (double x : {x1, x2}) {
        const double dist = std::abs(p - x);
        if (dist < margin || std::abs(dist - r) < margin) clear = false;
      }
    }
    if (!clear) continue;
    s.agents = {a};
    return s;
  }
}

/// Two isolated targets at -1.5 and +1.5, one agent with r = 0.6, T = 20.
inline Scenario isolated_pair_scenario() {
  Scenario s;
  s.T = 20.0;
  s.targets = {reference_target(-1.5), reference_target(1.5)};
  AgentParams a;
  a.tau = {0.0};
  a.omega = {1.0};
  a.r = 0.6;
  s.agents = {a};
  return s;
}

/// Periodic two-harmonic oscillation sampled at n + 1 uniform points. It
/// swings through both targets of isolated_pair_scenario and stays below
/// unit speed for T = 20.
inline std::vector<double> random_oscillation(std::uint64_t seed, std::size_t n = 2000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };
  const double c = u(-0.15, 0.15), a1 = u(1.6, 2.2), a2 = u(0.0, 0.3);
  const double p1 = u(0.0, 2.0 * M_PI), p2 = u(0.0, 2.0 * M_PI);
  std::vector<double> s(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double q = static_cast<double>(k % n) / static_cast<double>(n);
    s[k] = c + a1 * std::sin(2.0 * M_PI * q + p1) + a2 * std::sin(4.0 * M_PI * q + p2);
  }
  return s;
}

inline std::filesystem::path data_dir() { return std::filesystem::path(PMON_TEST_DATA_DIR); }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("pmon_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace pmon::testing
