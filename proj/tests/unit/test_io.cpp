#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "pmon/csv.hpp"
#include "pmon/errors.hpp"
#include "pmon/scenario_io.hpp"

using namespace pmon;
using namespace pmon::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

void expect_lf_only(const std::string& text) {
  EXPECT_EQ(text.find('\r'), std::string::npos);
  ASSERT_FALSE(text.empty());
  EXPECT_EQ(text.back(), '\n');
}

}  // namespace

TEST(ScenarioIo, LoadsBundledFiles) {
  const auto one = load_scenario(data_dir() / "scenario1.json");
  EXPECT_EQ(one.scenario.T, 6.0);
  ASSERT_EQ(one.scenario.targets.size(), 2u);
  EXPECT_EQ(one.scenario.targets[0].x(), -1.0);
  EXPECT_EQ(one.scenario.agents[0], scenario1_agent());
  EXPECT_EQ(one.scenario.targets[1].A(), reference_target(1.0).A());
  ASSERT_TRUE(one.descent.has_value());
  ASSERT_TRUE(one.monte_carlo.has_value());

  const auto two = load_scenario(data_dir() / "scenario2.json");
  EXPECT_EQ(two.scenario.targets.size(), 5u);
  EXPECT_EQ(two.scenario.agents, scenario2_initial().agents);

  for (const char* name : {"scalar_benchmark.json", "scalar_unstable.json", "unvisited_target.json"}) {
    EXPECT_NO_THROW((void)load_scenario(data_dir() / name)) << name;
  }
}

TEST(ScenarioIo, RoundTripIsExact) {
  std::mt19937_64 rng(99);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ScenarioFile f;
    f.scenario = random_two_target_scenario(seed);
    f.descent = DescentConfig{0.013, 3e-5, 17, 0.25};
    McConfig mc;
    mc.rng_seed = rng();
    mc.dt = 1.0 / 3.0;
    f.monte_carlo = mc;
    f.numerics = NumericsConfig{1234, 1e-11, 77};
    const auto back = parse_scenario(dump_scenario(f));
    EXPECT_EQ(back.scenario.T, f.scenario.T);
    EXPECT_EQ(back.scenario.agents, f.scenario.agents);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_EQ(back.scenario.targets[i].A(), f.scenario.targets[i].A());
      EXPECT_EQ(back.scenario.targets[i].Q(), f.scenario.targets[i].Q());
      EXPECT_EQ(back.scenario.targets[i].H(), f.scenario.targets[i].H());
      EXPECT_EQ(back.scenario.targets[i].R(), f.scenario.targets[i].R());
      EXPECT_EQ(back.scenario.targets[i].x(), f.scenario.targets[i].x());
    }
    EXPECT_EQ(back.descent->kappa, 0.013);
    EXPECT_EQ(back.descent->max_iter, 17);
    EXPECT_EQ(back.monte_carlo->rng_seed, mc.rng_seed);
    EXPECT_EQ(back.monte_carlo->dt, mc.dt);
    EXPECT_EQ(back.numerics->base_steps, 1234);
    EXPECT_EQ(dump_scenario(back), dump_scenario(f));
  }
}

TEST(ScenarioIo, RejectsMalformedDocuments) {
  const std::string good = dump_scenario(ScenarioFile{scenario1(), {}, {}, {}});
  EXPECT_NO_THROW((void)parse_scenario(good));
  EXPECT_THROW((void)parse_scenario("{"), ValidationError);
  EXPECT_THROW((void)parse_scenario("[]"), ValidationError);

  std::string extra = good;
  extra.insert(extra.find('{') + 1, "\"colour\": 1,");
  try {
    (void)parse_scenario(extra);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }

  std::string ragged = good;
  ragged.replace(ragged.find("\"rows\": 2"), 9, "\"rows\": 3");
  EXPECT_THROW((void)parse_scenario(ragged), ValidationError);

  std::string no_t = good;
  no_t.replace(no_t.find("\"T\""), 3, "\"U\"");
  EXPECT_THROW((void)parse_scenario(no_t), ValidationError);
  EXPECT_THROW((void)load_scenario(data_dir() / "missing.json"), ValidationError);
}

TEST(Csv, FormatNumberRoundTrips) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = U(rng) * std::pow(10.0, k % 40 - 20);
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(6.0), "6");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Csv, WriterShapesRows) {
  CsvWriter w({"a", "b"});
  w.row({"1", "2"}).row({"3", "4"});
  EXPECT_EQ(w.str(), "a,b\n1,2\n3,4\n");
  EXPECT_EQ(w.columns(), 2u);
  EXPECT_THROW(w.row({"5"}), ValidationError);
}

TEST(Csv, TablesHaveHeadersAndLfEndings) {
  const Scenario s = scenario1();
  const auto ev = evaluate(s);
  const std::string cycle = cycle_csv(ev.cycles[0]);
  expect_lf_only(cycle);
  EXPECT_EQ(first_line(cycle), "q,omega_1_1,omega_1_2,omega_2_1,omega_2_2,trace");
  const auto table = parse_numeric_csv(cycle);
  EXPECT_EQ(table.rows.size(), ev.grid->nodes().size());
  EXPECT_EQ(table.rows.back()[0], 1.0);

  const std::string pos = positions_csv(s, *ev.grid);
  expect_lf_only(pos);
  EXPECT_EQ(first_line(pos), "q,agent1");

  const auto grad = cost_gradient(s, ev.cycles);
  const std::string g = gradient_csv(s, grad);
  expect_lf_only(g);
  EXPECT_EQ(first_line(g), "parameter,value");
  EXPECT_NE(g.find("\nglobal.T,"), std::string::npos);

  DescentHistory h;
  h.records.push_back({0, 6.8, std::numeric_limits<double>::infinity(), 6.0, s.agents});
  const std::string hist = history_csv(h);
  expect_lf_only(hist);
  EXPECT_EQ(first_line(hist),
            "iter,J,grad_norm,T,agent1.s0,agent1.tau1,agent1.tau2,agent1.tau3,agent1.omega1,agent1.omega2,agent1.omega3");
  EXPECT_NE(hist.find("0,6.8,inf,6,0,0.2,0.4,0.2,0.05,0.05,0.05\n"), std::string::npos);

  McReport mc;
  mc.targets = {{0, 1.0, 2.0}};
  mc.empirical_total = 1.0;
  mc.predicted_total = 2.0;
  mc.rng_algorithm = kRngAlgorithm;
  const std::string m = mc_report_csv(mc);
  expect_lf_only(m);
  EXPECT_EQ(first_line(m), "target,empirical_mse,predicted,ratio,n_trials,dt,n_periods,burn_in_periods,seed,rng");
  EXPECT_NE(m.find("\ntotal,1,2,0.5,"), std::string::npos);

  GradcheckReport gr;
  const std::string gc = gradcheck_csv(gr);
  EXPECT_EQ(first_line(gc), "parameter,ipa,fd,rel_error,status,step,one_sided,step_shrunk");
}

TEST(Csv, ParseNumericRejectsBadInput) {
  const auto t = parse_numeric_csv("q,agent1\r\n0,1.5\r\n1,-2e-3\r\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"q", "agent1"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], -2e-3);
  EXPECT_THROW((void)parse_numeric_csv(""), ValidationError);
  EXPECT_THROW((void)parse_numeric_csv("a,b\n1\n"), ValidationError);
  EXPECT_THROW((void)parse_numeric_csv("a\nx\n"), ValidationError);
  EXPECT_THROW((void)parse_numeric_csv("a\n1.5z\n"), ValidationError);
}

TEST(Csv, AtomicWriteReplacesWholeFile) {
  TempDir dir("atomic");
  const auto path = dir.path() / "out.csv";
  write_file_atomic(path, "first version, longer\n");
  write_file_atomic(path, "second\n");
  EXPECT_EQ(slurp(path), "second\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
  EXPECT_THROW(write_file_atomic(dir.path() / "no" / "such" / "dir.csv", "x"), std::exception);
}
