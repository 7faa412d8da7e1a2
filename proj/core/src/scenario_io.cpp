#include "pmon/scenario_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pmon/csv.hpp"
#include "pmon/errors.hpp"

namespace pmon {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!ok.count(item.key())) throw ValidationError(where + ": unknown key '" + item.key() + "'");
  }
}

const json& required(const json& obj, const std::string& where, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + ": missing key '" + key + "'");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ValidationError(where + ": expected a number");
  return v.get<double>();
}

template <class Int>
Int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ValidationError(where + ": expected an integer");
  if constexpr (std::is_unsigned_v<Int>) {
    if (v.is_number_unsigned()) return v.get<Int>();
    if (v.get<long long>() < 0) throw ValidationError(where + ": expected a nonnegative integer");
  }
  return v.get<Int>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ValidationError(where + ": expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

Matrix matrix(const json& v, const std::string& where) {
  check_keys(v, where, {"rows", "cols", "data"});
  const int rows = integer<int>(required(v, where, "rows"), where + ".rows");
  const int cols = integer<int>(required(v, where, "cols"), where + ".cols");
  if (rows < 1 || cols < 1 || rows > kMaxDim || cols > kMaxDim) {
    throw ValidationError(where + ": dimensions must be between 1 and " + std::to_string(kMaxDim));
  }
  const auto data = numbers(required(v, where, "data"), where + ".data");
  if (data.size() != static_cast<std::size_t>(rows * cols)) {
    throw ValidationError(where + ": data has " + std::to_string(data.size()) + " entries, expected " +
                          std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json to_json(const Matrix& m) {
  json data = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

}  // namespace

ScenarioFile parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario file is not valid JSON: ") + e.what());
  }
  check_keys(doc, "scenario", {"T", "targets", "agents", "descent", "monte_carlo", "numerics"});
  ScenarioFile file;
  file.scenario.T = number(required(doc, "scenario", "T"), "T");

  const auto& targets = required(doc, "scenario", "targets");
  if (!targets.is_array()) throw ValidationError("targets: expected a list");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string where = "targets[" + std::to_string(i) + "]";
    const auto& t = targets[i];
    check_keys(t, where, {"x", "A", "Q", "H", "R"});
    file.scenario.targets.emplace_back(matrix(required(t, where, "A"), where + ".A"),
                                       matrix(required(t, where, "Q"), where + ".Q"),
                                       matrix(required(t, where, "H"), where + ".H"),
                                       matrix(required(t, where, "R"), where + ".R"),
                                       number(required(t, where, "x"), where + ".x"));
  }

  const auto& agents = required(doc, "scenario", "agents");
  if (!agents.is_array()) throw ValidationError("agents: expected a list");
  for (std::size_t j = 0; j < agents.size(); ++j) {
    const std::string where = "agents[" + std::to_string(j) + "]";
    const auto& a = agents[j];
    check_keys(a, where, {"s0", "tau", "omega", "r"});
    AgentParams p;
    p.s0 = number(required(a, where, "s0"), where + ".s0");
    p.tau = numbers(required(a, where, "tau"), where + ".tau");
    p.omega = numbers(required(a, where, "omega"), where + ".omega");
    p.r = number(required(a, where, "r"), where + ".r");
    file.scenario.agents.push_back(std::move(p));
  }

  if (const auto it = doc.find("descent"); it != doc.end()) {
    check_keys(*it, "descent", {"kappa", "epsilon", "max_iter", "T_min"});
    DescentConfig c;
    if (it->contains("kappa")) c.kappa = number((*it)["kappa"], "descent.kappa");
    if (it->contains("epsilon")) c.epsilon = number((*it)["epsilon"], "descent.epsilon");
    if (it->contains("max_iter")) c.max_iter = integer<int>((*it)["max_iter"], "descent.max_iter");
    if (it->contains("T_min")) c.T_min = number((*it)["T_min"], "descent.T_min");
    file.descent = c;
  }
  if (const auto it = doc.find("monte_carlo"); it != doc.end()) {
    check_keys(*it, "monte_carlo", {"n_trials", "dt", "n_periods", "burn_in_periods", "seed", "noise_substeps"});
    McConfig c;
    if (it->contains("n_trials")) c.n_trials = integer<std::size_t>((*it)["n_trials"], "monte_carlo.n_trials");
    if (it->contains("dt")) c.dt = number((*it)["dt"], "monte_carlo.dt");
    if (it->contains("n_periods")) c.n_periods = integer<int>((*it)["n_periods"], "monte_carlo.n_periods");
    if (it->contains("burn_in_periods")) {
      c.burn_in_periods = integer<int>((*it)["burn_in_periods"], "monte_carlo.burn_in_periods");
    }
    if (it->contains("seed")) c.rng_seed = integer<std::uint64_t>((*it)["seed"], "monte_carlo.seed");
    if (it->contains("noise_substeps")) {
      c.noise_substeps = integer<int>((*it)["noise_substeps"], "monte_carlo.noise_substeps");
    }
    file.monte_carlo = c;
  }
  if (const auto it = doc.find("numerics"); it != doc.end()) {
    check_keys(*it, "numerics", {"base_steps", "cycle_tol", "max_cycles"});
    NumericsConfig c;
    if (it->contains("base_steps")) c.base_steps = integer<int>((*it)["base_steps"], "numerics.base_steps");
    if (it->contains("cycle_tol")) c.cycle_tol = number((*it)["cycle_tol"], "numerics.cycle_tol");
    if (it->contains("max_cycles")) c.max_cycles = integer<int>((*it)["max_cycles"], "numerics.max_cycles");
    if (c.base_steps < 1 || !(c.cycle_tol > 0.0) || c.max_cycles < 1) {
      throw ValidationError("numerics: base_steps, cycle_tol and max_cycles must be positive");
    }
    file.numerics = c;
  }
  return file;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string dump_scenario(const ScenarioFile& file) {
  json doc;
  doc["T"] = file.scenario.T;
  doc["targets"] = json::array();
  for (const auto& t : file.scenario.targets) {
    doc["targets"].push_back({{"x", t.x()}, {"A", to_json(t.A())}, {"Q", to_json(t.Q())}, {"H", to_json(t.H())},
                              {"R", to_json(t.R())}});
  }
  doc["agents"] = json::array();
  for (const auto& a : file.scenario.agents) {
    doc["agents"].push_back({{"s0", a.s0}, {"tau", a.tau}, {"omega", a.omega}, {"r", a.r}});
  }
  if (file.descent) {
    const auto& c = *file.descent;
    doc["descent"] = {{"kappa", c.kappa}, {"epsilon", c.epsilon}, {"max_iter", c.max_iter}, {"T_min", c.T_min}};
  }
  if (file.monte_carlo) {
    const auto& c = *file.monte_carlo;
    doc["monte_carlo"] = {{"n_trials", c.n_trials}, {"dt", c.dt}, {"n_periods", c.n_periods},
                          {"burn_in_periods", c.burn_in_periods}, {"seed", c.rng_seed},
                          {"noise_substeps", c.noise_substeps}};
  }
  if (file.numerics) {
    const auto& c = *file.numerics;
    doc["numerics"] = {{"base_steps", c.base_steps}, {"cycle_tol", c.cycle_tol}, {"max_cycles", c.max_cycles}};
  }
  return doc.dump(2) + "\n";
}

void save_scenario(const std::filesystem::path& path, const ScenarioFile& file) {
  write_file_atomic(path, dump_scenario(file));
}

}  // namespace pmon
