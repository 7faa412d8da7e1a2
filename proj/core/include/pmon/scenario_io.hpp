#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "pmon/model.hpp"
#include "pmon/optimizer.hpp"
#include "pmon/riccati.hpp"
#include "pmon/validate.hpp"

namespace pmon {

/// A scenario plus the optional run settings stored alongside it.
///
/// On disk this is a JSON document:
///   {"T": 6,
///    "targets": [{"x": -1, "A": {"rows": 2, "cols": 2, "data": [...]}, "Q": ..., "H": ..., "R": ...}],
///    "agents": [{"s0": 0, "tau": [...], "omega": [...], "r": 0.9}],
///    "descent": {...}, "monte_carlo": {...}, "numerics": {...}}
/// Matrices are row-major. Unknown keys are rejected.
struct ScenarioFile {
  Scenario scenario;
  std::optional<DescentConfig> descent;
  std::optional<McConfig> monte_carlo;
  std::optional<NumericsConfig> numerics;
};

/// Throws ValidationError with the offending key on malformed input. Model
/// invariants are not checked here; see validate_scenario.
[[nodiscard]] ScenarioFile parse_scenario(std::string_view text);
[[nodiscard]] ScenarioFile load_scenario(const std::filesystem::path& path);

/// Doubles are written in shortest round-trip form, so parsing the output
/// reproduces every number exactly.
[[nodiscard]] std::string dump_scenario(const ScenarioFile& file);
void save_scenario(const std::filesystem::path& path, const ScenarioFile& file);

}  // namespace pmon
