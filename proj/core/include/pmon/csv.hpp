#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmon/ipa.hpp"
#include "pmon/optimizer.hpp"
#include "pmon/riccati.hpp"
#include "pmon/validate.hpp"

namespace pmon {

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Comma-separated table with a header row and LF line endings.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& row(const std::vector<std::string>& cells);
  [[nodiscard]] std::size_t columns() const { return columns_; }
  [[nodiscard]] const std::string& str() const { return out_; }

 private:
  std::size_t columns_;
  std::string out_;
};

/// Shortest text that parses back to the same double ("inf"/"nan" for non-finite).
[[nodiscard]] std::string format_number(double v);

/// Columns q, omega_<r>_<c> in row-major order, trace.
[[nodiscard]] std::string cycle_csv(const CovarianceCycle& cycle);

/// Columns q, agent<j> on the grid nodes.
[[nodiscard]] std::string positions_csv(const Scenario& scenario, const CoverageGrid& grid);

/// Columns parameter, value.
[[nodiscard]] std::string gradient_csv(const Scenario& scenario, const GradientBundle& gradient);

/// Columns iter, J, grad_norm, T, then every parameter name.
[[nodiscard]] std::string history_csv(const DescentHistory& history);

/// One row per target plus a total row.
[[nodiscard]] std::string mc_report_csv(const McReport& report);

[[nodiscard]] std::string gradcheck_csv(const GradcheckReport& report);

/// Parsed numeric CSV with a header row.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Throws ValidationError on ragged rows or non-numeric cells.
[[nodiscard]] NumericTable parse_numeric_csv(std::string_view text);

}  // namespace pmon
