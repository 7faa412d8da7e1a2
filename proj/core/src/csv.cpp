#include "pmon/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "pmon/errors.hpp"
#include "pmon/trajectory.hpp"

namespace pmon {

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::path tmp = dir / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  if (header.empty()) throw ValidationError("CSV needs at least one column");
  row(header);
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ValidationError("CSV row has the wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ += ',';
    out_ += cells[i];
  }
  out_ += '\n';
  return *this;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string cycle_csv(const CovarianceCycle& cycle) {
  const int L = cycle.omega_bar.empty() ? 0 : static_cast<int>(cycle.omega_bar.front().rows());
  std::vector<std::string> header{"q"};
  for (int r = 0; r < L; ++r) {
    for (int c = 0; c < L; ++c) header.push_back("omega_" + std::to_string(r + 1) + "_" + std::to_string(c + 1));
  }
  header.push_back("trace");
  CsvWriter csv(std::move(header));
  const auto& nodes = cycle.grid->nodes();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Matrix& m = cycle.omega_bar[k];
    std::vector<std::string> cells{format_number(nodes[k])};
    for (int r = 0; r < L; ++r) {
      for (int c = 0; c < L; ++c) cells.push_back(format_number(m(r, c)));
    }
    cells.push_back(format_number(m.trace()));
    csv.row(cells);
  }
  return csv.str();
}

std::string positions_csv(const Scenario& scenario, const CoverageGrid& grid) {
  const auto schedules = compile_schedules(scenario, ScheduleOptions{false});
  std::vector<std::string> header{"q"};
  for (std::size_t j = 0; j < schedules.size(); ++j) header.push_back("agent" + std::to_string(j + 1));
  CsvWriter csv(std::move(header));
  for (double q : grid.nodes()) {
    std::vector<std::string> cells{format_number(q)};
    for (const auto& s : schedules) cells.push_back(format_number(position(s, q)));
    csv.row(cells);
  }
  return csv.str();
}

std::string gradient_csv(const Scenario& scenario, const GradientBundle& gradient) {
  CsvWriter csv({"parameter", "value"});
  for (const auto& id : parameter_ids(scenario)) csv.row({id.name(), format_number(gradient.at(id))});
  return csv.str();
}

namespace {

std::vector<std::string> parameter_names(const std::vector<AgentParams>& agents) {
  Scenario shape;
  shape.agents = agents;
  std::vector<std::string> names;
  for (const auto& id : parameter_ids(shape)) {
    if (id.kind != ParameterId::Kind::kPeriod) names.push_back(id.name());
  }
  return names;
}

}  // namespace

std::string history_csv(const DescentHistory& history) {
  std::vector<std::string> header{"iter", "J", "grad_norm", "T"};
  if (!history.records.empty()) {
    const auto names = parameter_names(history.records.front().agents);
    header.insert(header.end(), names.begin(), names.end());
  }
  CsvWriter csv(std::move(header));
  for (const auto& rec : history.records) {
    std::vector<std::string> cells{std::to_string(rec.iter), format_number(rec.J), format_number(rec.grad_norm),
                                   format_number(rec.T)};
    for (const auto& a : rec.agents) {
      cells.push_back(format_number(a.s0));
      for (double v : a.tau) cells.push_back(format_number(v));
      for (double v : a.omega) cells.push_back(format_number(v));
    }
    csv.row(cells);
  }
  return csv.str();
}

std::string mc_report_csv(const McReport& report) {
  CsvWriter csv({"target", "empirical_mse", "predicted", "ratio", "n_trials", "dt", "n_periods", "burn_in_periods",
                 "seed", "rng"});
  auto tail = [&] {
    return std::vector<std::string>{std::to_string(report.n_trials), format_number(report.dt),
                                    std::to_string(report.n_periods), std::to_string(report.burn_in_periods),
                                    std::to_string(report.rng_seed), report.rng_algorithm};
  };
  for (const auto& t : report.targets) {
    std::vector<std::string> cells{std::to_string(t.target_index + 1), format_number(t.empirical_mse),
                                   format_number(t.predicted), format_number(t.ratio())};
    const auto rest = tail();
    cells.insert(cells.end(), rest.begin(), rest.end());
    csv.row(cells);
  }
  std::vector<std::string> cells{"total", format_number(report.empirical_total), format_number(report.predicted_total),
                                 format_number(report.empirical_total / report.predicted_total)};
  const auto rest = tail();
  cells.insert(cells.end(), rest.begin(), rest.end());
  csv.row(cells);
  return csv.str();
}

std::string gradcheck_csv(const GradcheckReport& report) {
  CsvWriter csv({"parameter", "ipa", "fd", "rel_error", "status", "step", "one_sided", "step_shrunk"});
  for (const auto& r : report.rows) {
    csv.row({r.id.name(), format_number(r.ipa), format_number(r.fd), format_number(r.rel_error), to_string(r.status),
             format_number(r.fd_info.step), r.fd_info.one_sided ? "1" : "0", r.fd_info.step_shrunk ? "1" : "0"});
  }
  return csv.str();
}

NumericTable parse_numeric_csv(std::string_view text) {
  NumericTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ValidationError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(table.header.size()));
    }
    std::vector<double> values;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw ValidationError("CSV line " + std::to_string(line_no) + ": '" + c + "' is not a number");
      }
      values.push_back(v);
    }
    table.rows.push_back(std::move(values));
  }
  if (table.header.empty()) throw ValidationError("CSV is empty");
  return table;
}

}  // namespace pmon
