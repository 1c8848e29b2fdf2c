// Copyright 2026 The mtverify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mtv/harness.h"

namespace mtv::harness {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kMatrixFormat = "mtverify.killmatrix/1";

// Shortest round-trip text; non-finite values by name.
std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return json(v).dump();
}

std::string short_number(double v) {
  if (std::isinf(v) && v > 0) return "∞";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Columns occupied in a terminal: one per code point.
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string pad(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return s + std::string(width > w ? width - w : 0, ' ');
}

std::string cell_text(const Cell& cell) {
  const MrVerdict& v = cell.verdict;
  switch (v.status) {
    case Status::kKilled:
      return v.evidence_kind == "sigma_max" ? "✓ (" + short_number(v.evidence) + ")"
                                            : "✓";
    case Status::kInconclusive:
      return "?";
    case Status::kPass:
      break;
  }
  return "";
}

json cell_to_json(const Cell& c) {
  json j;
  j["verdict"] = metamorphic::verdict_to_json(c.verdict);
  j["seeds"] = c.seeds;
  auto& per = j["per_seed"] = json::array();
  for (const auto& v : c.per_seed) per.push_back(metamorphic::verdict_to_json(v));
  return j;
}

Cell cell_from_json(const json& j) {
  Cell c;
  c.verdict = metamorphic::verdict_from_json(j.at("verdict"));
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& v : j.at("per_seed")) c.per_seed.push_back(metamorphic::verdict_from_json(v));
  return c;
}

}  // namespace

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "text" || name == "text-table" || name == "txt") return ReportFormat::kText;
  throw ConfigError("unknown report format '" + name + "'");
}

json matrix_to_json(const KillMatrix& m) {
  json j;
  j["format"] = kMatrixFormat;
  j["family"] = faults::to_string(m.family);
  j["kernel"] = m.kernel ? json(svm::to_string(*m.kernel)) : json(nullptr);
  auto& cols = j["columns"] = json::array();
  for (const auto& mr : m.columns) cols.push_back(mr.to_string());
  auto& rows = j["rows"] = json::array();
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    json row;
    row["id"] = m.rows[r];
    auto& cells = row["cells"] = json::array();
    for (const auto& c : m.cells[r]) cells.push_back(cell_to_json(c));
    rows.push_back(std::move(row));
  }
  return j;
}

KillMatrix matrix_from_json(const json& j) {
  KillMatrix m;
  try {
    if (j.at("format").get<std::string>() != kMatrixFormat) {
      throw FormatError("unsupported kill matrix format '" + j.at("format").get<std::string>() +
                        "'");
    }
    m.family = faults::family_from_string(j.at("family").get<std::string>());
    if (!j.at("kernel").is_null()) {
      m.kernel = svm::kernel_kind_from_string(j.at("kernel").get<std::string>());
    }
    for (const auto& c : j.at("columns")) {
      m.columns.push_back(metamorphic::mr_from_string(m.family, c.get<std::string>()));
    }
    for (const auto& row : j.at("rows")) {
      m.rows.push_back(row.at("id").get<std::string>());
      std::vector<Cell> cells;
      for (const auto& c : row.at("cells")) cells.push_back(cell_from_json(c));
      if (cells.size() != m.columns.size()) {
        throw FormatError("row '" + m.rows.back() + "' has the wrong number of cells");
      }
      m.cells.push_back(std::move(cells));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed kill matrix: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  return m;
}

KillMatrix load_matrix(const std::string& path) {
  try {
    return matrix_from_json(json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string matrix_to_csv(const KillMatrix& m) {
  std::ostringstream out;
  out << "mutant";
  for (const auto& mr : m.columns) out << ',' << mr.to_string() << ',' << mr.to_string() << "_evidence";
  out << '\n';
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out << m.rows[r];
    for (const auto& c : m.cells[r]) {
      out << ',' << metamorphic::to_string(c.verdict.status) << ','
          << format_number(c.verdict.evidence);
    }
    out << '\n';
  }
  return out.str();
}

std::string matrix_to_text(const KillMatrix& m) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Mutant"};
  for (const auto& mr : m.columns) header.push_back(mr.to_string() + " (" + mr.title() + ")");
  grid.push_back(header);
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    std::vector<std::string> line{m.rows[r]};
    for (const auto& c : m.cells[r]) line.push_back(cell_text(c));
    grid.push_back(std::move(line));
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      widths[c] = std::max(widths[c], display_width(line[c]));
    }
  }
  std::string rule = "+";
  for (std::size_t w : widths) rule += std::string(w + 2, '-') + "+";

  std::ostringstream out;
  out << "Kill matrix (" << table_name(m) << ")\n" << rule << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << '|';
    for (std::size_t c = 0; c < grid[i].size(); ++c) out << ' ' << pad(grid[i][c], widths[c]) << " |";
    out << '\n';
    if (i == 0) out << rule << '\n';
  }
  out << rule << '\n';
  out << "Killed: " << summarize(m).headline() << '\n';
  return out.str();
}

std::string render_report(const KillMatrix& matrix, ReportFormat format) {
  switch (format) {
    case ReportFormat::kJson:
      return matrix_to_json(matrix).dump(2) + "\n";
    case ReportFormat::kCsv:
      return matrix_to_csv(matrix);
    case ReportFormat::kText:
      break;
  }
  return matrix_to_text(matrix);
}

void emit_report(const KillMatrix& matrix, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file((dir / "matrix.json").string(), render_report(matrix, ReportFormat::kJson));
  write_file((dir / "matrix.csv").string(), render_report(matrix, ReportFormat::kCsv));
  write_file((dir / "matrix.txt").string(), render_report(matrix, ReportFormat::kText));
  write_file((dir / "summary.json").string(), summary_to_json(summarize(matrix)).dump(2) + "\n");
}

std::vector<fs::path> emit_loss_curves(std::span<const metamorphic::VariantTrace> traces,
                                       const fs::path& dir, const std::string& subject,
                                       const MrId& mr, std::uint64_t seed) {
  if (traces.empty()) throw ArgumentError("no traces to write");
  const fs::path where = dir / subject / ("seed-" + std::to_string(seed)) / mr.to_string();
  std::error_code ec;
  fs::create_directories(where, ec);
  if (ec) throw IoError("cannot create " + where.string() + ": " + ec.message());
  std::vector<fs::path> written;
  for (const auto& t : traces) {
    std::ostringstream out;
    out << "step,test_loss,test_accuracy\n";
    for (const auto& p : t.trace) {
      out << p.step << ',' << format_number(p.test_loss) << ',' << format_number(p.test_accuracy)
          << '\n';
    }
    const fs::path file = where / (t.id + ".csv");
    write_file(file.string(), out.str());
    written.push_back(file);
  }
  return written;
}

}  // namespace mtv::harness
