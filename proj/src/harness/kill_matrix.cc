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

#include <algorithm>
#include <cmath>
#include <map>

#include "mtv/harness.h"

namespace mtv::harness {

Cell aggregate_cell(const MrId& mr, std::span<const std::uint64_t> seeds,
                    std::vector<MrVerdict> per_seed) {
  if (per_seed.empty() || per_seed.size() != seeds.size()) {
    throw ArgumentError("one verdict per seed is required");
  }
  Cell cell;
  cell.seeds.assign(seeds.begin(), seeds.end());
  MrVerdict& v = cell.verdict;
  v.mr = mr;
  v.evidence_kind = per_seed.front().evidence_kind;
  v.threshold = per_seed.front().threshold;

  bool killed = false, inconclusive = false;
  std::size_t strongest = 0;
  for (std::size_t i = 0; i < per_seed.size(); ++i) {
    const MrVerdict& s = per_seed[i];
    killed |= s.status == Status::kKilled;
    inconclusive |= s.status == Status::kInconclusive;
    if (std::isnan(s.evidence) || s.evidence > per_seed[strongest].evidence) strongest = i;
    v.class_flips += s.class_flips;
    if (s.status == Status::kKilled) {
      for (const auto& id : s.triggering) {
        if (std::find(v.triggering.begin(), v.triggering.end(), id) == v.triggering.end()) {
          v.triggering.push_back(id);
        }
      }
    }
    if (!s.note.empty()) {
      if (!v.note.empty()) v.note += "; ";
      v.note += per_seed.size() == 1 ? s.note : "seed " + std::to_string(seeds[i]) + ": " + s.note;
    }
  }
  v.status = killed ? Status::kKilled : inconclusive ? Status::kInconclusive : Status::kPass;
  v.evidence = per_seed[strongest].evidence;
  v.variants = per_seed[strongest].variants;
  cell.per_seed = std::move(per_seed);
  return cell;
}

const Cell& KillMatrix::at(const std::string& row, const MrId& mr) const {
  const auto r = std::find(rows.begin(), rows.end(), row);
  const auto c = std::find(columns.begin(), columns.end(), mr);
  if (r == rows.end() || c == columns.end()) {
    throw ArgumentError("no cell (" + row + ", " + mr.to_string() + ")");
  }
  return cells.at(static_cast<std::size_t>(r - rows.begin()))
      .at(static_cast<std::size_t>(c - columns.begin()));
}

bool KillMatrix::baseline_clean() const {
  if (rows.empty() || rows.front() != kBaselineRow || cells.empty()) return false;
  return std::none_of(cells.front().begin(), cells.front().end(),
                      [](const Cell& c) { return c.verdict.status == Status::kKilled; });
}

std::string table_name(const KillMatrix& matrix) {
  if (matrix.family == Family::kCnn) return "cnn";
  return "svm-" + svm::to_string(matrix.kernel.value_or(svm::KernelKind::kLinear));
}

double Summary::kill_rate() const {
  return mutants == 0 ? 0.0 : static_cast<double>(killed) / static_cast<double>(mutants);
}

std::string Summary::headline() const {
  const long percent = std::lround(100.0 * kill_rate());
  return std::to_string(killed) + "/" + std::to_string(mutants) + " (" +
         std::to_string(percent) + "%)";
}

Summary summarize(std::span<const KillMatrix> matrices) {
  Summary s;
  std::map<std::string, std::size_t> column_index;
  for (const auto& m : matrices) {
    const std::string table = table_name(m);
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
      const std::string name = table + " " + m.columns[c].to_string();
      if (column_index.emplace(name, s.per_mr.size()).second) s.per_mr.push_back({name});
    }
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      if (m.rows[r] == kBaselineRow) continue;
      bool killed = false, inconclusive = false;
      for (std::size_t c = 0; c < m.columns.size(); ++c) {
        MrSummary& col = s.per_mr[column_index.at(table + " " + m.columns[c].to_string())];
        const Status st = m.cells[r][c].verdict.status;
        ++col.total;
        col.killed += st == Status::kKilled;
        col.inconclusive += st == Status::kInconclusive;
        killed |= st == Status::kKilled;
        inconclusive |= st == Status::kInconclusive;
      }
      ++s.mutants;
      s.killed += killed;
      s.inconclusive += !killed && inconclusive;
    }
  }
  return s;
}

Summary summarize(const KillMatrix& matrix) { return summarize(std::span(&matrix, 1)); }

nlohmann::ordered_json summary_to_json(const Summary& s) {
  nlohmann::ordered_json j;
  j["mutants"] = s.mutants;
  j["killed"] = s.killed;
  j["inconclusive"] = s.inconclusive;
  j["kill_rate"] = s.kill_rate();
  j["headline"] = s.headline();
  auto& cols = j["per_mr"] = nlohmann::ordered_json::array();
  for (const auto& c : s.per_mr) {
    cols.push_back({{"column", c.column},
                    {"killed", c.killed},
                    {"inconclusive", c.inconclusive},
                    {"total", c.total},
                    {"kill_rate", c.total == 0 ? 0.0
                                               : static_cast<double>(c.killed) /
                                                     static_cast<double>(c.total)}});
  }
  return j;
}

}  // namespace mtv::harness
