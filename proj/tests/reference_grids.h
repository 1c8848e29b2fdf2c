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

// Reference verdict grids for the SVM and CNN mutant catalogs, as kill
// matrices. A sigma value of 0 marks a kill without a bracketed value.

#ifndef MTV_TESTS_REFERENCE_GRIDS_H_
#define MTV_TESTS_REFERENCE_GRIDS_H_

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mtv/harness.h"

namespace mtv::testing {

struct GridRow {
  std::string mutant;
  std::map<int, double> killed;  // MR index -> sigma_max (0 if none printed)
};

inline harness::KillMatrix grid_matrix(harness::Family family,
                                       std::optional<svm::KernelKind> kernel,
                                       std::vector<int> mr_indices,
                                       const std::vector<GridRow>& rows) {
  harness::KillMatrix m;
  m.family = family;
  m.kernel = kernel;
  for (int i : mr_indices) m.columns.push_back({family, i});
  m.rows.push_back(harness::kBaselineRow);
  m.cells.emplace_back();
  for (const auto& mr : m.columns) {
    metamorphic::MrVerdict v;
    v.mr = mr;
    m.cells.front().push_back(harness::aggregate_cell(mr, std::vector<std::uint64_t>{1}, {v}));
  }
  for (const auto& row : rows) {
    m.rows.push_back(row.mutant);
    std::vector<harness::Cell> cells;
    for (const auto& mr : m.columns) {
      metamorphic::MrVerdict v;
      v.mr = mr;
      const auto hit = row.killed.find(mr.index);
      const bool training = family == harness::Family::kCnn && mr.index <= 2;
      v.evidence_kind = training ? "sigma_max" : "max_deviation";
      if (hit != row.killed.end()) {
        v.status = metamorphic::Status::kKilled;
        v.evidence = hit->second;
      }
      cells.push_back(harness::aggregate_cell(mr, std::vector<std::uint64_t>{1}, {v}));
    }
    m.cells.push_back(std::move(cells));
  }
  return m;
}

inline std::vector<harness::KillMatrix> reference_grids() {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<GridRow> linear, rbf;
  for (const char* n : {"2", "5", "8", "11", "22", "31"}) {
    linear.push_back({std::string("l") + n, {{1, 0.0}}});
    rbf.push_back({std::string("r") + n, {{1, 0.0}, {3, 0.0}}});
  }
  const std::vector<GridRow> cnn{
      {"c9", {}},
      {"c29", {{2, 18.1}}},
      {"c30", {}},
      {"c31", {{2, 9.1}}},
      {"c32", {{2, 9.1}}},
      {"c43", {{1, 9.6}, {2, 11.5}}},
      {"c44", {{1, 27.4}, {2, 9.2}}},
      {"c45", {}},
      {"c49", {{1, 23.3}, {2, 23.8}, {4, 0.0}}},
      {"c50", {{3, 0.0}, {4, 0.0}}},
      {"c116", {}},
      {"c221", {{1, inf}}},
      {"r6", {}},
      {"r48", {}},
      {"r49", {}},
      {"r67", {}},
  };
  return {
      grid_matrix(harness::Family::kSvm, svm::KernelKind::kLinear, {1, 2, 4}, linear),
      grid_matrix(harness::Family::kSvm, svm::KernelKind::kRbf, {1, 2, 3}, rbf),
      grid_matrix(harness::Family::kCnn, std::nullopt, {1, 2, 3, 4}, cnn),
  };
}

}  // namespace mtv::testing

#endif  // MTV_TESTS_REFERENCE_GRIDS_H_
