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
#include <set>

#include "mtv/error.h"
#include "mtv/svm.h"

namespace mtv::svm {

std::size_t SvmModel::pair_index(std::size_t a, std::size_t b) const {
  // Machines are stored (0,1), (0,2), ..., (0,k-1), (1,2), ...
  const std::size_t k = classes.size();
  if (a >= b || b >= k) throw ArgumentError("pair_index: need a < b < k");
  return a * (2 * k - a - 1) / 2 + (b - a - 1);
}

SvmModel train_multiclass(const dataset::LabeledVectorSet& set,
                          const KernelSpec& kernel, const SvmTrainConfig& cfg) {
  kernel.validate();
  cfg.validate();
  const std::set<int> distinct(set.labels.begin(), set.labels.end());
  if (distinct.size() < 2) {
    throw ArgumentError("train_multiclass: need at least 2 classes, found " +
                        std::to_string(distinct.size()));
  }
  SvmModel model;
  model.classes.assign(distinct.begin(), distinct.end());
  model.kernel = kernel;
  model.config = cfg;
  model.dim = set.cols;

  std::string failures;
  const std::size_t k = model.classes.size();
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const int pos = model.classes[a];
      const int neg = model.classes[b];
      std::vector<double> features;
      std::vector<double> targets;
      for (std::size_t i = 0; i < set.size(); ++i) {
        const int label = set.labels[i];
        if (label != pos && label != neg) continue;
        const auto r = set.row(i);
        features.insert(features.end(), r.begin(), r.end());
        targets.push_back(label == pos ? 1.0 : -1.0);
      }
      try {
        model.machines.push_back(train_binary(features, set.cols, targets, kernel, cfg));
      } catch (const TrainingError& e) {
        failures += "\n  pair (" + std::to_string(pos) + ", " + std::to_string(neg) +
                    "): " + e.what();
        model.machines.emplace_back();
      }
    }
  }
  if (!failures.empty()) {
    throw TrainingError("train_multiclass: some pairs failed" + failures);
  }
  return model;
}

DecisionReport predict(const SvmModel& model, std::span<const double> x) {
  const std::size_t k = model.classes.size();
  DecisionReport report;
  report.pairwise.reserve(model.machines.size());
  std::vector<int> votes(k, 0);
  std::size_t m = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b, ++m) {
      const double d = decision_value(model.machines[m], x);
      report.pairwise.push_back(d);
      ++votes[d >= 0.0 ? a : b];
    }
  }
  const auto best = static_cast<std::size_t>(
      std::max_element(votes.begin(), votes.end()) - votes.begin());
  report.predicted = model.classes[best];

  m = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b, ++m) {
      if (a == best) report.score += report.pairwise[m];
      else if (b == best) report.score -= report.pairwise[m];
    }
  }
  return report;
}

std::vector<DecisionReport> predict_all(const SvmModel& model,
                                        const dataset::LabeledVectorSet& set) {
  std::vector<DecisionReport> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out.push_back(predict(model, set.row(i)));
  return out;
}

}  // namespace mtv::svm
