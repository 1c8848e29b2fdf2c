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

#include "mtv/error.h"
#include "mtv/svm.h"

namespace mtv::svm {

void KernelSpec::validate() const {
  if (kind == KernelKind::kRbf && !(gamma > 0.0 && std::isfinite(gamma))) {
    throw ArgumentError("rbf kernel needs gamma > 0");
  }
}

std::string to_string(KernelKind kind) {
  return kind == KernelKind::kLinear ? "linear" : "rbf";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "linear") return KernelKind::kLinear;
  if (name == "rbf") return KernelKind::kRbf;
  throw ArgumentError("unknown kernel '" + name + "'");
}

double kernel_eval(const KernelSpec& spec, std::span<const double> a,
                   std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ArgumentError("kernel_eval: dimension mismatch (" +
                        std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  }
  if (spec.kind == KernelKind::kLinear) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::exp(-spec.gamma * sq);
}

double default_gamma(const dataset::LabeledVectorSet& set) {
  const std::size_t n = set.features.size();
  if (n == 0 || set.cols == 0) return 1.0;
  double mean = 0.0;
  for (double v : set.features) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : set.features) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) return 1.0;
  return 1.0 / (static_cast<double>(set.cols) * var);
}

void SvmTrainConfig::validate() const {
  if (!(C > 0.0)) throw ArgumentError("C must be positive");
  if (!(kkt_tolerance > 0.0)) throw ArgumentError("kkt_tolerance must be positive");
  if (max_iterations <= 0) throw ArgumentError("max_iterations must be positive");
}

}  // namespace mtv::svm
