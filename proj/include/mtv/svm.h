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

// Reference kernel SVM.
//
// Binary machines solve the dual problem
//
//   minimize    1/2 a'Qa - e'a
//   subject to  y'a = 0,  0 <= a_i <= C,     Q_ij = y_i y_j K(x_i, x_j)
//
// with two-variable (SMO) updates on the maximal violating pair, and decide
// with D(x) = sum_i a_i y_i K(x, x_i) + b. Multiclass models train one machine
// per unordered class pair and predict by majority vote.
//
// All arithmetic is in double precision; training is deterministic (no
// randomness, lowest index wins every selection tie).

#ifndef MTV_SVM_H_
#define MTV_SVM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtv/dataset.h"

namespace mtv::svm {

enum class KernelKind { kLinear, kRbf };

struct KernelSpec {
  KernelKind kind = KernelKind::kLinear;
  double gamma = 0.0;  // rbf only; must be > 0

  static KernelSpec linear() { return {KernelKind::kLinear, 0.0}; }
  static KernelSpec rbf(double gamma) { return {KernelKind::kRbf, gamma}; }
  void validate() const;
  bool operator==(const KernelSpec&) const = default;
};

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

// linear: a'b; rbf: exp(-gamma |a - b|^2). Throws ArgumentError on a
// dimension mismatch.
double kernel_eval(const KernelSpec& spec, std::span<const double> a,
                   std::span<const double> b);

// 1 / (n * Var(features)) over every entry of the matrix, the usual "scale"
// default. Falls back to 1 for constant data.
double default_gamma(const dataset::LabeledVectorSet& set);

struct SvmTrainConfig {
  double C = 1.0;
  double kkt_tolerance = 1e-8;
  std::int64_t max_iterations = 10'000'000;

  void validate() const;
  bool operator==(const SvmTrainConfig&) const = default;
};

// One trained two-class machine. `points` keeps every training instance
// (row-major, dim columns) with its alpha, so zero alphas are visible; after
// a JSON round trip only the support vectors remain.
struct BinarySvm {
  KernelSpec kernel;
  std::size_t dim = 0;
  double C = 1.0;
  std::vector<double> points;
  std::vector<double> targets;  // +1 / -1
  std::vector<double> alphas;
  double bias = 0.0;
  double final_violation = 0.0;
  std::int64_t iterations = 0;

  std::size_t size() const { return alphas.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * dim, dim};
  }
  std::size_t support_vector_count() const;
};

// Trains on row-major `features` (targets.size() rows of `dim` values) with
// targets in {-1, +1}. Throws TrainingError if the maximal KKT violation is
// still above cfg.kkt_tolerance after cfg.max_iterations updates.
BinarySvm train_binary(std::span<const double> features, std::size_t dim,
                       std::span<const double> targets, const KernelSpec& kernel,
                       const SvmTrainConfig& cfg);

// Two-class view of a labeled set: `positive` maps to +1, the other label to
// -1. The set must contain exactly those two labels.
BinarySvm train_binary(const dataset::LabeledVectorSet& set, int positive,
                       const KernelSpec& kernel, const SvmTrainConfig& cfg);

double decision_value(const BinarySvm& machine, std::span<const double> x);

// Largest KKT violation max_{I_up}(-y G) - min_{I_low}(-y G) at the stored
// alphas; zero or negative at an exact optimum.
double kkt_violation(const BinarySvm& machine);

struct SvmModel {
  std::vector<int> classes;        // ascending
  std::vector<BinarySvm> machines;  // (classes[a], classes[b]) for a < b,
                                    // lexicographic; classes[a] is +1
  KernelSpec kernel;
  SvmTrainConfig config;
  std::size_t dim = 0;

  std::size_t pair_index(std::size_t a, std::size_t b) const;
};

SvmModel train_multiclass(const dataset::LabeledVectorSet& set,
                          const KernelSpec& kernel, const SvmTrainConfig& cfg);

struct DecisionReport {
  int predicted = 0;
  // Sum of the winner's pairwise decision values, each signed so that a
  // vote for the winner counts positive.
  double score = 0.0;
  std::vector<double> pairwise;  // one D per machine, model order
};

// One-vs-one vote over sign(D) (D >= 0 votes for the first class of the
// pair); ties go to the lowest class.
DecisionReport predict(const SvmModel& model, std::span<const double> x);
std::vector<DecisionReport> predict_all(const SvmModel& model,
                                        const dataset::LabeledVectorSet& set);

// Versioned JSON document ("mtverify.svm/1").
std::string model_to_json(const SvmModel& model);
SvmModel model_from_json(const std::string& text);

}  // namespace mtv::svm

#endif  // MTV_SVM_H_
