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
#include <limits>

#include "mtv/metamorphic.h"

namespace mtv::metamorphic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Comparison {
  double deviation = 0.0;
  std::size_t class_flips = 0;
  std::string note;
};

// Component-wise comparison of the full decision reports.
Comparison compare_reports(const svm::SvmModel& a, const std::vector<svm::DecisionReport>& ra,
                           const svm::SvmModel& b, const std::vector<svm::DecisionReport>& rb) {
  Comparison c;
  if (a.classes != b.classes) {
    c.deviation = kInf;
    c.note = "class sets differ: " + std::to_string(a.classes.size()) + " vs " +
             std::to_string(b.classes.size()) + " classes";
    return c;
  }
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].predicted != rb[i].predicted) ++c.class_flips;
    for (std::size_t p = 0; p < ra[i].pairwise.size(); ++p) {
      const double d = std::abs(ra[i].pairwise[p] - rb[i].pairwise[p]);
      c.deviation = std::max(c.deviation, std::isnan(d) ? kInf : d);
    }
  }
  return c;
}

// (D(bx) - D(ax)) (a - 1) = (D(ax) - D(x)) (b - a) for a linear machine.
Comparison check_scaling(const svm::SvmModel& model, const dataset::LabeledVectorSet& test,
                         double a, double b) {
  Comparison c;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto x = test.row(i);
    const auto ax = scale_instance(x, a);
    const auto bx = scale_instance(x, b);
    for (const auto& m : model.machines) {
      const double d1 = svm::decision_value(m, x);
      const double da = svm::decision_value(m, ax);
      const double db = svm::decision_value(m, bx);
      const double d = std::abs((db - da) * (a - 1.0) - (da - d1) * (b - a));
      c.deviation = std::max(c.deviation, std::isnan(d) ? kInf : d);
    }
  }
  return c;
}

}  // namespace

TransformSpec svm_variant(const MrId& mr, const dataset::VectorSplit& rows,
                          const SuiteConfig& suite) {
  TransformSpec spec;
  switch (mr.index) {
    case 1:
      spec.kind = TransformSpec::Kind::kFeaturePermutation;
      spec.permutation = cycle_permutation(rows.train.cols);
      break;
    case 2:
      spec.kind = TransformSpec::Kind::kInstanceShuffle;
      spec.permutation = derangement(rows.train.size(), suite.shuffle_seed);
      break;
    case 3:
      spec.kind = TransformSpec::Kind::kFeatureShift;
      spec.k = suite.shift_k;
      break;
    case 4:
      spec.kind = TransformSpec::Kind::kInstanceScale;
      spec.k = suite.scale_a;
      break;
    default:
      throw ArgumentError("unknown SVM relation " + mr.to_string());
  }
  return spec;
}

MrVerdict run_svm_mr(const MrId& mr, const dataset::VectorSplit& rows,
                     const faults::SvmSubject& subject, const SuiteConfig& suite) {
  if (mr.family != Family::kSvm) throw ArgumentError(mr.to_string() + " is not an SVM relation");
  if (!is_applicable(mr, subject.kernel.kind)) {
    throw ArgumentError("SVM " + mr.to_string() + " does not apply to the " +
                        svm::to_string(subject.kernel.kind) + " kernel");
  }
  MrVerdict verdict;
  verdict.mr = mr;
  verdict.threshold = suite.exact_threshold;
  const TransformSpec spec = svm_variant(mr, rows, suite);

  Comparison cmp;
  try {
    const svm::SvmModel base = faults::train_svm_subject(subject, rows.train);
    if (mr.index == 4) {
      cmp = check_scaling(base, rows.test, suite.scale_a, suite.scale_b);
    } else {
      const auto base_reports = svm::predict_all(base, rows.test);
      const dataset::LabeledVectorSet train = apply(spec, rows.train);
      const dataset::LabeledVectorSet test = mr.index == 2 ? rows.test : apply(spec, rows.test);
      const svm::SvmModel follow = faults::train_svm_subject(subject, train);
      cmp = compare_reports(base, base_reports, follow, svm::predict_all(follow, test));
    }
  } catch (const Error& e) {
    verdict.status = Status::kInconclusive;
    verdict.note = std::string("subject failed: ") + e.what();
    return verdict;
  }

  verdict.evidence = cmp.deviation;
  verdict.class_flips = cmp.class_flips;
  verdict.note = cmp.note;
  verdict.variants.push_back({spec.label(), cmp.deviation});
  if (cmp.deviation > suite.exact_threshold || cmp.class_flips > 0) {
    verdict.status = Status::kKilled;
    verdict.triggering.push_back(spec.label());
  }
  return verdict;
}

}  // namespace mtv::metamorphic
