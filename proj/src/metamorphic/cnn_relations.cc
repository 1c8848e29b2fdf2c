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
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "mtv/metamorphic.h"

namespace mtv::metamorphic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Runs task(i) for i in [0, n) on up to `workers` threads. Results are
// written by index, so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool is_constant(std::span<const float> image) {
  const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
  return *lo == *hi;
}

}  // namespace

std::vector<TransformSpec> cnn_training_variants(const MrId& mr) {
  std::vector<TransformSpec> out;
  if (mr.family != Family::kCnn || (mr.index != 1 && mr.index != 2)) {
    throw ArgumentError(mr.to_string() + " is not a CNN training relation");
  }
  if (mr.index == 1) {
    for (const auto& order : all_channel_orders()) {
      TransformSpec s;
      s.kind = TransformSpec::Kind::kChannelOrder;
      s.order = order;
      out.push_back(s);
    }
  } else {
    for (Dihedral g : kAllDihedral) {
      TransformSpec s;
      s.kind = TransformSpec::Kind::kDihedral;
      s.dihedral = g;
      out.push_back(s);
    }
  }
  return out;
}

VariantRun run_variant(const faults::CnnSubject& subject, const dataset::ImageSplit& split,
                       std::uint64_t seed) {
  VariantRun out;
  try {
    cnn::TrainResult result = faults::train_cnn_subject(subject, split, seed);
    out.trace = std::move(result.run.trace);
    out.model = std::move(result.model);
  } catch (const cnn::DivergenceError& e) {
    out.trace = e.partial().trace;
    out.diverged = true;
  } catch (const Error& e) {
    out.crash = e.what();
  }
  return out;
}

CnnTrainer direct_trainer(const faults::CnnSubject& subject, std::uint64_t seed) {
  return [subject, seed](const TransformSpec&, const dataset::ImageSplit& split) {
    return run_variant(subject, split, seed);
  };
}

TrainingMrResult run_cnn_training_mr(const MrId& mr, const dataset::ImageSplit& split,
                                     const CnnTrainer& trainer, const SuiteConfig& suite) {
  const std::vector<TransformSpec> variants = cnn_training_variants(mr);
  std::vector<VariantRun> runs(variants.size());
  parallel_for(variants.size(), suite.workers, [&](std::size_t i) {
    const dataset::ImageSplit transformed{apply(variants[i], split.train),
                                          apply(variants[i], split.test)};
    runs[i] = trainer(variants[i], transformed);
  });

  TrainingMrResult result;
  MrVerdict& verdict = result.verdict;
  verdict.mr = mr;
  verdict.evidence_kind = "sigma_max";
  verdict.threshold = mr.index == 1 ? suite.sigma_threshold_mr1 : suite.sigma_threshold_mr2;

  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (runs[i].crash) {
      verdict.status = Status::kInconclusive;
      verdict.note = "variant " + variants[i].label() + " crashed: " + *runs[i].crash;
      return result;
    }
    result.traces.push_back({variants[i].label(), runs[i].trace, runs[i].diverged});
  }

  result.sigma = sigma_max(result.traces, verdict.threshold);
  verdict.evidence = result.sigma.sigma_max;
  verdict.status = sigma_status(verdict.evidence, verdict.threshold);
  for (const auto& t : result.traces) {
    const double final_loss = t.diverged || t.trace.empty() ? kInf : t.trace.back().test_loss;
    verdict.variants.push_back({t.id, final_loss});
  }
  if (!result.sigma.diverged.empty()) {
    verdict.note = std::to_string(result.sigma.diverged.size()) + " variant(s) diverged";
  }

  if (verdict.status == Status::kKilled) {
    if (!result.sigma.diverged.empty()) {
      verdict.triggering = result.sigma.diverged;
    } else {
      // Variants at least one sigma from the mean at the worst step.
      const auto at = static_cast<std::size_t>(
          std::find(result.sigma.steps.begin(), result.sigma.steps.end(),
                    result.sigma.argmax_step) -
          result.sigma.steps.begin());
      double mean = 0.0;
      for (const auto& t : result.traces) mean += t.trace[at].test_loss;
      mean /= static_cast<double>(result.traces.size());
      double worst = 0.0;
      for (const auto& t : result.traces) {
        worst = std::max(worst, std::abs(t.trace[at].test_loss - mean));
      }
      const double cut = std::min(verdict.evidence, worst);
      for (const auto& t : result.traces) {
        if (std::abs(t.trace[at].test_loss - mean) >= cut) verdict.triggering.push_back(t.id);
      }
    }
  }
  return result;
}

MrVerdict run_cnn_test_only_mr(const MrId& mr, const cnn::CnnModel<float>& model,
                               const dataset::LabeledImageSet& test, const SuiteConfig& suite) {
  if (mr.family != Family::kCnn || (mr.index != 3 && mr.index != 4)) {
    throw ArgumentError(mr.to_string() + " is not a CNN test-only relation");
  }
  MrVerdict verdict;
  verdict.mr = mr;
  verdict.threshold = suite.test_only_threshold;

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!is_constant(test.image(i))) keep.push_back(i);
  }
  if (keep.empty()) {
    verdict.status = Status::kInconclusive;
    verdict.note = "every test image is constant";
    return verdict;
  }
  const dataset::LabeledImageSet source = dataset::select(test, keep);
  if (keep.size() < test.size()) {
    verdict.note = std::to_string(test.size() - keep.size()) + " constant image(s) skipped";
  }

  std::vector<TransformSpec> variants;
  if (mr.index == 3) {
    TransformSpec s;
    s.kind = TransformSpec::Kind::kNormalize;
    variants.push_back(s);
  } else {
    for (double k : suite.scale_ks) {
      if (!(k > 0.0)) throw ArgumentError("MR-4 scale factors must be positive");
      TransformSpec s;
      s.kind = TransformSpec::Kind::kInstanceScale;
      s.k = k;
      variants.push_back(s);
    }
  }

  try {
    const cnn::Evaluation base = cnn::evaluate(model, source);
    for (const auto& spec : variants) {
      const cnn::Evaluation follow = cnn::evaluate(model, apply(spec, source));
      double dev = 0.0;
      std::size_t flips = 0;
      for (std::size_t i = 0; i < base.instances.size(); ++i) {
        const double d = std::abs(base.instances[i].loss - follow.instances[i].loss);
        dev = std::max(dev, std::isnan(d) ? kInf : d);
        if (base.instances[i].predicted != follow.instances[i].predicted) ++flips;
      }
      verdict.variants.push_back({spec.label(), dev});
      verdict.evidence = std::max(verdict.evidence, dev);
      verdict.class_flips += flips;
      if (dev >= suite.test_only_threshold || flips > 0) verdict.triggering.push_back(spec.label());
    }
  } catch (const Error& e) {
    verdict.status = Status::kInconclusive;
    verdict.note = std::string("subject failed: ") + e.what();
    return verdict;
  }
  if (!verdict.triggering.empty()) verdict.status = Status::kKilled;
  return verdict;
}

}  // namespace mtv::metamorphic
