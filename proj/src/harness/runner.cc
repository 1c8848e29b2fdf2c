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
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>

#include "mtv/cnn/checkpoint.h"
#include "mtv/harness.h"

namespace mtv::harness {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using metamorphic::TransformSpec;
using metamorphic::VariantRun;

// Bump when a change alters cached results.
constexpr int kCacheVersion = 1;

class Context {
 public:
  Context(const RunPlan& plan, const RunOptions& options)
      : plan_json_(plan_to_json(plan)),
        cache_(options.use_cache ? fs::path(plan.output_dir) / "cells" : fs::path()),
        options_(options) {
    suite_ = plan.suite;
    suite_.workers = std::max<std::size_t>(1, options.workers);
  }

  const metamorphic::SuiteConfig& suite() const { return suite_; }
  const CellCache& cache() const { return cache_; }

  void log(const std::string& line) const {
    if (!options_.log) return;
    std::lock_guard lock(log_mutex_);
    options_.log(line);
  }

  json svm_key(const std::string& row, const MrId& mr, std::uint64_t seed) const {
    return {{"kind", "svm-cell"},
            {"version", kCacheVersion},
            {"data", plan_json_.at("data")},
            {"kernel", plan_json_.at("kernel")},
            {"suite", metamorphic::suite_to_json(suite_)},
            {"subject", row},
            {"mr", mr.to_string()},
            {"seed", seed}};
  }

  // MR-1's RGB order and MR-2's identity train on the same data.
  json variant_key(const std::string& row, const TransformSpec& spec, std::uint64_t seed) const {
    const std::string label = is_identity(spec) ? "identity" : spec.label();
    return {{"kind", "cnn-variant"},
            {"version", kCacheVersion},
            {"data", plan_json_.at("data")},
            {"hyperparameters", plan_json_.at("hyperparameters")},
            {"architecture", plan_json_.at("architecture")},
            {"subject", row},
            {"variant", label},
            {"seed", seed}};
  }

  static bool is_identity(const TransformSpec& spec) {
    using Kind = TransformSpec::Kind;
    return (spec.kind == Kind::kDihedral && spec.dihedral == metamorphic::Dihedral::kIdentity) ||
           (spec.kind == Kind::kChannelOrder &&
            spec.order == metamorphic::ChannelOrder{0, 1, 2});
  }

  // Trains one variant, or reads it back from the cache.
  VariantRun variant(const std::string& row, const faults::CnnSubject& subject,
                     const TransformSpec& spec, const dataset::ImageSplit& split,
                     std::uint64_t seed) const {
    const std::string key = CellCache::key(variant_key(row, spec, seed));
    if (auto hit = cache_.get(key)) {
      try {
        return variant_from_json(*hit);
      } catch (const std::exception&) {
        // Unreadable entry: recompute.
      }
    }
    VariantRun run = metamorphic::run_variant(subject, split, seed);
    const bool keep_model = is_identity(spec);
    cache_.put(key, variant_to_json(run, keep_model));
    log("  trained " + row + " " + spec.label() + " seed " + std::to_string(seed) +
        (run.crash ? " (crashed)" : run.diverged ? " (diverged)" : ""));
    return run;
  }

 private:
  static json variant_to_json(const VariantRun& run, bool keep_model) {
    json trace = json::array();
    for (const auto& p : run.trace) {
      trace.push_back({p.step, metamorphic::number_to_json(p.test_loss),
                       metamorphic::number_to_json(p.test_accuracy)});
    }
    json j;
    j["trace"] = std::move(trace);
    j["diverged"] = run.diverged;
    j["crash"] = run.crash ? json(*run.crash) : json(nullptr);
    j["model"] = keep_model && run.model ? json(cnn::checkpoint_to_json(*run.model))
                                         : json(nullptr);
    return j;
  }

  static VariantRun variant_from_json(const json& j) {
    VariantRun run;
    for (const auto& p : j.at("trace")) {
      run.trace.push_back({p.at(0).get<std::int64_t>(), metamorphic::number_from_json(p.at(1)),
                           metamorphic::number_from_json(p.at(2))});
    }
    run.diverged = j.at("diverged").get<bool>();
    if (!j.at("crash").is_null()) run.crash = j.at("crash").get<std::string>();
    if (!j.at("model").is_null()) {
      run.model = cnn::checkpoint_from_json(j.at("model").get<std::string>());
    }
    return run;
  }

  json plan_json_;
  CellCache cache_;
  const RunOptions& options_;
  metamorphic::SuiteConfig suite_;
  mutable std::mutex log_mutex_;
};

std::string describe(const MrVerdict& v) {
  std::string s = metamorphic::to_string(v.status);
  if (v.status != Status::kInconclusive) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), " (%s %.4g)", v.evidence_kind.c_str(), v.evidence);
    s += buf;
  } else {
    s += ": " + v.note;
  }
  return s;
}

faults::SubjectConfig subject_for(const RunPlan& plan, const std::string& row) {
  const faults::SubjectConfig base = base_subject(plan);
  return row == kBaselineRow ? base : faults::apply_mutant(base, row);
}

MrVerdict run_cnn_cell(const Context& ctx, const RunPlan& plan, const std::string& row,
                       const faults::CnnSubject& subject, const MrId& mr,
                       const dataset::ImageSplit& split, std::uint64_t seed,
                       const RunOptions& options) {
  if (mr.index == 1 || mr.index == 2) {
    auto trainer = [&](const TransformSpec& spec, const dataset::ImageSplit& variant_split) {
      return ctx.variant(row, subject, spec, variant_split, seed);
    };
    const auto result = metamorphic::run_cnn_training_mr(mr, split, trainer, ctx.suite());
    if (options.emit_curves && !result.traces.empty()) {
      emit_loss_curves(result.traces, fs::path(plan.output_dir) / "curves", row, mr, seed);
    }
    return result.verdict;
  }
  TransformSpec identity;
  identity.kind = TransformSpec::Kind::kDihedral;
  const VariantRun run = ctx.variant(row, subject, identity, split, seed);
  if (run.crash || run.diverged || !run.model) {
    MrVerdict v;
    v.mr = mr;
    v.status = Status::kInconclusive;
    v.threshold = ctx.suite().test_only_threshold;
    v.note = run.crash ? "subject crashed: " + *run.crash : "training diverged";
    return v;
  }
  return metamorphic::run_cnn_test_only_mr(mr, *run.model, split.test, ctx.suite());
}

}  // namespace

std::size_t workers_from_env() {
  const char* raw = std::getenv("MTVERIFY_WORKERS");
  if (raw == nullptr || *raw == '\0') return 1;
  const std::string text(raw);
  std::size_t n = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc() || end != text.data() + text.size() || n == 0) {
    throw ConfigError("MTVERIFY_WORKERS must be a positive integer, got '" + text + "'");
  }
  return n;
}

KillMatrix run_suite(const RunPlan& plan, const RunOptions& options) {
  plan.validate();
  const Context ctx(plan, options);

  KillMatrix matrix;
  matrix.family = plan.family;
  if (plan.family == Family::kSvm) matrix.kernel = plan.kernel.kind;
  matrix.columns = plan.effective_mrs();
  std::vector<std::string> rows{kBaselineRow};
  rows.insert(rows.end(), plan.mutants.begin(), plan.mutants.end());

  std::vector<dataset::VectorSplit> vector_splits;
  dataset::ImageSplit image_split;
  if (plan.family == Family::kSvm) {
    for (std::uint64_t seed : plan.seeds) vector_splits.push_back(load_vector_data(plan, seed));
  } else {
    image_split = load_image_data(plan);
  }

  for (const std::string& row : rows) {
    const faults::SubjectConfig subject = subject_for(plan, row);
    std::vector<Cell> cells;
    for (const MrId& mr : matrix.columns) {
      std::vector<MrVerdict> per_seed;
      for (std::size_t s = 0; s < plan.seeds.size(); ++s) {
        const std::uint64_t seed = plan.seeds[s];
        MrVerdict v;
        if (plan.family == Family::kSvm) {
          const std::string key = CellCache::key(ctx.svm_key(row, mr, seed));
          std::optional<MrVerdict> cached;
          if (auto hit = ctx.cache().get(key)) {
            try {
              cached = metamorphic::verdict_from_json(*hit);
            } catch (const std::exception&) {
            }
          }
          if (cached) {
            v = *cached;
          } else {
            v = metamorphic::run_svm_mr(mr, vector_splits[s], subject.svm, ctx.suite());
            ctx.cache().put(key, metamorphic::verdict_to_json(v));
          }
        } else {
          v = run_cnn_cell(ctx, plan, row, subject.cnn, mr, image_split, seed, options);
        }
        ctx.log(row + " " + mr.to_string() + " seed " + std::to_string(seed) + ": " +
                describe(v));
        per_seed.push_back(std::move(v));
      }
      cells.push_back(aggregate_cell(mr, plan.seeds, std::move(per_seed)));
    }
    matrix.rows.push_back(row);
    matrix.cells.push_back(std::move(cells));
    if (row == kBaselineRow && !matrix.baseline_clean()) {
      throw BaselineKilled("the clean baseline was killed; the suite itself is broken", matrix);
    }
  }
  return matrix;
}

std::vector<Calibration> calibrate(const RunPlan& plan, const RunOptions& options,
                                   double multiplier) {
  if (plan.family != Family::kCnn) throw ConfigError("calibration needs a CNN plan");
  if (!(multiplier > 0.0)) throw ConfigError("multiplier must be positive");
  plan.validate();
  const Context ctx(plan, options);
  const dataset::ImageSplit split = load_image_data(plan);
  const faults::CnnSubject subject = base_subject(plan).cnn;

  std::vector<Calibration> out;
  for (int index : {1, 2}) {
    Calibration c;
    c.mr = {Family::kCnn, index};
    c.multiplier = multiplier;
    double largest = 0.0;
    for (std::uint64_t seed : plan.seeds) {
      auto trainer = [&](const TransformSpec& spec, const dataset::ImageSplit& variant_split) {
        return ctx.variant(kBaselineRow, subject, spec, variant_split, seed);
      };
      const auto result = metamorphic::run_cnn_training_mr(c.mr, split, trainer, ctx.suite());
      if (result.verdict.status == Status::kInconclusive) {
        throw TrainingError("clean calibration run failed: " + result.verdict.note);
      }
      c.seeds.push_back(seed);
      c.sigma_max.push_back(result.sigma.sigma_max);
      if (std::isfinite(result.sigma.sigma_max)) largest = std::max(largest, result.sigma.sigma_max);
      ctx.log("calibrate " + c.mr.to_string() + " seed " + std::to_string(seed) +
              ": sigma_max " + std::to_string(result.sigma.sigma_max));
    }
    c.threshold = multiplier * largest;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace mtv::harness
