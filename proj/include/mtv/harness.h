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

// Suite orchestration: run plans, kill matrices, reports and the on-disk
// cell cache.

#ifndef MTV_HARNESS_H_
#define MTV_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtv/metamorphic.h"

namespace mtv::harness {

using faults::Family;
using metamorphic::MrId;
using metamorphic::MrVerdict;
using metamorphic::Status;

inline constexpr int kExitOk = 0;
inline constexpr int kExitBaselineKilled = 1;
inline constexpr int kExitConfigError = 2;

inline constexpr const char* kBaselineRow = "clean";

// ---- Plans -----------------------------------------------------------------

struct DataSource {
  // Dataset manifest; empty selects generated images (CNN plans only).
  std::string manifest;
  std::size_t synthetic_train_per_class = 50;
  std::size_t synthetic_test_per_class = 20;
  std::uint64_t synthetic_train_seed = 101;
  std::uint64_t synthetic_test_seed = 202;
  // Stratified fraction kept of each set.
  double subsample = 1.0;
  std::uint64_t subsample_seed = 5;
  // Center crop side for images; 0 keeps the full image.
  std::size_t crop = 16;
  bool operator==(const DataSource&) const = default;
};

struct RunPlan {
  Family family = Family::kSvm;
  // SVM plans; gamma 0 selects the training-set default.
  svm::KernelSpec kernel = svm::KernelSpec::linear();
  DataSource data;
  // Empty means every applicable relation.
  std::vector<MrId> mrs;
  std::vector<std::string> mutants;
  // SVM: split seeds. CNN: training seeds.
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "mtverify-out";
  metamorphic::SuiteConfig suite;
  cnn::Hyperparameters hyper;
  cnn::Architecture arch;

  // Throws ConfigError on unresolvable ids or invalid values.
  void validate() const;
  std::vector<MrId> effective_mrs() const;
  bool operator==(const RunPlan&) const = default;
};

// Relative manifest paths resolve against base_dir.
RunPlan plan_from_json(const nlohmann::ordered_json& j, const std::string& base_dir = ".");
nlohmann::ordered_json plan_to_json(const RunPlan& plan);
RunPlan load_plan(const std::string& path);

// Desk-scale reference configurations.
RunPlan desk_svm_plan(svm::KernelKind kernel, const std::string& digits_manifest);
RunPlan desk_cnn_plan();
// The clean subject a plan describes, before any mutant.
faults::SubjectConfig base_subject(const RunPlan& plan);

dataset::VectorSplit load_vector_data(const RunPlan& plan, std::uint64_t seed);
dataset::ImageSplit load_image_data(const RunPlan& plan);

// ---- Kill matrix -----------------------------------------------------------

struct Cell {
  // Aggregate over seeds: killed if any seed killed, evidence the maximum.
  MrVerdict verdict;
  std::vector<std::uint64_t> seeds;
  std::vector<MrVerdict> per_seed;
  bool operator==(const Cell&) const = default;
};

Cell aggregate_cell(const MrId& mr, std::span<const std::uint64_t> seeds,
                    std::vector<MrVerdict> per_seed);

struct KillMatrix {
  Family family = Family::kSvm;
  std::optional<svm::KernelKind> kernel;
  // Baseline first.
  std::vector<std::string> rows;
  std::vector<MrId> columns;
  std::vector<std::vector<Cell>> cells;  // [row][column]

  const Cell& at(const std::string& row, const MrId& mr) const;
  // The baseline row exists and none of its cells is killed.
  bool baseline_clean() const;
  bool operator==(const KillMatrix&) const = default;
};

// "svm-linear", "svm-rbf" or "cnn".
std::string table_name(const KillMatrix& matrix);

struct MrSummary {
  std::string column;  // e.g. "cnn MR-2"
  std::size_t killed = 0;
  std::size_t inconclusive = 0;
  std::size_t total = 0;
};

struct Summary {
  std::vector<MrSummary> per_mr;
  // Mutants (baseline rows excluded) killed by at least one relation.
  std::size_t mutants = 0;
  std::size_t killed = 0;
  // Not killed, and at least one relation inconclusive.
  std::size_t inconclusive = 0;

  double kill_rate() const;
  // "20/28 (71%)"
  std::string headline() const;
};

Summary summarize(std::span<const KillMatrix> matrices);
Summary summarize(const KillMatrix& matrix);
nlohmann::ordered_json summary_to_json(const Summary& summary);

// ---- Reports ---------------------------------------------------------------

enum class ReportFormat { kJson, kCsv, kText };
ReportFormat report_format_from_string(const std::string& name);

nlohmann::ordered_json matrix_to_json(const KillMatrix& matrix);
KillMatrix matrix_from_json(const nlohmann::ordered_json& j);
KillMatrix load_matrix(const std::string& path);
// Header plus one row per matrix row: status and evidence per relation.
std::string matrix_to_csv(const KillMatrix& matrix);
// Checkmark grid; sigma_max kills show their evidence in brackets.
std::string matrix_to_text(const KillMatrix& matrix);
std::string render_report(const KillMatrix& matrix, ReportFormat format);

// Writes matrix.json, matrix.csv, matrix.txt and summary.json.
void emit_report(const KillMatrix& matrix, const std::filesystem::path& dir);

// One CSV per variant, dir/<subject>/seed-<s>/<MR>/<variant>.csv with
// columns step,test_loss,test_accuracy. Returns the files written.
std::vector<std::filesystem::path> emit_loss_curves(
    std::span<const metamorphic::VariantTrace> traces, const std::filesystem::path& dir,
    const std::string& subject, const MrId& mr, std::uint64_t seed);

// ---- Cache -----------------------------------------------------------------

// Content-addressed JSON store: one file per key under dir.
class CellCache {
 public:
  // An empty dir disables the cache.
  explicit CellCache(std::filesystem::path dir);

  static std::string key(const nlohmann::ordered_json& description);

  std::optional<nlohmann::ordered_json> get(const std::string& key) const;
  void put(const std::string& key, const nlohmann::ordered_json& value) const;
  bool enabled() const { return !dir_.empty(); }

 private:
  std::filesystem::path dir_;
};

// ---- Running ---------------------------------------------------------------

struct RunOptions {
  std::size_t workers = 1;
  bool use_cache = true;
  bool emit_curves = true;
  std::function<void(const std::string&)> log;
};

// MTVERIFY_WORKERS, else 1.
std::size_t workers_from_env();

class BaselineKilled : public Error {
 public:
  BaselineKilled(const std::string& what, KillMatrix partial)
      : Error(what), partial_(std::move(partial)) {}
  const KillMatrix& partial() const { return partial_; }

 private:
  KillMatrix partial_;
};

// Baseline row first; throws BaselineKilled before any mutant runs if a
// relation kills it. Completed cells are cached under output_dir/cells.
KillMatrix run_suite(const RunPlan& plan, const RunOptions& options = {});

struct Calibration {
  MrId mr;
  std::vector<std::uint64_t> seeds;
  std::vector<double> sigma_max;
  double multiplier = 3.0;
  double threshold = 0.0;  // multiplier x the largest finite sigma_max
};

// Clean-subject sigma_max for CNN MR-1 and MR-2 over the plan seeds.
std::vector<Calibration> calibrate(const RunPlan& plan, const RunOptions& options = {},
                                   double multiplier = 3.0);

}  // namespace mtv::harness

#endif  // MTV_HARNESS_H_
