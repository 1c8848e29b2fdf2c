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

#include <nlohmann/json.hpp>

#include "mtv/faults.h"

namespace mtv::faults {
namespace {

// Value the c50 analogue pads with before standardization.
constexpr double kWrongPadValue = 255.0;

std::vector<MutantSpec> build_catalog() {
  std::vector<MutantSpec> out;

  // (id suffix, column) for the wrong-label-column family.
  const std::pair<int, int> label_mutants[] = {{2, 1},   {5, 2},   {8, 10},
                                               {11, 20}, {22, 36}, {31, 60}};
  for (auto kernel : {svm::KernelKind::kLinear, svm::KernelKind::kRbf}) {
    const char prefix = kernel == svm::KernelKind::kLinear ? 'l' : 'r';
    for (auto [num, column] : label_mutants) {
      MutantSpec m;
      m.id = prefix + std::to_string(num);
      m.target = Family::kSvm;
      m.kernel = kernel;
      m.category = Category::kWrongLabelColumn;
      m.description = "label read from column " + std::to_string(column) + " instead of the last";
      m.analogue = m.id;
      m.parameters["label_column"] = column;
      out.push_back(std::move(m));
    }
  }

  auto cnn = [&out](std::string id, Category category, std::string description,
                    std::map<std::string, double> params = {}) {
    MutantSpec m;
    m.id = id;
    m.target = Family::kCnn;
    m.category = category;
    m.description = std::move(description);
    m.analogue = std::move(id);
    m.parameters = std::move(params);
    out.push_back(std::move(m));
  };
  cnn("c9", Category::kReduceTrainingFiles, "last training file skipped");
  cnn("c29", Category::kLossFunction, "objective is cross-entropy minus the weight-decay term");
  cnn("c30", Category::kReduceTrainingFiles, "first training file skipped");
  cnn("c31", Category::kLossFunction, "weight-decay term divided into the coefficient");
  cnn("c32", Category::kLossFunction, "weight-decay term subtracted from the coefficient");
  cnn("c43", Category::kLearningRateDecay, "learning rate divided by the decay factor");
  cnn("c44", Category::kLearningRateDecay, "decay boundaries applied from the first step");
  cnn("c45", Category::kReduceTrainingFiles, "only the first training file read");
  cnn("c49", Category::kLearningRateDecay, "decay boundaries mirrored in time");
  cnn("c50", Category::kPadWrongChannels, "constant channel padded before standardization",
      {{"pad_value", kWrongPadValue}});
  cnn("c116", Category::kLossFunction, "cross-entropy summed instead of averaged");
  cnn("c221", Category::kInterchangeTrainTest, "batch norm uses running statistics in training");
  cnn("r6", Category::kArchitecture, "skip connections removed");
  cnn("r48", Category::kPadWrongChannels, "zero channel padded after standardization",
      {{"zero_channels", 1}});
  cnn("r49", Category::kArchitecture, "two blocks per stage", {{"blocks_per_stage", 2}});
  cnn("r67", Category::kInterchangeTrainTest, "batch norm uses batch statistics at test time");
  cnn("crash1", Category::kCrash, "subject aborts before training");
  return out;
}

}  // namespace

std::string to_string(Family family) { return family == Family::kSvm ? "svm" : "cnn"; }

Family family_from_string(const std::string& name) {
  if (name == "svm") return Family::kSvm;
  if (name == "cnn") return Family::kCnn;
  throw ConfigError("unknown classifier family '" + name + "'");
}

std::string to_string(Category category) {
  switch (category) {
    case Category::kWrongLabelColumn:
      return "wrong_label_column";
    case Category::kReduceTrainingFiles:
      return "reduce_training_files";
    case Category::kLossFunction:
      return "loss_function";
    case Category::kLearningRateDecay:
      return "learning_rate_decay";
    case Category::kInterchangeTrainTest:
      return "interchange_train_test";
    case Category::kArchitecture:
      return "architecture";
    case Category::kPadWrongChannels:
      return "pad_wrong_channels";
    case Category::kCrash:
      return "crash";
  }
  return "unknown";
}

const std::vector<MutantSpec>& list_mutants() {
  static const std::vector<MutantSpec> catalog = build_catalog();
  return catalog;
}

const MutantSpec& find_mutant(const std::string& id) {
  for (const auto& m : list_mutants()) {
    if (m.id == id) return m;
  }
  throw ConfigError("unknown mutant '" + id + "'");
}

std::string catalog_to_json() {
  nlohmann::ordered_json doc;
  doc["format"] = "mtverify.mutants/1";
  doc["mutants"] = nlohmann::ordered_json::array();
  for (const auto& m : list_mutants()) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    j["target"] = to_string(m.target);
    if (m.kernel) j["kernel"] = svm::to_string(*m.kernel);
    j["category"] = to_string(m.category);
    j["description"] = m.description;
    j["analogue"] = m.analogue;
    j["parameters"] = m.parameters;
    doc["mutants"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

SubjectConfig apply_mutant(const SubjectConfig& config, const std::string& id) {
  const MutantSpec& m = find_mutant(id);
  if (config.mutant) {
    throw ConfigError("mutant '" + *config.mutant + "' is already active");
  }
  if (m.target != config.family) {
    throw ConfigError("mutant '" + id + "' targets " + to_string(m.target) + ", subject is " +
                      to_string(config.family));
  }
  if (m.kernel && *m.kernel != config.svm.kernel.kind) {
    throw ConfigError("mutant '" + id + "' requires the " + svm::to_string(*m.kernel) +
                      " kernel");
  }

  SubjectConfig out = config;
  out.mutant = id;
  auto& model = out.cnn.model;
  const std::size_t files = out.cnn.training_files;
  auto all_files_but = [files](std::size_t skip) {
    std::vector<std::size_t> v;
    for (std::size_t f = 0; f < files; ++f) {
      if (f != skip) v.push_back(f);
    }
    return v;
  };

  if (m.category == Category::kWrongLabelColumn) {
    out.svm.label_column = static_cast<std::size_t>(m.parameters.at("label_column"));
  } else if (id == "c9") {
    out.cnn.files_read = all_files_but(files - 1);
  } else if (id == "c30") {
    out.cnn.files_read = all_files_but(0);
  } else if (id == "c45") {
    out.cnn.files_read = {0};
  } else if (id == "c29") {
    model.faults.loss = cnn::LossForm::kMinusDecay;
  } else if (id == "c31") {
    model.faults.loss = cnn::LossForm::kDecayOverNorm;
  } else if (id == "c32") {
    model.faults.loss = cnn::LossForm::kDecayMinusNorm;
  } else if (id == "c116") {
    model.faults.loss = cnn::LossForm::kSummedCrossEntropy;
  } else if (id == "c43") {
    model.faults.schedule = cnn::ScheduleFault::kInvertedFactor;
  } else if (id == "c44") {
    model.faults.schedule = cnn::ScheduleFault::kImmediate;
  } else if (id == "c49") {
    model.faults.schedule = cnn::ScheduleFault::kReversed;
  } else if (id == "c50") {
    model.pipeline.stats_pad_value = static_cast<float>(m.parameters.at("pad_value"));
  } else if (id == "c221") {
    model.faults.running_stats_in_training = true;
  } else if (id == "r6") {
    model.arch.skip_connections = false;
  } else if (id == "r48") {
    model.pipeline.zero_channels = static_cast<int>(m.parameters.at("zero_channels"));
  } else if (id == "r49") {
    model.arch.blocks_per_stage = static_cast<int>(m.parameters.at("blocks_per_stage"));
  } else if (id == "r67") {
    model.eval_uses_batch_stats = true;
  } else if (id == "crash1") {
    out.cnn.crash = true;
  }
  return out;
}

std::vector<std::string> deviation_sites(const SubjectConfig& a, const SubjectConfig& b) {
  std::vector<std::string> sites;
  auto check = [&sites](bool same, const char* name) {
    if (!same) sites.emplace_back(name);
  };
  check(a.family == b.family, "family");
  check(a.svm.kernel == b.svm.kernel, "svm.kernel");
  check(a.svm.train == b.svm.train, "svm.train");
  check(a.svm.label_column == b.svm.label_column, "svm.label_column");
  const auto& ma = a.cnn.model;
  const auto& mb = b.cnn.model;
  check(ma.arch.skip_connections == mb.arch.skip_connections, "cnn.arch.skip_connections");
  check(ma.arch.blocks_per_stage == mb.arch.blocks_per_stage, "cnn.arch.blocks_per_stage");
  {
    auto ra = ma.arch;
    auto rb = mb.arch;
    ra.skip_connections = rb.skip_connections;
    ra.blocks_per_stage = rb.blocks_per_stage;
    check(ra == rb, "cnn.arch");
  }
  check(ma.pipeline.zero_channels == mb.pipeline.zero_channels, "cnn.pipeline.zero_channels");
  check(ma.pipeline.stats_pad_value == mb.pipeline.stats_pad_value,
        "cnn.pipeline.stats_pad_value");
  check(ma.eval_uses_batch_stats == mb.eval_uses_batch_stats, "cnn.eval_uses_batch_stats");
  check(ma.faults.loss == mb.faults.loss, "cnn.loss");
  check(ma.faults.schedule == mb.faults.schedule, "cnn.schedule");
  check(ma.faults.running_stats_in_training == mb.faults.running_stats_in_training,
        "cnn.running_stats_in_training");
  check(a.cnn.hyper == b.cnn.hyper, "cnn.hyper");
  check(a.cnn.training_files == b.cnn.training_files, "cnn.training_files");
  check(a.cnn.files_read == b.cnn.files_read, "cnn.files_read");
  check(a.cnn.crash == b.cnn.crash, "cnn.crash");
  return sites;
}

}  // namespace mtv::faults
