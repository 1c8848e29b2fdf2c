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

#include "mtv/cnn/checkpoint.h"
#include "mtv/harness.h"

namespace mtv::harness {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kPlanFormat = "mtverify.plan/1";

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

DataSource data_from_json(const json& j, const std::string& base_dir) {
  DataSource d;
  for (const auto& [key, value] : j.items()) {
    if (key == "manifest") {
      d.manifest = resolve(base_dir, value.get<std::string>());
    } else if (key == "synthetic") {
      d.synthetic_train_per_class = value.value("train_per_class", d.synthetic_train_per_class);
      d.synthetic_test_per_class = value.value("test_per_class", d.synthetic_test_per_class);
      d.synthetic_train_seed = value.value("train_seed", d.synthetic_train_seed);
      d.synthetic_test_seed = value.value("test_seed", d.synthetic_test_seed);
    } else if (key == "subsample") {
      d.subsample = value.get<double>();
    } else if (key == "subsample_seed") {
      d.subsample_seed = value.get<std::uint64_t>();
    } else if (key == "crop") {
      d.crop = value.get<std::size_t>();
    } else {
      throw ConfigError("unknown data key '" + key + "'");
    }
  }
  return d;
}

json data_to_json(const DataSource& d) {
  json j;
  j["manifest"] = d.manifest;
  j["synthetic"] = {{"train_per_class", d.synthetic_train_per_class},
                    {"test_per_class", d.synthetic_test_per_class},
                    {"train_seed", d.synthetic_train_seed},
                    {"test_seed", d.synthetic_test_seed}};
  j["subsample"] = d.subsample;
  j["subsample_seed"] = d.subsample_seed;
  j["crop"] = d.crop;
  return j;
}

dataset::LabeledVectorSet load_digits_files(const dataset::Manifest& m,
                                            const std::vector<std::string>& files) {
  dataset::LabeledVectorSet out;
  out.cols = dataset::kDigitFeatures;
  for (const auto& path : files) {
    const auto part = dataset::load_digits_csv(path, m.classes);
    out.features.insert(out.features.end(), part.features.begin(), part.features.end());
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
  }
  return out;
}

}  // namespace

void RunPlan::validate() const {
  for (const auto& mr : mrs) {
    if (mr.family != family) throw ConfigError(mr.to_string() + " belongs to another family");
    if (family == Family::kSvm && !metamorphic::is_applicable(mr, kernel.kind)) {
      throw ConfigError(mr.to_string() + " does not apply to the " + svm::to_string(kernel.kind) +
                        " kernel");
    }
  }
  std::set<std::string> seen;
  const faults::SubjectConfig base = base_subject(*this);
  for (const auto& id : mutants) {
    if (id == kBaselineRow) throw ConfigError("'clean' is the baseline row, not a mutant");
    if (!seen.insert(id).second) throw ConfigError("mutant '" + id + "' listed twice");
    apply_mutant(base, id);  // throws ConfigError when unresolvable
  }
  if (seeds.empty()) throw ConfigError("plan needs at least one seed");
  if (!(data.subsample > 0.0 && data.subsample <= 1.0)) {
    throw ConfigError("subsample must be in (0, 1]");
  }
  if (family == Family::kSvm) {
    if (data.manifest.empty()) throw ConfigError("SVM plans need a digits manifest");
    if (kernel.kind == svm::KernelKind::kRbf && kernel.gamma < 0.0) {
      throw ConfigError("gamma must be >= 0");
    }
  } else {
    try {
      arch.validate();
      hyper.validate();
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    if (data.manifest.empty() &&
        (data.synthetic_train_per_class == 0 || data.synthetic_test_per_class == 0)) {
      throw ConfigError("synthetic data needs at least one image per class");
    }
  }
}

std::vector<MrId> RunPlan::effective_mrs() const {
  if (!mrs.empty()) return mrs;
  return metamorphic::applicable_mrs(family, kernel.kind);
}

RunPlan plan_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("plan must be a JSON object");
  RunPlan plan;
  try {
    if (j.contains("format") && j.at("format").get<std::string>() != kPlanFormat) {
      throw ConfigError("unsupported plan format '" + j.at("format").get<std::string>() + "'");
    }
    plan.family = faults::family_from_string(j.at("family").get<std::string>());
    std::vector<std::string> mr_names;
    for (const auto& [key, value] : j.items()) {
      if (key == "format" || key == "family") continue;
      if (key == "kernel") {
        plan.kernel.kind = svm::kernel_kind_from_string(value.at("kind").get<std::string>());
        plan.kernel.gamma = value.value("gamma", 0.0);
      } else if (key == "data") {
        plan.data = data_from_json(value, base_dir);
      } else if (key == "mrs") {
        mr_names = value.get<std::vector<std::string>>();
      } else if (key == "mutants") {
        plan.mutants = value.get<std::vector<std::string>>();
      } else if (key == "seeds") {
        plan.seeds = value.get<std::vector<std::uint64_t>>();
      } else if (key == "output_dir") {
        plan.output_dir = resolve(base_dir, value.get<std::string>());
      } else if (key == "suite") {
        plan.suite = metamorphic::suite_from_json(value);
      } else if (key == "hyperparameters") {
        plan.hyper = cnn::hyperparameters_from_json(nlohmann::json::parse(value.dump()));
      } else if (key == "architecture") {
        plan.arch = cnn::architecture_from_json(nlohmann::json::parse(value.dump()));
      } else {
        throw ConfigError("unknown plan key '" + key + "'");
      }
    }
    for (const auto& name : mr_names) {
      plan.mrs.push_back(metamorphic::mr_from_string(plan.family, name));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed plan: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  plan.validate();
  return plan;
}

json plan_to_json(const RunPlan& plan) {
  json j;
  j["format"] = kPlanFormat;
  j["family"] = faults::to_string(plan.family);
  if (plan.family == Family::kSvm) {
    j["kernel"] = {{"kind", svm::to_string(plan.kernel.kind)}, {"gamma", plan.kernel.gamma}};
  }
  j["data"] = data_to_json(plan.data);
  json mrs = json::array();
  for (const auto& mr : plan.mrs) mrs.push_back(mr.to_string());
  j["mrs"] = mrs;
  j["mutants"] = plan.mutants;
  j["seeds"] = plan.seeds;
  j["output_dir"] = plan.output_dir;
  j["suite"] = metamorphic::suite_to_json(plan.suite);
  if (plan.family == Family::kCnn) {
    j["hyperparameters"] = json::parse(cnn::to_json(plan.hyper).dump());
    j["architecture"] = json::parse(cnn::to_json(plan.arch).dump());
  }
  return j;
}

RunPlan load_plan(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("plan " + path + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return plan_from_json(doc, fs::path(path).parent_path().string());
}

RunPlan desk_svm_plan(svm::KernelKind kernel, const std::string& digits_manifest) {
  RunPlan plan;
  plan.family = Family::kSvm;
  plan.kernel = kernel == svm::KernelKind::kLinear ? svm::KernelSpec::linear()
                                                   : svm::KernelSpec::rbf(0.0);
  plan.data.manifest = digits_manifest;
  plan.data.subsample = 0.25;  // about 337 train / 112 test rows
  for (const auto& m : faults::list_mutants()) {
    if (m.target == Family::kSvm && m.kernel == kernel) plan.mutants.push_back(m.id);
  }
  plan.seeds = {1};
  return plan;
}

RunPlan desk_cnn_plan() {
  RunPlan plan;
  plan.family = Family::kCnn;
  // 500 training and 200 test images of 16x16.
  plan.data.synthetic_train_per_class = 50;
  plan.data.synthetic_test_per_class = 20;
  plan.data.crop = 16;
  // 128 steps. Weight decay is raised so that its share of each update,
  // accumulated over the short run, is large enough for a corrupted decay
  // term to move the loss curves.
  plan.hyper.epochs = 8;
  plan.hyper.weight_decay = 0.1;
  for (const auto& m : faults::list_mutants()) {
    if (m.target == Family::kCnn && m.category != faults::Category::kCrash) {
      plan.mutants.push_back(m.id);
    }
  }
  plan.seeds = {1, 2, 3};
  return plan;
}

faults::SubjectConfig base_subject(const RunPlan& plan) {
  faults::SubjectConfig cfg;
  cfg.family = plan.family;
  cfg.svm.kernel = plan.kernel;
  cfg.cnn.model.arch = plan.arch;
  cfg.cnn.hyper = plan.hyper;
  return cfg;
}

dataset::VectorSplit load_vector_data(const RunPlan& plan, std::uint64_t seed) {
  const dataset::Manifest m = dataset::load_manifest(plan.data.manifest);
  if (m.format != dataset::Manifest::Format::kDigitsCsv) {
    throw ConfigError("SVM plans need a digits_csv manifest");
  }
  auto thin = [&](dataset::LabeledVectorSet set) {
    if (plan.data.subsample >= 1.0) return set;
    return dataset::subsample_stratified(set, plan.data.subsample, plan.data.subsample_seed);
  };
  if (m.test) {
    return {thin(load_digits_files(m, m.train)), thin(load_digits_files(m, {*m.test}))};
  }
  return dataset::split_stratified(thin(load_digits_files(m, m.train)), m.test_fraction, seed);
}

dataset::ImageSplit load_image_data(const RunPlan& plan) {
  dataset::ImageSplit split;
  if (plan.data.manifest.empty()) {
    split.train = dataset::make_synthetic_images(plan.data.synthetic_train_per_class,
                                                 plan.data.synthetic_train_seed,
                                                 plan.arch.num_classes);
    split.test = dataset::make_synthetic_images(plan.data.synthetic_test_per_class,
                                                plan.data.synthetic_test_seed,
                                                plan.arch.num_classes);
  } else {
    split = dataset::load_image_split(dataset::load_manifest(plan.data.manifest));
  }
  if (plan.data.subsample < 1.0) {
    split.train =
        dataset::subsample_stratified(split.train, plan.data.subsample, plan.data.subsample_seed);
    split.test =
        dataset::subsample_stratified(split.test, plan.data.subsample, plan.data.subsample_seed);
  }
  if (plan.data.crop != 0 && plan.data.crop != split.train.height) {
    split.train = dataset::center_crop(split.train, plan.data.crop);
    split.test = dataset::center_crop(split.test, plan.data.crop);
  }
  if (static_cast<std::size_t>(plan.arch.image_size) != split.train.height) {
    throw ConfigError("architecture image_size " + std::to_string(plan.arch.image_size) +
                      " does not match the " + std::to_string(split.train.height) +
                      "px input");
  }
  return split;
}

}  // namespace mtv::harness
