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

// Mutant registry. Each mutant is a single behavior flag in the subject
// configuration; the reference classifiers read those flags at the one
// place the fault lives.

#ifndef MTV_FAULTS_H_
#define MTV_FAULTS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtv/cnn/train.h"
#include "mtv/dataset.h"
#include "mtv/error.h"
#include "mtv/svm.h"

namespace mtv::faults {

enum class Family { kSvm, kCnn };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

enum class Category {
  kWrongLabelColumn,
  kReduceTrainingFiles,
  kLossFunction,
  kLearningRateDecay,
  kInterchangeTrainTest,
  kArchitecture,
  kPadWrongChannels,
  kCrash,
};

std::string to_string(Category category);

struct MutantSpec {
  std::string id;
  Family target = Family::kSvm;
  // SVM mutants exist once per kernel.
  std::optional<svm::KernelKind> kernel;
  Category category = Category::kWrongLabelColumn;
  std::string description;
  // The mutant of the original study this flag re-expresses.
  std::string analogue;
  std::map<std::string, double> parameters;
};

const std::vector<MutantSpec>& list_mutants();
// Throws ConfigError for an unknown id.
const MutantSpec& find_mutant(const std::string& id);
std::string catalog_to_json();

struct SvmSubject {
  // gamma == 0 selects the training-set default.
  svm::KernelSpec kernel = svm::KernelSpec::linear();
  svm::SvmTrainConfig train;
  // Column of the 65-column digits row holding the label.
  std::size_t label_column = dataset::kDigitFeatures;
  bool operator==(const SvmSubject&) const = default;
};

struct CnnSubject {
  cnn::ModelConfig model;
  cnn::Hyperparameters hyper;
  // The training set is read as this many contiguous files.
  std::size_t training_files = 5;
  // Indices of the files actually read; empty means all of them.
  std::vector<std::size_t> files_read;
  bool crash = false;
  bool operator==(const CnnSubject&) const = default;
};

struct SubjectConfig {
  Family family = Family::kSvm;
  SvmSubject svm;
  CnnSubject cnn;
  std::optional<std::string> mutant;
  bool operator==(const SubjectConfig&) const = default;
};

// Activates one mutant. Throws ConfigError for an unknown id, a family or
// kernel mismatch, or when a mutant is already active.
SubjectConfig apply_mutant(const SubjectConfig& config, const std::string& id);

// Names of the fields in which two configurations differ, ignoring the
// mutant id itself.
std::vector<std::string> deviation_sites(const SubjectConfig& a, const SubjectConfig& b);

// Raised by a subject whose injected fault makes it abort.
class SubjectCrash : public Error {
 public:
  using Error::Error;
};

// SVM subject: labels come from config.label_column of the digits row.
dataset::LabeledVectorSet read_labels(const SvmSubject& subject,
                                      const dataset::LabeledVectorSet& rows);
svm::SvmModel train_svm_subject(const SvmSubject& subject,
                                const dataset::LabeledVectorSet& rows);

// CNN subject: applies the input-file and crash faults, then trains.
dataset::LabeledImageSet read_training_files(const CnnSubject& subject,
                                             const dataset::LabeledImageSet& train);
cnn::TrainResult train_cnn_subject(const CnnSubject& subject, const dataset::ImageSplit& split,
                                   std::uint64_t seed);

}  // namespace mtv::faults

#endif  // MTV_FAULTS_H_
