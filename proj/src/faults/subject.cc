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

#include "mtv/faults.h"

namespace mtv::faults {

dataset::LabeledVectorSet read_labels(const SvmSubject& subject,
                                      const dataset::LabeledVectorSet& rows) {
  if (subject.label_column == dataset::kDigitFeatures) return rows;
  if (subject.label_column > dataset::kDigitFeatures || subject.label_column >= rows.cols) {
    throw ArgumentError("label column " + std::to_string(subject.label_column) +
                        " out of range");
  }
  dataset::LabeledVectorSet out = rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = rows.row(i)[subject.label_column];
    if (!std::isfinite(v)) throw ValidationError("non-finite label in row " + std::to_string(i));
    // Truncation, as an integer cast of the column would do.
    out.labels[i] = static_cast<int>(v);
  }
  return out;
}

svm::SvmModel train_svm_subject(const SvmSubject& subject,
                                const dataset::LabeledVectorSet& rows) {
  const dataset::LabeledVectorSet set = read_labels(subject, rows);
  svm::KernelSpec kernel = subject.kernel;
  if (kernel.kind == svm::KernelKind::kRbf && kernel.gamma == 0.0) {
    kernel.gamma = svm::default_gamma(set);
  }
  return svm::train_multiclass(set, kernel, subject.train);
}

dataset::LabeledImageSet read_training_files(const CnnSubject& subject,
                                             const dataset::LabeledImageSet& train) {
  const std::size_t files = subject.training_files;
  if (files == 0) throw ConfigError("training_files must be positive");
  if (subject.files_read.empty()) return train;
  const std::size_t n = train.size();
  std::vector<std::size_t> keep;
  for (std::size_t f : subject.files_read) {
    if (f >= files) {
      throw ConfigError("training file " + std::to_string(f) + " out of range");
    }
    for (std::size_t i = f * n / files; i < (f + 1) * n / files; ++i) keep.push_back(i);
  }
  if (keep.empty()) throw ConfigError("selected training files are empty");
  return dataset::select(train, keep);
}

cnn::TrainResult train_cnn_subject(const CnnSubject& subject, const dataset::ImageSplit& split,
                                   std::uint64_t seed) {
  if (subject.crash) {
    throw SubjectCrash("subject aborted: input pipeline indexed past the last file");
  }
  dataset::ImageSplit effective{read_training_files(subject, split.train), split.test};
  cnn::TrainRun run;
  run.seed = seed;
  run.hyper = subject.hyper;
  return cnn::train(subject.model, effective, std::move(run));
}

}  // namespace mtv::faults
