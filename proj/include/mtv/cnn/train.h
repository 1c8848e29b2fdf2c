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

#ifndef MTV_CNN_TRAIN_H_
#define MTV_CNN_TRAIN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mtv/cnn/model.h"
#include "mtv/dataset.h"
#include "mtv/error.h"

namespace mtv::cnn {

struct Hyperparameters {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 32;
  int epochs = 4;
  // Fractions of the total step count at which the rate is multiplied by
  // decay_factor.
  std::vector<double> decay_boundaries{0.5, 0.75};
  double decay_factor = 0.1;
  // Test loss is recorded at step 0, every eval_every steps and at the end.
  std::int64_t eval_every = 10;
  double bn_momentum = 0.9;
  double divergence_loss = 1e4;

  void validate() const;
  bool operator==(const Hyperparameters&) const = default;
};

enum class ScheduleFault {
  kNone,
  kInvertedFactor,  // multiply by 1/decay_factor at each boundary
  kImmediate,       // every boundary already passed at step 0
  kReversed,        // boundaries mirrored: b -> 1 - b
};

std::string to_string(ScheduleFault fault);
ScheduleFault schedule_fault_from_string(const std::string& name);

// Deviations inside the optimization loop.
struct TrainingFaults {
  LossForm loss = LossForm::kStandard;
  ScheduleFault schedule = ScheduleFault::kNone;
  bool running_stats_in_training = false;
  bool operator==(const TrainingFaults&) const = default;
};

struct ModelConfig {
  Architecture arch;
  InputPipeline pipeline;
  bool eval_uses_batch_stats = false;
  TrainingFaults faults;
  bool operator==(const ModelConfig&) const = default;
};

struct TracePoint {
  std::int64_t step = 0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  bool operator==(const TracePoint&) const = default;
};

struct TrainRun {
  std::uint64_t seed = 0;
  Hyperparameters hyper;
  std::vector<TracePoint> trace;
  bool diverged = false;
  std::int64_t total_steps = 0;
};

// Raised when the loss leaves the finite range; carries the trace recorded
// up to that point.
class DivergenceError : public TrainingError {
 public:
  DivergenceError(const std::string& what, TrainRun partial)
      : TrainingError(what), partial_(std::move(partial)) {}
  const TrainRun& partial() const { return partial_; }

 private:
  TrainRun partial_;
};

double learning_rate_at(const Hyperparameters& hyper, ScheduleFault fault, std::int64_t step,
                        std::int64_t total_steps);

struct InstanceResult {
  int predicted = 0;
  double loss = 0.0;
  bool operator==(const InstanceResult&) const = default;
};

struct Evaluation {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::vector<InstanceResult> instances;
  bool operator==(const Evaluation&) const = default;
};

// Eval-mode forward in fixed-size chunks. Ties in the argmax go to the
// lowest class index.
Evaluation evaluate(const CnnModel<float>& model, const dataset::LabeledImageSet& test);
Evaluation evaluate_prepared(const CnnModel<float>& model, const Tensor<float>& inputs,
                             std::span<const int> labels);

struct TrainResult {
  CnnModel<float> model;
  TrainRun run;
};

// Seeded minibatch SGD with momentum (v = m v + g; w -= lr v). Weight
// initialization draws from Rng(seed); batch order from a derived stream.
TrainResult train(const ModelConfig& config, const dataset::ImageSplit& split, TrainRun run);

// Writes step,variant_id,test_loss,test_accuracy rows.
std::string trace_to_csv(const std::vector<TracePoint>& trace, const std::string& variant_id);

}  // namespace mtv::cnn

#endif  // MTV_CNN_TRAIN_H_
