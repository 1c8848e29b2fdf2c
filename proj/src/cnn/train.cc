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

#include "mtv/cnn/train.h"

#include <charconv>
#include <cmath>
#include <sstream>

#include "mtv/rng.h"

namespace mtv::cnn {
namespace {

constexpr std::size_t kEvalChunk = 128;

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void Hyperparameters::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("learning_rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight_decay must be >= 0");
  if (batch_size == 0) throw ArgumentError("batch_size must be positive");
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (eval_every < 1) throw ArgumentError("eval_every must be >= 1");
  if (!(decay_factor > 0.0)) throw ArgumentError("decay_factor must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    throw ArgumentError("bn_momentum must be in [0, 1]");
  }
  for (double b : decay_boundaries) {
    if (!(b >= 0.0 && b <= 1.0)) throw ArgumentError("decay boundaries must be in [0, 1]");
  }
}

std::string to_string(ScheduleFault fault) {
  switch (fault) {
    case ScheduleFault::kNone: return "none";
    case ScheduleFault::kInvertedFactor: return "inverted_factor";
    case ScheduleFault::kImmediate: return "immediate";
    case ScheduleFault::kReversed: return "reversed";
  }
  return "none";
}

ScheduleFault schedule_fault_from_string(const std::string& name) {
  for (ScheduleFault f : {ScheduleFault::kNone, ScheduleFault::kInvertedFactor,
                          ScheduleFault::kImmediate, ScheduleFault::kReversed}) {
    if (to_string(f) == name) return f;
  }
  throw ArgumentError("unknown schedule fault '" + name + "'");
}

double learning_rate_at(const Hyperparameters& hyper, ScheduleFault fault, std::int64_t step,
                        std::int64_t total_steps) {
  const double factor =
      fault == ScheduleFault::kInvertedFactor ? 1.0 / hyper.decay_factor : hyper.decay_factor;
  double lr = hyper.learning_rate;
  for (double b : hyper.decay_boundaries) {
    if (fault == ScheduleFault::kReversed) b = 1.0 - b;
    if (fault == ScheduleFault::kImmediate) b = 0.0;
    if (static_cast<double>(step) >= b * static_cast<double>(total_steps)) lr *= factor;
  }
  return lr;
}

Evaluation evaluate_prepared(const CnnModel<float>& model, const Tensor<float>& inputs,
                             std::span<const int> labels) {
  if (labels.empty()) throw ArgumentError("evaluate: empty test set");
  if (inputs.rank() != 4 || inputs.dim(0) != labels.size()) {
    throw ArgumentError("evaluate: inputs do not match labels");
  }
  Evaluation ev;
  ev.instances.reserve(labels.size());
  std::size_t correct = 0;
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < labels.size(); start += kEvalChunk) {
    const std::size_t end = std::min(labels.size(), start + kEvalChunk);
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const Tensor<float> logits = forward(model, gather(inputs, idx), Mode::kEval);
    const auto chunk_labels = labels.subspan(start, end - start);
    const std::vector<double> losses =
        softmax_cross_entropy<float>(logits, chunk_labels, 1.0, nullptr);
    const std::size_t k = logits.dim(1);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const float* z = logits.data() + r * k;
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (z[j] > z[best]) best = j;
      }
      InstanceResult inst{static_cast<int>(best), losses[r]};
      if (inst.predicted == chunk_labels[r]) ++correct;
      loss_sum += inst.loss;
      ev.instances.push_back(inst);
    }
  }
  const double n = static_cast<double>(labels.size());
  ev.accuracy = static_cast<double>(correct) / n;
  ev.mean_loss = loss_sum / n;
  return ev;
}

Evaluation evaluate(const CnnModel<float>& model, const dataset::LabeledImageSet& test) {
  if (test.size() == 0) throw ArgumentError("evaluate: empty test set");
  return evaluate_prepared(model, prepare_inputs(model, test), test.labels);
}

TrainResult train(const ModelConfig& config, const dataset::ImageSplit& split, TrainRun run) {
  run.hyper.validate();
  config.arch.validate();
  dataset::validate(split, config.arch.num_classes);
  const Hyperparameters& hp = run.hyper;

  Rng init_rng(run.seed);
  CnnModel<float> model = init_model<float>(config.arch, config.pipeline, init_rng);
  model.eval_uses_batch_stats = config.eval_uses_batch_stats;
  Rng order_rng(derive_seed(run.seed, 1));

  const Tensor<float> train_inputs = prepare_inputs(model, split.train);
  const Tensor<float> test_inputs = prepare_inputs(model, split.test);
  const std::size_t n = split.train.size();
  const auto steps_per_epoch = static_cast<std::int64_t>((n + hp.batch_size - 1) / hp.batch_size);
  const std::int64_t total = steps_per_epoch * hp.epochs;
  run.total_steps = total;
  run.trace.clear();
  run.diverged = false;

  auto diverge = [&](const std::string& why, std::int64_t step) {
    run.diverged = true;
    throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + why, run);
  };
  auto record = [&](std::int64_t step) {
    const Evaluation ev = evaluate_prepared(model, test_inputs, split.test.labels);
    if (!std::isfinite(ev.mean_loss) || ev.mean_loss > hp.divergence_loss) {
      diverge("test loss " + shortest(ev.mean_loss), step);
    }
    run.trace.push_back({step, ev.mean_loss, ev.accuracy});
  };

  CnnModel<float> velocity = zeros_like(model);
  auto params = model.parameters();
  auto vel = velocity.parameters();
  const bool batch_stats = !config.faults.running_stats_in_training;
  const auto m = static_cast<float>(hp.momentum);

  record(0);
  std::int64_t step = 0;
  std::vector<std::size_t> idx;
  std::vector<int> labels;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    const std::vector<std::size_t> perm = order_rng.permutation(n);
    for (std::size_t start = 0; start < n; start += hp.batch_size) {
      const std::size_t end = std::min(n, start + hp.batch_size);
      idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                 perm.begin() + static_cast<std::ptrdiff_t>(end));
      labels.clear();
      for (std::size_t i : idx) labels.push_back(split.train.labels[i]);

      LossResult<float> res;
      try {
        res = loss_and_grad(model, gather(train_inputs, idx), labels, hp.weight_decay,
                            config.faults.loss, batch_stats);
      } catch (const NumericalError& e) {
        diverge(e.what(), step);
      }
      if (!(res.cross_entropy <= hp.divergence_loss)) {
        diverge("training cross-entropy " + shortest(res.cross_entropy), step);
      }

      const auto lr = static_cast<float>(
          learning_rate_at(hp, config.faults.schedule, step, total));
      auto grads = res.grads.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].values;
        auto v = vel[p].values;
        const auto g = grads[p].values;
        for (std::size_t j = 0; j < w.size(); ++j) {
          v[j] = m * v[j] + g[j];
          w[j] -= lr * v[j];
        }
      }
      update_running_stats(model, res.cache, hp.bn_momentum);
      ++step;
      if (step % hp.eval_every == 0 || step == total) record(step);
    }
  }
  return {std::move(model), std::move(run)};
}

std::string trace_to_csv(const std::vector<TracePoint>& trace, const std::string& variant_id) {
  std::ostringstream out;
  out << "step,variant_id,test_loss,test_accuracy\n";
  for (const auto& p : trace) {
    out << p.step << ',' << variant_id << ',' << shortest(p.test_loss) << ','
        << shortest(p.test_accuracy) << '\n';
  }
  return out.str();
}

}  // namespace mtv::cnn
