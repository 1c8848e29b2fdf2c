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

#include "mtv/cnn/checkpoint.h"

#include <algorithm>

namespace mtv::cnn {
namespace {

using nlohmann::json;
constexpr const char* kFormat = "mtverify.cnn/1";

json pipeline_json(const InputPipeline& p) {
  json j = {{"zero_channels", p.zero_channels}};
  j["stats_pad_value"] = p.stats_pad_value ? json(*p.stats_pad_value) : json(nullptr);
  return j;
}

InputPipeline pipeline_from(const json& j) {
  InputPipeline p;
  p.zero_channels = j.value("zero_channels", 0);
  if (j.contains("stats_pad_value") && !j.at("stats_pad_value").is_null()) {
    p.stats_pad_value = j.at("stats_pad_value").get<float>();
  }
  return p;
}

template <typename Refs>
json arrays_json(const Refs& refs) {
  json out = json::object();
  for (const auto& r : refs) out[r.name] = std::vector<float>(r.values.begin(), r.values.end());
  return out;
}

template <typename Refs>
void load_arrays(const json& j, Refs refs) {
  for (auto& r : refs) {
    const auto v = j.at(r.name).template get<std::vector<float>>();
    if (v.size() != r.values.size()) {
      throw ValidationError("checkpoint: '" + r.name + "' has " + std::to_string(v.size()) +
                            " values, expected " + std::to_string(r.values.size()));
    }
    std::copy(v.begin(), v.end(), r.values.begin());
  }
}

}  // namespace

json to_json(const Architecture& a) {
  return {{"input_channels", a.input_channels}, {"image_size", a.image_size},
          {"base_width", a.base_width},         {"stages", a.stages},
          {"blocks_per_stage", a.blocks_per_stage}, {"num_classes", a.num_classes},
          {"kernel_size", a.kernel_size},       {"skip_connections", a.skip_connections}};
}

Architecture architecture_from_json(const json& j) {
  Architecture a;
  a.input_channels = j.value("input_channels", a.input_channels);
  a.image_size = j.value("image_size", a.image_size);
  a.base_width = j.value("base_width", a.base_width);
  a.stages = j.value("stages", a.stages);
  a.blocks_per_stage = j.value("blocks_per_stage", a.blocks_per_stage);
  a.num_classes = j.value("num_classes", a.num_classes);
  a.kernel_size = j.value("kernel_size", a.kernel_size);
  a.skip_connections = j.value("skip_connections", a.skip_connections);
  a.validate();
  return a;
}

json to_json(const Hyperparameters& h) {
  return {{"learning_rate", h.learning_rate}, {"momentum", h.momentum},
          {"weight_decay", h.weight_decay},   {"batch_size", h.batch_size},
          {"epochs", h.epochs},               {"decay_boundaries", h.decay_boundaries},
          {"decay_factor", h.decay_factor},   {"eval_every", h.eval_every},
          {"bn_momentum", h.bn_momentum},     {"divergence_loss", h.divergence_loss}};
}

Hyperparameters hyperparameters_from_json(const json& j) {
  Hyperparameters h;
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.momentum = j.value("momentum", h.momentum);
  h.weight_decay = j.value("weight_decay", h.weight_decay);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.epochs = j.value("epochs", h.epochs);
  h.decay_boundaries = j.value("decay_boundaries", h.decay_boundaries);
  h.decay_factor = j.value("decay_factor", h.decay_factor);
  h.eval_every = j.value("eval_every", h.eval_every);
  h.bn_momentum = j.value("bn_momentum", h.bn_momentum);
  h.divergence_loss = j.value("divergence_loss", h.divergence_loss);
  h.validate();
  return h;
}

json to_json(const ModelConfig& c) {
  return {{"arch", to_json(c.arch)},
          {"pipeline", pipeline_json(c.pipeline)},
          {"eval_uses_batch_stats", c.eval_uses_batch_stats},
          {"faults",
           {{"loss", to_string(c.faults.loss)},
            {"schedule", to_string(c.faults.schedule)},
            {"running_stats_in_training", c.faults.running_stats_in_training}}}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  if (j.contains("arch")) c.arch = architecture_from_json(j.at("arch"));
  if (j.contains("pipeline")) c.pipeline = pipeline_from(j.at("pipeline"));
  c.eval_uses_batch_stats = j.value("eval_uses_batch_stats", false);
  if (j.contains("faults")) {
    const json& f = j.at("faults");
    c.faults.loss = loss_form_from_string(f.value("loss", "standard"));
    c.faults.schedule = schedule_fault_from_string(f.value("schedule", "none"));
    c.faults.running_stats_in_training = f.value("running_stats_in_training", false);
  }
  return c;
}

json to_json(const TrainRun& run) {
  json trace = json::array();
  for (const auto& p : run.trace) trace.push_back({p.step, p.test_loss, p.test_accuracy});
  return {{"seed", run.seed},
          {"hyper", to_json(run.hyper)},
          {"diverged", run.diverged},
          {"total_steps", run.total_steps},
          {"trace", trace}};
}

TrainRun train_run_from_json(const json& j) {
  TrainRun run;
  run.seed = j.at("seed").get<std::uint64_t>();
  run.hyper = hyperparameters_from_json(j.at("hyper"));
  run.diverged = j.value("diverged", false);
  run.total_steps = j.value("total_steps", std::int64_t{0});
  for (const auto& p : j.at("trace")) {
    run.trace.push_back({p.at(0).get<std::int64_t>(), p.at(1).get<double>(),
                         p.at(2).get<double>()});
  }
  return run;
}

std::string checkpoint_to_json(const CnnModel<float>& model) {
  json doc;
  doc["format"] = kFormat;
  doc["arch"] = to_json(model.arch);
  doc["pipeline"] = pipeline_json(model.pipeline);
  doc["eval_uses_batch_stats"] = model.eval_uses_batch_stats;
  doc["parameters"] = arrays_json(model.parameters());
  doc["buffers"] = arrays_json(model.buffers());
  return doc.dump();
}

CnnModel<float> checkpoint_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kFormat) {
      throw ValidationError("unsupported checkpoint format '" +
                            doc.at("format").get<std::string>() + "'");
    }
    Rng unused(0);
    CnnModel<float> model = zeros_like(init_model<float>(
        architecture_from_json(doc.at("arch")), pipeline_from(doc.at("pipeline")), unused));
    model.eval_uses_batch_stats = doc.value("eval_uses_batch_stats", false);
    load_arrays(doc.at("parameters"), model.parameters());
    load_arrays(doc.at("buffers"), model.buffers());
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint json: ") + e.what());
  }
}

}  // namespace mtv::cnn
