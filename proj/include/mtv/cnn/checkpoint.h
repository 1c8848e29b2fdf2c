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

#ifndef MTV_CNN_CHECKPOINT_H_
#define MTV_CNN_CHECKPOINT_H_

#include <string>

#include <nlohmann/json.hpp>

#include "mtv/cnn/model.h"
#include "mtv/cnn/train.h"

namespace mtv::cnn {

// Versioned JSON container: architecture, input pipeline, every parameter
// and running statistic by name. Floats round-trip exactly.
std::string checkpoint_to_json(const CnnModel<float>& model);
CnnModel<float> checkpoint_from_json(const std::string& text);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Hyperparameters& hyper);
Hyperparameters hyperparameters_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainRun& run);
TrainRun train_run_from_json(const nlohmann::json& j);

}  // namespace mtv::cnn

#endif  // MTV_CNN_CHECKPOINT_H_
