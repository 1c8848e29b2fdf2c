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

#include "mtv/error.h"
#include "mtv/svm.h"

namespace mtv::svm {
namespace {

using nlohmann::json;
constexpr const char* kFormat = "mtverify.svm/1";

}  // namespace

std::string model_to_json(const SvmModel& model) {
  json doc;
  doc["format"] = kFormat;
  doc["kernel"] = {{"kind", to_string(model.kernel.kind)}, {"gamma", model.kernel.gamma}};
  doc["config"] = {{"C", model.config.C},
                   {"kkt_tolerance", model.config.kkt_tolerance},
                   {"max_iterations", model.config.max_iterations}};
  doc["dim"] = model.dim;
  doc["classes"] = model.classes;
  json machines = json::array();
  std::size_t m = 0;
  for (std::size_t a = 0; a < model.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < model.classes.size(); ++b, ++m) {
      const BinarySvm& machine = model.machines[m];
      json sv = json::array();
      json coef = json::array();
      json target = json::array();
      for (std::size_t i = 0; i < machine.size(); ++i) {
        if (machine.alphas[i] <= 0.0) continue;
        const auto p = machine.point(i);
        sv.push_back(std::vector<double>(p.begin(), p.end()));
        coef.push_back(machine.alphas[i]);
        target.push_back(machine.targets[i]);
      }
      machines.push_back({{"pair", {model.classes[a], model.classes[b]}},
                          {"bias", machine.bias},
                          {"alphas", coef},
                          {"targets", target},
                          {"support_vectors", sv}});
    }
  }
  doc["machines"] = std::move(machines);
  return doc.dump();
}

SvmModel model_from_json(const std::string& text) {
  SvmModel model;
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kFormat) {
      throw ValidationError("unsupported svm model format '" +
                            doc.at("format").get<std::string>() + "'");
    }
    model.kernel.kind = kernel_kind_from_string(doc.at("kernel").at("kind"));
    model.kernel.gamma = doc.at("kernel").at("gamma");
    model.config.C = doc.at("config").at("C");
    model.config.kkt_tolerance = doc.at("config").at("kkt_tolerance");
    model.config.max_iterations = doc.at("config").at("max_iterations");
    model.dim = doc.at("dim");
    model.classes = doc.at("classes").get<std::vector<int>>();
    for (const auto& jm : doc.at("machines")) {
      BinarySvm machine;
      machine.kernel = model.kernel;
      machine.dim = model.dim;
      machine.C = model.config.C;
      machine.bias = jm.at("bias");
      machine.alphas = jm.at("alphas").get<std::vector<double>>();
      machine.targets = jm.at("targets").get<std::vector<double>>();
      for (const auto& sv : jm.at("support_vectors")) {
        const auto p = sv.get<std::vector<double>>();
        if (p.size() != model.dim) throw ValidationError("support vector dimension");
        machine.points.insert(machine.points.end(), p.begin(), p.end());
      }
      if (machine.alphas.size() != machine.targets.size() ||
          machine.points.size() != machine.alphas.size() * model.dim) {
        throw ValidationError("inconsistent machine record");
      }
      model.machines.push_back(std::move(machine));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("svm model json: ") + e.what());
  }
  const std::size_t k = model.classes.size();
  if (model.machines.size() != k * (k - 1) / 2) {
    throw ValidationError("svm model json: expected k(k-1)/2 machines");
  }
  return model;
}

}  // namespace mtv::svm
