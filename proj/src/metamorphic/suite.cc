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

#include "mtv/metamorphic.h"

namespace mtv::metamorphic {

nlohmann::ordered_json suite_to_json(const SuiteConfig& s) {
  nlohmann::ordered_json j;
  j["exact_threshold"] = s.exact_threshold;
  j["shift_k"] = s.shift_k;
  j["scale_pair"] = {s.scale_a, s.scale_b};
  j["shuffle_seed"] = s.shuffle_seed;
  j["scale_ks"] = s.scale_ks;
  j["test_only_threshold"] = s.test_only_threshold;
  j["sigma_threshold"] = {{"MR-1", number_to_json(s.sigma_threshold_mr1)},
                          {"MR-2", number_to_json(s.sigma_threshold_mr2)}};
  return j;
}

SuiteConfig suite_from_json(const nlohmann::ordered_json& j) {
  SuiteConfig s;
  if (!j.is_object()) throw ConfigError("suite description must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "exact_threshold") {
        s.exact_threshold = value.get<double>();
      } else if (key == "shift_k") {
        s.shift_k = value.get<double>();
      } else if (key == "scale_pair") {
        const auto pair = value.get<std::vector<double>>();
        if (pair.size() != 2) throw ConfigError("scale_pair needs two factors");
        s.scale_a = pair[0];
        s.scale_b = pair[1];
      } else if (key == "shuffle_seed") {
        s.shuffle_seed = value.get<std::uint64_t>();
      } else if (key == "scale_ks") {
        s.scale_ks = value.get<std::vector<double>>();
      } else if (key == "test_only_threshold") {
        s.test_only_threshold = value.get<double>();
      } else if (key == "sigma_threshold") {
        if (value.contains("MR-1")) s.sigma_threshold_mr1 = number_from_json(value.at("MR-1"));
        if (value.contains("MR-2")) s.sigma_threshold_mr2 = number_from_json(value.at("MR-2"));
      } else {
        throw ConfigError("unknown suite key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed suite description: ") + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  if (!(s.exact_threshold > 0.0) || !(s.test_only_threshold > 0.0)) {
    throw ConfigError("thresholds must be positive");
  }
  if (s.scale_a == 1.0 || s.scale_a == s.scale_b) {
    throw ConfigError("scale_pair must hold two distinct factors other than 1");
  }
  for (double k : s.scale_ks) {
    if (!(k > 0.0)) throw ConfigError("scale_ks must be positive");
  }
  return s;
}

}  // namespace mtv::metamorphic
