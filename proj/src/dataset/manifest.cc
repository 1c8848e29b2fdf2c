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

#include <filesystem>
#include <nlohmann/json.hpp>

#include "mtv/dataset.h"
#include "mtv/error.h"

namespace mtv::dataset {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string resolve(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

Manifest parse_manifest(std::string_view json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  Manifest m;
  try {
    const std::string format = doc.at("format").get<std::string>();
    if (format == "digits_csv") {
      m.format = Manifest::Format::kDigitsCsv;
    } else if (format == "cifar_binary") {
      m.format = Manifest::Format::kCifarBinary;
    } else {
      throw ConfigError("manifest: unknown format '" + format + "'");
    }
    m.classes = doc.value("classes", kDefaultClasses);
    const json& train = doc.at("train");
    if (train.is_string()) {
      m.train.push_back(resolve(base_dir, train.get<std::string>()));
    } else {
      for (const auto& t : train) m.train.push_back(resolve(base_dir, t.get<std::string>()));
    }
    if (doc.contains("test") && !doc["test"].is_null()) {
      m.test = resolve(base_dir, doc["test"].get<std::string>());
    }
    m.test_fraction = doc.value("test_fraction", 0.25);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (m.train.empty()) throw ConfigError("manifest: no training files");
  if (m.classes < 2) throw ConfigError("manifest: need at least 2 classes");
  return m;
}

Manifest load_manifest(const std::string& path) {
  return parse_manifest(read_file(path), fs::path(path).parent_path().string());
}

std::string manifest_to_json(const Manifest& manifest) {
  json doc;
  doc["format"] = manifest.format == Manifest::Format::kDigitsCsv ? "digits_csv"
                                                                  : "cifar_binary";
  doc["classes"] = manifest.classes;
  doc["train"] = manifest.train;
  if (manifest.test) doc["test"] = *manifest.test;
  doc["test_fraction"] = manifest.test_fraction;
  return doc.dump(2);
}

VectorSplit load_vector_split(const Manifest& manifest, std::uint64_t seed) {
  if (manifest.format != Manifest::Format::kDigitsCsv) {
    throw ConfigError("manifest does not describe a digits corpus");
  }
  LabeledVectorSet train;
  train.cols = kDigitFeatures;
  for (const auto& path : manifest.train) {
    const auto part = load_digits_csv(path, manifest.classes);
    train.features.insert(train.features.end(), part.features.begin(),
                          part.features.end());
    train.labels.insert(train.labels.end(), part.labels.begin(), part.labels.end());
  }
  if (manifest.test) {
    return {std::move(train), load_digits_csv(*manifest.test, manifest.classes)};
  }
  return split_stratified(train, manifest.test_fraction, seed);
}

ImageSplit load_image_split(const Manifest& manifest) {
  if (manifest.format != Manifest::Format::kCifarBinary) {
    throw ConfigError("manifest does not describe an image corpus");
  }
  if (!manifest.test) throw ConfigError("image manifest needs a test file");
  std::vector<LabeledImageSet> shards;
  for (const auto& path : manifest.train) {
    shards.push_back(load_cifar_binary(path, manifest.classes));
  }
  return {concat(shards), load_cifar_binary(*manifest.test, manifest.classes)};
}

}  // namespace mtv::dataset
