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

#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <fstream>
#include <sstream>

#include "mtv/harness.h"

namespace mtv::harness {
namespace {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& text) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace

CellCache::CellCache(fs::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) return;
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache " + dir_.string() + ": " + ec.message());
}

std::string CellCache::key(const nlohmann::ordered_json& description) {
  return sha256_hex(description.dump());
}

std::optional<nlohmann::ordered_json> CellCache::get(const std::string& key) const {
  if (!enabled()) return std::nullopt;
  std::ifstream in(dir_ / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream text;
  text << in.rdbuf();
  // A torn or foreign file counts as a miss.
  auto doc = nlohmann::ordered_json::parse(text.str(), nullptr, false);
  if (doc.is_discarded()) return std::nullopt;
  return doc;
}

void CellCache::put(const std::string& key, const nlohmann::ordered_json& value) const {
  if (!enabled()) return;
  static std::atomic<unsigned> counter{0};
  const fs::path final_path = dir_ / (key + ".json");
  const fs::path tmp = dir_ / (key + ".tmp" + std::to_string(counter++));
  write_file(tmp.string(), value.dump());
  std::error_code ec;
  fs::rename(tmp, final_path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot store cache entry " + final_path.string());
  }
}

}  // namespace mtv::harness
