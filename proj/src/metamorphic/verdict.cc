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

#include <algorithm>
#include <cmath>

#include "mtv/metamorphic.h"

namespace mtv::metamorphic {

std::string MrId::to_string() const { return "MR-" + std::to_string(index); }

std::string MrId::title() const {
  static const char* kSvm[] = {"permute features", "re-order train instances",
                               "shift train & test features", "scale test features"};
  static const char* kCnn[] = {"permute RGB", "permute CONV order", "normalize data",
                               "scale data"};
  if (index < 1 || index > 4) return "unknown";
  return family == Family::kSvm ? kSvm[index - 1] : kCnn[index - 1];
}

MrId mr_from_string(Family family, const std::string& name) {
  std::string digits = name;
  for (const char* prefix : {"MR-", "mr-", "MR", "mr"}) {
    if (digits.rfind(prefix, 0) == 0) {
      digits = digits.substr(std::char_traits<char>::length(prefix));
      break;
    }
  }
  if (digits.size() != 1 || digits[0] < '1' || digits[0] > '4') {
    throw ConfigError("unknown relation '" + name + "'");
  }
  return MrId{family, digits[0] - '0'};
}

bool is_applicable(const MrId& mr, svm::KernelKind kernel) {
  if (mr.family == Family::kCnn) return true;
  if (mr.index == 3) return kernel == svm::KernelKind::kRbf;
  if (mr.index == 4) return kernel == svm::KernelKind::kLinear;
  return true;
}

std::vector<MrId> applicable_mrs(Family family, svm::KernelKind kernel) {
  std::vector<MrId> out;
  for (int i = 1; i <= 4; ++i) {
    MrId mr{family, i};
    if (is_applicable(mr, kernel)) out.push_back(mr);
  }
  return out;
}

std::string to_string(Status status) {
  switch (status) {
    case Status::kPass:
      return "pass";
    case Status::kKilled:
      return "killed";
    case Status::kInconclusive:
      return "inconclusive";
  }
  return "unknown";
}

Status status_from_string(const std::string& name) {
  if (name == "pass") return Status::kPass;
  if (name == "killed") return Status::kKilled;
  if (name == "inconclusive") return Status::kInconclusive;
  throw FormatError("unknown verdict status '" + name + "'");
}

nlohmann::ordered_json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const nlohmann::ordered_json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw FormatError("expected a number, got " + j.dump());
}

nlohmann::ordered_json verdict_to_json(const MrVerdict& v) {
  nlohmann::ordered_json j;
  j["family"] = faults::to_string(v.mr.family);
  j["mr"] = v.mr.to_string();
  j["status"] = to_string(v.status);
  j["evidence_kind"] = v.evidence_kind;
  j["evidence"] = number_to_json(v.evidence);
  j["threshold"] = number_to_json(v.threshold);
  j["class_flips"] = v.class_flips;
  j["triggering"] = v.triggering;
  auto variants = nlohmann::ordered_json::array();
  for (const auto& o : v.variants) {
    variants.push_back({{"id", o.id}, {"value", number_to_json(o.value)}});
  }
  j["variants"] = std::move(variants);
  j["note"] = v.note;
  return j;
}

MrVerdict verdict_from_json(const nlohmann::ordered_json& j) {
  try {
    MrVerdict v;
    const Family family = faults::family_from_string(j.at("family").get<std::string>());
    v.mr = mr_from_string(family, j.at("mr").get<std::string>());
    v.status = status_from_string(j.at("status").get<std::string>());
    v.evidence_kind = j.at("evidence_kind").get<std::string>();
    v.evidence = number_from_json(j.at("evidence"));
    v.threshold = number_from_json(j.at("threshold"));
    v.class_flips = j.at("class_flips").get<std::size_t>();
    v.triggering = j.at("triggering").get<std::vector<std::string>>();
    for (const auto& o : j.at("variants")) {
      v.variants.push_back({o.at("id").get<std::string>(), number_from_json(o.at("value"))});
    }
    v.note = j.at("note").get<std::string>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed verdict: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed verdict: ") + e.what());
  }
}

double population_sigma(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

SigmaMaxReport sigma_max(std::span<const VariantTrace> traces, double threshold) {
  if (traces.empty()) throw ArgumentError("sigma_max needs at least one variant");
  SigmaMaxReport report;
  report.threshold = threshold;
  std::size_t common = traces.front().trace.size();
  for (const auto& t : traces) {
    common = std::min(common, t.trace.size());
    if (t.diverged) report.diverged.push_back(t.id);
  }
  std::vector<double> losses(traces.size());
  for (std::size_t i = 0; i < common; ++i) {
    const std::int64_t step = traces.front().trace[i].step;
    for (std::size_t v = 0; v < traces.size(); ++v) {
      if (traces[v].trace[i].step != step) {
        throw ArgumentError("variant '" + traces[v].id + "' records a different step cadence");
      }
      losses[v] = traces[v].trace[i].test_loss;
    }
    const bool finite = std::all_of(losses.begin(), losses.end(),
                                    [](double x) { return std::isfinite(x); });
    const double s =
        finite ? population_sigma(losses) : std::numeric_limits<double>::infinity();
    report.steps.push_back(step);
    report.sigmas.push_back(s);
    if (report.argmax_step < 0 || s > report.sigma_max) {
      report.sigma_max = s;
      report.argmax_step = step;
    }
  }
  if (!report.diverged.empty()) report.sigma_max = std::numeric_limits<double>::infinity();
  return report;
}

Status sigma_status(double sigma_max, double threshold) {
  return sigma_max > threshold ? Status::kKilled : Status::kPass;
}

}  // namespace mtv::metamorphic
