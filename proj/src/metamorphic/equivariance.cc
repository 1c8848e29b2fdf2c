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

#include "mtv/cnn/layers.h"
#include "mtv/metamorphic.h"
#include "mtv/rng.h"

namespace mtv::metamorphic {
namespace {

constexpr std::size_t kMaxRecordedFailures = 5;

cnn::Tensor<float> random_tensor(cnn::Shape shape, Rng& rng) {
  cnn::Tensor<float> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

bool worked_example_holds() {
  cnn::ConvLayer<float> layer;
  layer.weights = cnn::Tensor<float>({1, 1, 2, 2}, {1, 0, 2, 3});
  const cnn::Tensor<float> image({1, 1, 3, 3}, {1, 2, 3, 1, 1, 2, 2, 0, 1});
  const auto out = cnn::conv2d_forward(image, layer);
  if (out != cnn::Tensor<float>({1, 1, 2, 2}, {6, 10, 5, 4})) return false;

  cnn::ConvLayer<float> transposed;
  transposed.weights = dihedral_tensor(layer.weights, Dihedral::kTranspose);
  const auto out_t =
      cnn::conv2d_forward(dihedral_tensor(image, Dihedral::kTranspose), transposed);
  return out_t == cnn::Tensor<float>({1, 1, 2, 2}, {6, 5, 10, 4}) &&
         out_t == dihedral_tensor(out, Dihedral::kTranspose);
}

// Non-trivial batch-norm state so transport is checked away from identity.
void perturb_batch_norms(cnn::CnnModel<float>& model, Rng& rng) {
  for (auto& p : model.parameters()) {
    if (p.decays) continue;
    for (auto& v : p.values) v += static_cast<float>(rng.normal(0.0, 0.2));
  }
  for (auto& b : model.buffers()) {
    const bool var = b.name.find("var") != std::string::npos;
    for (auto& v : b.values) {
      v = static_cast<float>(var ? rng.uniform(0.5, 2.0) : rng.normal(0.0, 0.5));
    }
  }
}

}  // namespace

double max_relative_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    diff = std::max(diff, std::isnan(d) ? std::numeric_limits<double>::infinity() : d);
    scale = std::max(scale, std::abs(static_cast<double>(b[i])));
  }
  if (diff == 0.0) return 0.0;
  return scale == 0.0 ? std::numeric_limits<double>::infinity() : diff / scale;
}

EquivarianceReport check_conv_equivariance(int trials, std::uint64_t seed) {
  if (trials < 0) throw ArgumentError("trials must be >= 0");
  EquivarianceReport report;
  report.trials = trials;
  report.seed = seed;
  report.worked_example = worked_example_holds();

  auto record = [&report](std::string what) {
    if (report.failures.size() < kMaxRecordedFailures) report.failures.push_back(std::move(what));
  };

  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    const std::size_t n = 4 + rng.uniform_index(6);
    const std::size_t k = 1 + rng.uniform_index(3);
    cnn::ConvLayer<float> layer;
    layer.padding = static_cast<int>(rng.uniform_index(2));
    layer.weights = random_tensor({1 + rng.uniform_index(4), 3, k, k}, rng);
    const cnn::Tensor<float> image = random_tensor({1, 3, n, n}, rng);
    const cnn::Tensor<float> base = cnn::conv2d_forward(image, layer);

    for (const auto& order : all_channel_orders()) {
      for (Dihedral g : kAllDihedral) {
        if (g == Dihedral::kIdentity) continue;
        cnn::ConvLayer<float> moved = layer;
        moved.weights = dihedral_tensor(permute_channels(layer.weights, order), g);
        const auto out =
            cnn::conv2d_forward(dihedral_tensor(permute_channels(image, order), g), moved);
        const auto expected = dihedral_tensor(base, g);
        const double err = max_relative_error(out.values(), expected.values());
        ++report.conv_checks;
        report.conv_max_error = std::max(report.conv_max_error, err);
        if (!(err <= kConvEquivarianceTolerance)) {
          ++report.conv_failures;
          record("conv trial " + std::to_string(t) + " " + to_string(order) + "/" +
                 to_string(g) + ": relative error " + std::to_string(err));
        }
      }
    }
  }

  // Whole-network transport at fixed random weights.
  const int models = std::max(1, trials / 25);
  for (int m = 0; m < models && trials > 0; ++m) {
    cnn::CnnModel<float> model = cnn::init_model<float>(cnn::Architecture{}, {}, rng);
    perturb_batch_norms(model, rng);
    const auto side = static_cast<std::size_t>(model.arch.image_size);
    const cnn::Tensor<float> x = random_tensor({4, 3, side, side}, rng);
    for (cnn::Mode mode : {cnn::Mode::kEval, cnn::Mode::kTrain}) {
      const auto base = cnn::forward(model, x, mode);
      auto check = [&](const cnn::CnnModel<float>& moved, const cnn::Tensor<float>& input,
                       const std::string& what) {
        const double err = max_relative_error(cnn::forward(moved, input, mode).values(),
                                              base.values());
        ++report.network_checks;
        report.network_max_error = std::max(report.network_max_error, err);
        if (!(err <= kNetworkTransportTolerance)) {
          ++report.network_failures;
          record("network " + std::to_string(m) + " " + what + ": relative error " +
                 std::to_string(err));
        }
      };
      for (Dihedral g : kAllDihedral) {
        if (g != Dihedral::kIdentity) {
          check(transport_model(model, g), dihedral_tensor(x, g), to_string(g));
        }
      }
      for (const auto& order : all_channel_orders()) {
        check(transport_model(model, order), permute_channels(x, order), to_string(order));
      }
    }
  }
  return report;
}

nlohmann::ordered_json equivariance_to_json(const EquivarianceReport& r) {
  nlohmann::ordered_json j;
  j["trials"] = r.trials;
  j["seed"] = r.seed;
  j["passed"] = r.passed();
  j["worked_example"] = r.worked_example;
  j["conv_checks"] = r.conv_checks;
  j["conv_failures"] = r.conv_failures;
  j["conv_max_relative_error"] = number_to_json(r.conv_max_error);
  j["conv_tolerance"] = kConvEquivarianceTolerance;
  j["network_checks"] = r.network_checks;
  j["network_failures"] = r.network_failures;
  j["network_max_relative_error"] = number_to_json(r.network_max_error);
  j["network_tolerance"] = kNetworkTransportTolerance;
  j["failures"] = r.failures;
  return j;
}

}  // namespace mtv::metamorphic
