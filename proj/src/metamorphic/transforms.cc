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

#include "mtv/transforms.h"

#include <algorithm>
#include <cstdio>

#include "mtv/cnn/layers.h"
#include "mtv/error.h"
#include "mtv/rng.h"

namespace mtv::metamorphic {
namespace {

constexpr const char* kDihedralNames[8] = {"identity", "T",    "R90",  "R90T",
                                           "R180",     "R180T", "R270", "R270T"};

int rotations(Dihedral g) { return static_cast<int>(g) / 2; }
bool flips(Dihedral g) { return static_cast<int>(g) % 2 == 1; }
Dihedral make(int k, bool f) { return static_cast<Dihedral>(((k % 4 + 4) % 4) * 2 + (f ? 1 : 0)); }

void require_square(std::size_t h, std::size_t w) {
  if (h != w) {
    throw ArgumentError("dihedral transforms need square planes, got " + std::to_string(h) +
                        "x" + std::to_string(w));
  }
}

void require_order(const ChannelOrder& order) {
  std::array<bool, 3> seen{};
  for (int c : order) {
    if (c < 0 || c > 2 || seen[static_cast<std::size_t>(c)]) {
      throw ArgumentError("channel order must be a permutation of {0, 1, 2}");
    }
    seen[static_cast<std::size_t>(c)] = true;
  }
}

}  // namespace

// ---- Feature vectors ------------------------------------------------------

bool is_permutation(std::span<const std::size_t> p) {
  std::vector<bool> seen(p.size(), false);
  for (std::size_t v : p) {
    if (v >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

std::vector<std::size_t> cycle_permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = (i + 1) % n;
  return p;
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> p) {
  if (!is_permutation(p)) throw ArgumentError("not a permutation");
  std::vector<std::size_t> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
  return inv;
}

dataset::LabeledVectorSet permute_features(const dataset::LabeledVectorSet& set,
                                           std::span<const std::size_t> p) {
  if (p.size() != set.cols || !is_permutation(p)) {
    throw ArgumentError("feature permutation must be a bijection on " +
                        std::to_string(set.cols) + " indices");
  }
  dataset::LabeledVectorSet out = set;
  for (std::size_t r = 0; r < set.size(); ++r) {
    auto src = set.row(r);
    auto dst = out.row(r);
    for (std::size_t i = 0; i < set.cols; ++i) dst[i] = src[p[i]];
  }
  return out;
}

dataset::LabeledVectorSet shuffle_instances(const dataset::LabeledVectorSet& set,
                                            std::span<const std::size_t> order) {
  if (order.size() != set.size() || !is_permutation(order)) {
    throw ArgumentError("instance order must be a bijection on " + std::to_string(set.size()) +
                        " rows");
  }
  return dataset::select(set, order);
}

std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("a derangement needs at least 2 elements");
  Rng rng(seed);
  std::vector<std::size_t> p = rng.permutation(n);
  // Swapping a fixed point with its successor leaves neither fixed.
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] == i) std::swap(p[i], p[(i + 1) % n]);
  }
  return p;
}

dataset::LabeledVectorSet shift_features(const dataset::LabeledVectorSet& set, double k) {
  dataset::LabeledVectorSet out = set;
  for (double& v : out.features) v += k;
  return out;
}

dataset::LabeledVectorSet scale_features(const dataset::LabeledVectorSet& set, double k) {
  dataset::LabeledVectorSet out = set;
  for (double& v : out.features) v *= k;
  return out;
}

std::vector<double> scale_instance(std::span<const double> x, double k) {
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v *= k;
  return out;
}

// ---- Dihedral group ---------------------------------------------------------

std::string to_string(Dihedral g) { return kDihedralNames[static_cast<int>(g)]; }

Dihedral dihedral_from_string(const std::string& name) {
  for (Dihedral g : kAllDihedral) {
    if (to_string(g) == name) return g;
  }
  throw ArgumentError("unknown dihedral transform '" + name + "'");
}

// T R T = R^-1, so R^a T^f R^b T^g = R^(a + (f ? -b : b)) T^(f xor g).
Dihedral compose(Dihedral a, Dihedral b) {
  const int kb = flips(a) ? -rotations(b) : rotations(b);
  return make(rotations(a) + kb, flips(a) != flips(b));
}

Dihedral inverse(Dihedral g) { return make(flips(g) ? rotations(g) : -rotations(g), flips(g)); }

template <typename T>
void dihedral_plane(std::span<const T> in, std::span<T> out, std::size_t n, Dihedral g) {
  if (in.size() != n * n || out.size() != n * n) {
    throw ArgumentError("plane size does not match " + std::to_string(n) + "x" +
                        std::to_string(n));
  }
  const int k = rotations(g);
  const bool f = flips(g);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      // Source of output (r, c): undo the quarter turns, then the transpose.
      std::size_t sr = r, sc = c;
      for (int i = 0; i < k; ++i) {
        const std::size_t t = sr;
        sr = n - 1 - sc;
        sc = t;
      }
      if (f) std::swap(sr, sc);
      out[r * n + c] = in[sr * n + sc];
    }
  }
}

dataset::LabeledImageSet dihedral_transform(const dataset::LabeledImageSet& set, Dihedral g) {
  require_square(set.height, set.width);
  dataset::LabeledImageSet out = set;
  const std::size_t plane = set.plane_size();
  for (std::size_t p = 0; p < set.size() * set.channels; ++p) {
    dihedral_plane<float>(std::span<const float>(set.pixels).subspan(p * plane, plane),
                          std::span<float>(out.pixels).subspan(p * plane, plane), set.height, g);
  }
  return out;
}

template <typename T>
cnn::Tensor<T> dihedral_tensor(const cnn::Tensor<T>& t, Dihedral g) {
  if (t.rank() != 4) throw ArgumentError("dihedral_tensor expects rank 4");
  require_square(t.dim(2), t.dim(3));
  cnn::Tensor<T> out(t.shape());
  const std::size_t n = t.dim(2);
  const std::size_t plane = n * n;
  for (std::size_t p = 0; p < t.dim(0) * t.dim(1); ++p) {
    dihedral_plane<T>(std::span<const T>(t.data() + p * plane, plane),
                      std::span<T>(out.data() + p * plane, plane), n, g);
  }
  return out;
}

// ---- Channel orders ---------------------------------------------------------

const std::array<ChannelOrder, 6>& all_channel_orders() {
  static const std::array<ChannelOrder, 6> orders = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  return orders;
}

std::string to_string(const ChannelOrder& order) {
  std::string s;
  for (int c : order) s += "RGB"[c];
  return s;
}

ChannelOrder channel_order_from_string(const std::string& name) {
  for (const auto& order : all_channel_orders()) {
    if (to_string(order) == name) return order;
  }
  throw ArgumentError("unknown channel order '" + name + "'");
}

ChannelOrder inverse(const ChannelOrder& order) {
  require_order(order);
  ChannelOrder inv{};
  for (int c = 0; c < 3; ++c) inv[static_cast<std::size_t>(order[c])] = c;
  return inv;
}

dataset::LabeledImageSet permute_channels(const dataset::LabeledImageSet& set,
                                          const ChannelOrder& order) {
  require_order(order);
  if (set.channels != 3) throw ArgumentError("channel permutation needs 3 channels");
  dataset::LabeledImageSet out = set;
  const std::size_t plane = set.plane_size();
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto src = set.channel_plane(i, static_cast<std::size_t>(order[c]));
      std::copy(src.begin(), src.end(), out.image(i).begin() + static_cast<long>(c * plane));
    }
  }
  return out;
}

template <typename T>
cnn::Tensor<T> permute_channels(const cnn::Tensor<T>& t, const ChannelOrder& order) {
  require_order(order);
  if (t.rank() != 4 || t.dim(1) < 3) {
    throw ArgumentError("channel permutation needs a rank-4 tensor with >= 3 channels");
  }
  cnn::Tensor<T> out = t;
  const std::size_t inner = t.dim(2) * t.dim(3);
  const std::size_t channels = t.dim(1);
  for (std::size_t n = 0; n < t.dim(0); ++n) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t src = static_cast<std::size_t>(order[c]);
      std::copy_n(t.data() + (n * channels + src) * inner, inner,
                  out.data() + (n * channels + c) * inner);
    }
  }
  return out;
}

dataset::LabeledImageSet scale_images(const dataset::LabeledImageSet& set, double k) {
  dataset::LabeledImageSet out = set;
  for (float& v : out.pixels) v = static_cast<float>(static_cast<double>(v) * k);
  return out;
}

dataset::LabeledImageSet normalize_images(const dataset::LabeledImageSet& set) {
  dataset::LabeledImageSet out = set;
  for (std::size_t i = 0; i < set.size(); ++i) {
    cnn::normalize_instance<float>(set.image(i), out.image(i));
  }
  return out;
}

// ---- Model transport --------------------------------------------------------

template <typename T>
cnn::CnnModel<T> transport_model(const cnn::CnnModel<T>& model, Dihedral g) {
  cnn::CnnModel<T> out = model;
  out.stem.weights = dihedral_tensor(model.stem.weights, g);
  for (auto& block : out.blocks) {
    block.conv1.weights = dihedral_tensor(block.conv1.weights, g);
    block.conv2.weights = dihedral_tensor(block.conv2.weights, g);
  }
  return out;
}

template <typename T>
cnn::CnnModel<T> transport_model(const cnn::CnnModel<T>& model, const ChannelOrder& order) {
  cnn::CnnModel<T> out = model;
  out.stem.weights = permute_channels(model.stem.weights, order);
  return out;
}

// ---- Generic spec -----------------------------------------------------------

std::string TransformSpec::label() const {
  char buf[64];
  switch (kind) {
    case Kind::kFeaturePermutation:
      return "permute_features";
    case Kind::kInstanceShuffle:
      return "shuffle_instances";
    case Kind::kFeatureShift:
      std::snprintf(buf, sizeof buf, "shift(%g)", k);
      return buf;
    case Kind::kInstanceScale:
      std::snprintf(buf, sizeof buf, "scale(%g)", k);
      return buf;
    case Kind::kChannelOrder:
      return to_string(order);
    case Kind::kDihedral:
      return to_string(dihedral);
    case Kind::kNormalize:
      return "normalize";
  }
  return "unknown";
}

TransformSpec inverse(const TransformSpec& spec) {
  TransformSpec out = spec;
  switch (spec.kind) {
    case TransformSpec::Kind::kFeaturePermutation:
    case TransformSpec::Kind::kInstanceShuffle:
      out.permutation = inverse_permutation(spec.permutation);
      break;
    case TransformSpec::Kind::kFeatureShift:
      out.k = -spec.k;
      break;
    case TransformSpec::Kind::kInstanceScale:
      if (spec.k == 0.0) throw ArgumentError("scale by 0 has no inverse");
      out.k = 1.0 / spec.k;
      break;
    case TransformSpec::Kind::kChannelOrder:
      out.order = inverse(spec.order);
      break;
    case TransformSpec::Kind::kDihedral:
      out.dihedral = inverse(spec.dihedral);
      break;
    case TransformSpec::Kind::kNormalize:
      throw ArgumentError("normalization is idempotent, not invertible");
  }
  return out;
}

dataset::LabeledVectorSet apply(const TransformSpec& spec, const dataset::LabeledVectorSet& set) {
  switch (spec.kind) {
    case TransformSpec::Kind::kFeaturePermutation:
      return permute_features(set, spec.permutation);
    case TransformSpec::Kind::kInstanceShuffle:
      return shuffle_instances(set, spec.permutation);
    case TransformSpec::Kind::kFeatureShift:
      return shift_features(set, spec.k);
    case TransformSpec::Kind::kInstanceScale:
      return scale_features(set, spec.k);
    default:
      throw ArgumentError(spec.label() + " does not apply to feature vectors");
  }
}

dataset::LabeledImageSet apply(const TransformSpec& spec, const dataset::LabeledImageSet& set) {
  switch (spec.kind) {
    case TransformSpec::Kind::kChannelOrder:
      return permute_channels(set, spec.order);
    case TransformSpec::Kind::kDihedral:
      return dihedral_transform(set, spec.dihedral);
    case TransformSpec::Kind::kInstanceScale:
      return scale_images(set, spec.k);
    case TransformSpec::Kind::kNormalize:
      return normalize_images(set);
    default:
      throw ArgumentError(spec.label() + " does not apply to images");
  }
}

#define MTV_INSTANTIATE_TRANSFORMS(T)                                                        \
  template void dihedral_plane<T>(std::span<const T>, std::span<T>, std::size_t, Dihedral); \
  template cnn::Tensor<T> dihedral_tensor<T>(const cnn::Tensor<T>&, Dihedral);              \
  template cnn::Tensor<T> permute_channels<T>(const cnn::Tensor<T>&, const ChannelOrder&);  \
  template cnn::CnnModel<T> transport_model<T>(const cnn::CnnModel<T>&, Dihedral);          \
  template cnn::CnnModel<T> transport_model<T>(const cnn::CnnModel<T>&, const ChannelOrder&);

MTV_INSTANTIATE_TRANSFORMS(float)
MTV_INSTANTIATE_TRANSFORMS(double)

}  // namespace mtv::metamorphic
