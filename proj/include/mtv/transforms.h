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

// Input transforms used to build follow-up test cases.

#ifndef MTV_TRANSFORMS_H_
#define MTV_TRANSFORMS_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtv/cnn/model.h"
#include "mtv/dataset.h"

namespace mtv::metamorphic {

// ---- Feature vectors ------------------------------------------------------

// out[i] = in[p[i]]. Throws ArgumentError unless p is a bijection on
// 0..cols-1.
dataset::LabeledVectorSet permute_features(const dataset::LabeledVectorSet& set,
                                           std::span<const std::size_t> p);
// p[i] = (i + 1) mod n, so (x1, x2, x3) becomes (x2, x3, x1).
std::vector<std::size_t> cycle_permutation(std::size_t n);
std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> p);
bool is_permutation(std::span<const std::size_t> p);

// Row i of the result is row order[i] of the input.
dataset::LabeledVectorSet shuffle_instances(const dataset::LabeledVectorSet& set,
                                            std::span<const std::size_t> order);
// Seeded permutation without fixed points (n >= 2).
std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed);

dataset::LabeledVectorSet shift_features(const dataset::LabeledVectorSet& set, double k);
dataset::LabeledVectorSet scale_features(const dataset::LabeledVectorSet& set, double k);
std::vector<double> scale_instance(std::span<const double> x, double k);

// ---- Images -----------------------------------------------------------------

// The 8 symmetries of the square grid as R^k T^f with index 2k + f, where T
// is the transpose and R a clockwise quarter turn.
enum class Dihedral : int {
  kIdentity = 0,
  kTranspose = 1,
  kR90 = 2,
  kR90Transpose = 3,
  kR180 = 4,
  kR180Transpose = 5,
  kR270 = 6,
  kR270Transpose = 7,
};

inline constexpr std::array<Dihedral, 8> kAllDihedral = {
    Dihedral::kIdentity, Dihedral::kTranspose,      Dihedral::kR90,  Dihedral::kR90Transpose,
    Dihedral::kR180,     Dihedral::kR180Transpose, Dihedral::kR270, Dihedral::kR270Transpose};

std::string to_string(Dihedral g);
Dihedral dihedral_from_string(const std::string& name);
// (a * b) applies b first.
Dihedral compose(Dihedral a, Dihedral b);
Dihedral inverse(Dihedral g);

// Transforms one n x n plane.
template <typename T>
void dihedral_plane(std::span<const T> in, std::span<T> out, std::size_t n, Dihedral g);

dataset::LabeledImageSet dihedral_transform(const dataset::LabeledImageSet& set, Dihedral g);
// Transforms the two trailing (square) axes of a rank-4 tensor.
template <typename T>
cnn::Tensor<T> dihedral_tensor(const cnn::Tensor<T>& t, Dihedral g);

// Output plane c is input plane order[c].
using ChannelOrder = std::array<int, 3>;
// The 6 orders, identity first.
const std::array<ChannelOrder, 6>& all_channel_orders();
std::string to_string(const ChannelOrder& order);  // "RGB", "BGR", ...
ChannelOrder channel_order_from_string(const std::string& name);
ChannelOrder inverse(const ChannelOrder& order);

dataset::LabeledImageSet permute_channels(const dataset::LabeledImageSet& set,
                                          const ChannelOrder& order);
// Permutes axis 1 of a rank-4 tensor (the first three entries of it).
template <typename T>
cnn::Tensor<T> permute_channels(const cnn::Tensor<T>& t, const ChannelOrder& order);

dataset::LabeledImageSet scale_images(const dataset::LabeledImageSet& set, double k);
// Per-instance standardization of every image, stored in the set.
dataset::LabeledImageSet normalize_images(const dataset::LabeledImageSet& set);

// ---- Model transport --------------------------------------------------------

// Applies g to every convolution kernel. Batch-norm state is per channel
// and carries no spatial axes, so it is left as is.
template <typename T>
cnn::CnnModel<T> transport_model(const cnn::CnnModel<T>& model, Dihedral g);
// Reorders the stem's input-channel axis to match permute_channels.
template <typename T>
cnn::CnnModel<T> transport_model(const cnn::CnnModel<T>& model, const ChannelOrder& order);

// ---- Generic spec -----------------------------------------------------------

struct TransformSpec {
  enum class Kind {
    kFeaturePermutation,
    kInstanceShuffle,
    kFeatureShift,
    kInstanceScale,
    kChannelOrder,
    kDihedral,
    kNormalize,
  };
  Kind kind = Kind::kFeaturePermutation;
  std::vector<std::size_t> permutation;  // feature permutation or row order
  double k = 0.0;
  ChannelOrder order{0, 1, 2};
  Dihedral dihedral = Dihedral::kIdentity;

  std::string label() const;
  bool operator==(const TransformSpec&) const = default;
};

// Throws ArgumentError for kNormalize, which is idempotent rather than
// invertible, and for a zero scale.
TransformSpec inverse(const TransformSpec& spec);
// Throws ArgumentError when the kind does not apply to the set type.
dataset::LabeledVectorSet apply(const TransformSpec& spec, const dataset::LabeledVectorSet& set);
dataset::LabeledImageSet apply(const TransformSpec& spec, const dataset::LabeledImageSet& set);

}  // namespace mtv::metamorphic

#endif  // MTV_TRANSFORMS_H_
