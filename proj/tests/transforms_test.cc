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

#include <cmath>
#include <set>

#include "gtest/gtest.h"
#include "mtv/rng.h"
#include "mtv/svm.h"

namespace mtv::metamorphic {
namespace {

dataset::LabeledVectorSet make_vectors(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  dataset::LabeledVectorSet set;
  set.cols = cols;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    set.features.push_back(static_cast<double>(rng.uniform_index(17)));
  }
  for (std::size_t i = 0; i < rows; ++i) set.labels.push_back(static_cast<int>(i % 10));
  return set;
}

dataset::LabeledImageSet make_images(std::size_t n, std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  dataset::LabeledImageSet set;
  set.height = set.width = side;
  for (std::size_t i = 0; i < n * 3 * side * side; ++i) {
    set.pixels.push_back(static_cast<float>(rng.uniform_index(256)));
  }
  for (std::size_t i = 0; i < n; ++i) set.labels.push_back(static_cast<int>(i % 10));
  return set;
}

// Reference action of R^k T^f on an n x n plane, built from explicit
// transpose and clockwise rotation steps.
std::vector<float> reference_dihedral(const std::vector<float>& in, std::size_t n, Dihedral g) {
  auto transpose = [n](const std::vector<float>& p) {
    std::vector<float> out(p.size());
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) out[r * n + c] = p[c * n + r];
    return out;
  };
  auto rotate = [n](const std::vector<float>& p) {
    std::vector<float> out(p.size());
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) out[r * n + c] = p[(n - 1 - c) * n + r];
    return out;
  };
  std::vector<float> out = in;
  const int idx = static_cast<int>(g);
  if (idx % 2 == 1) out = transpose(out);
  for (int i = 0; i < idx / 2; ++i) out = rotate(out);
  return out;
}

std::vector<float> apply_plane(const std::vector<float>& in, std::size_t n, Dihedral g) {
  std::vector<float> out(in.size());
  dihedral_plane<float>(in, out, n, g);
  return out;
}

TEST(PermuteFeaturesTest, IdentityLeavesSetUnchanged) {
  const auto set = make_vectors(4, 5, 1);
  const std::vector<std::size_t> id{0, 1, 2, 3, 4};
  EXPECT_EQ(permute_features(set, id), set);
}

TEST(PermuteFeaturesTest, CycleMovesFirstFeatureToTheEnd) {
  dataset::LabeledVectorSet set;
  set.cols = 3;
  set.features = {1, 2, 3};
  set.labels = {0};
  const auto out = permute_features(set, cycle_permutation(3));
  EXPECT_EQ(out.features, (std::vector<double>{2, 3, 1}));
}

TEST(PermuteFeaturesTest, DefaultCycleHasNoFixedPoint) {
  const auto p = cycle_permutation(64);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NE(p[i], i);
  EXPECT_TRUE(is_permutation(p));
}

TEST(PermuteFeaturesTest, RejectsNonBijection) {
  const auto set = make_vectors(2, 3, 1);
  const std::vector<std::size_t> dup{0, 0, 1};
  const std::vector<std::size_t> short_p{0, 1};
  EXPECT_THROW(permute_features(set, dup), ArgumentError);
  EXPECT_THROW(permute_features(set, short_p), ArgumentError);
}

TEST(ShuffleTest, ReverseOrderOfThreeRows) {
  dataset::LabeledVectorSet set;
  set.cols = 1;
  set.features = {10, 20, 30};
  set.labels = {1, 2, 3};
  const std::vector<std::size_t> rev{2, 1, 0};
  const auto out = shuffle_instances(set, rev);
  EXPECT_EQ(out.features, (std::vector<double>{30, 20, 10}));
  EXPECT_EQ(out.labels, (std::vector<int>{3, 2, 1}));
  const std::vector<std::size_t> id{0, 1, 2};
  EXPECT_EQ(shuffle_instances(set, id), set);
  const std::vector<std::size_t> bad{0, 0, 1};
  EXPECT_THROW(shuffle_instances(set, bad), ArgumentError);
}

TEST(ShuffleTest, DerangementMovesEveryRow) {
  for (std::size_t n : {2u, 3u, 7u, 200u}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto p = derangement(n, seed);
      ASSERT_TRUE(is_permutation(p));
      for (std::size_t i = 0; i < n; ++i) EXPECT_NE(p[i], i);
    }
  }
  EXPECT_EQ(derangement(50, 3), derangement(50, 3));
  EXPECT_THROW(derangement(1, 0), ArgumentError);
}

TEST(ShiftTest, AddsConstantToEveryFeature) {
  dataset::LabeledVectorSet set;
  set.cols = 2;
  set.features = {1, 2};
  set.labels = {0};
  EXPECT_EQ(shift_features(set, 0.0), set);
  EXPECT_EQ(shift_features(set, 5.0).features, (std::vector<double>{6, 7}));
}

TEST(ShiftTest, RbfKernelIsTranslationInvariant) {
  const auto set = make_vectors(6, 8, 2);
  const auto spec = svm::KernelSpec::rbf(0.01);
  for (double k : {3.0, -4.0, 11.0}) {
    const auto shifted = shift_features(set, k);
    for (std::size_t a = 0; a < set.size(); ++a) {
      for (std::size_t b = 0; b < set.size(); ++b) {
        EXPECT_EQ(svm::kernel_eval(spec, shifted.row(a), shifted.row(b)),
                  svm::kernel_eval(spec, set.row(a), set.row(b)));
      }
    }
  }
}

TEST(ScaleTest, MultipliesElementwise) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_EQ(scale_instance(x, 1.0), x);
  EXPECT_EQ(scale_instance(x, 2.0), (std::vector<double>{2, 4, 6}));
}

TEST(ChannelTest, IdentityAndBgr) {
  const auto set = make_images(2, 4, 3);
  EXPECT_EQ(permute_channels(set, ChannelOrder{0, 1, 2}), set);
  const auto bgr = permute_channels(set, channel_order_from_string("BGR"));
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto b0 = bgr.channel_plane(i, 0);
    const auto r2 = set.channel_plane(i, 2);
    EXPECT_TRUE(std::equal(b0.begin(), b0.end(), r2.begin()));
    const auto g1 = bgr.channel_plane(i, 1);
    const auto s1 = set.channel_plane(i, 1);
    EXPECT_TRUE(std::equal(g1.begin(), g1.end(), s1.begin()));
  }
}

TEST(ChannelTest, SixDistinctOrders) {
  std::set<std::string> names;
  for (const auto& o : all_channel_orders()) names.insert(to_string(o));
  EXPECT_EQ(names.size(), 6u);
  EXPECT_EQ(to_string(all_channel_orders()[0]), "RGB");
  EXPECT_THROW(channel_order_from_string("RRG"), ArgumentError);
}

TEST(DihedralTest, TransposeOfThreeByThree) {
  const std::vector<float> in{1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_EQ(apply_plane(in, 3, Dihedral::kTranspose),
            (std::vector<float>{1, 4, 7, 2, 5, 8, 3, 6, 9}));
  EXPECT_EQ(apply_plane(in, 3, Dihedral::kR90), (std::vector<float>{7, 4, 1, 8, 5, 2, 9, 6, 3}));
}

TEST(DihedralTest, QuarterTurnFourTimesAndTransposeTwiceAreIdentity) {
  std::vector<float> in(25);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = static_cast<float>(i);
  std::vector<float> r = in;
  for (int i = 0; i < 4; ++i) r = apply_plane(r, 5, Dihedral::kR90);
  EXPECT_EQ(r, in);
  EXPECT_EQ(apply_plane(apply_plane(in, 5, Dihedral::kTranspose), 5, Dihedral::kTranspose), in);
}

TEST(DihedralTest, MatchesExplicitTransposeAndRotations) {
  std::vector<float> in(36);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = static_cast<float>(i * 7 % 36);
  for (Dihedral g : kAllDihedral) {
    EXPECT_EQ(apply_plane(in, 6, g), reference_dihedral(in, 6, g)) << to_string(g);
  }
}

TEST(DihedralTest, CompositionTableMatchesAction) {
  std::vector<float> in(16);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = static_cast<float>(i);
  for (Dihedral a : kAllDihedral) {
    for (Dihedral b : kAllDihedral) {
      const auto two_steps = apply_plane(apply_plane(in, 4, b), 4, a);
      EXPECT_EQ(apply_plane(in, 4, compose(a, b)), two_steps)
          << to_string(a) << " * " << to_string(b);
    }
  }
}

TEST(DihedralTest, GroupAxioms) {
  std::set<int> elements;
  for (Dihedral a : kAllDihedral) {
    EXPECT_EQ(compose(a, Dihedral::kIdentity), a);
    EXPECT_EQ(compose(Dihedral::kIdentity, a), a);
    EXPECT_EQ(compose(a, inverse(a)), Dihedral::kIdentity);
    EXPECT_EQ(compose(inverse(a), a), Dihedral::kIdentity);
    for (Dihedral b : kAllDihedral) {
      elements.insert(static_cast<int>(compose(a, b)));
      for (Dihedral c : kAllDihedral) {
        EXPECT_EQ(compose(compose(a, b), c), compose(a, compose(b, c)));
      }
    }
  }
  EXPECT_EQ(elements.size(), 8u);
  // Not abelian: transpose and quarter turn do not commute.
  EXPECT_NE(compose(Dihedral::kTranspose, Dihedral::kR90),
            compose(Dihedral::kR90, Dihedral::kTranspose));
}

TEST(DihedralTest, NamesRoundTrip) {
  for (Dihedral g : kAllDihedral) EXPECT_EQ(dihedral_from_string(to_string(g)), g);
  EXPECT_THROW(dihedral_from_string("R45"), ArgumentError);
}

TEST(DihedralTest, RejectsNonSquareImages) {
  dataset::LabeledImageSet set;
  set.height = 2;
  set.width = 3;
  set.pixels.assign(18, 1.0f);
  set.labels = {0};
  EXPECT_THROW(dihedral_transform(set, Dihedral::kTranspose), ArgumentError);
}

TEST(NormalizeTest, ImagesAreStandardizedAndIdempotent) {
  const auto set = make_images(3, 5, 4);
  const auto once = normalize_images(set);
  for (std::size_t i = 0; i < once.size(); ++i) {
    double mean = 0.0, sq = 0.0;
    for (float v : once.image(i)) {
      mean += v;
      sq += static_cast<double>(v) * v;
    }
    mean /= static_cast<double>(once.image_size());
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(std::sqrt(sq / static_cast<double>(once.image_size()) - mean * mean), 1.0, 1e-5);
  }
  const auto twice = normalize_images(once);
  for (std::size_t i = 0; i < once.pixels.size(); ++i) {
    EXPECT_NEAR(twice.pixels[i], once.pixels[i], 1e-5);
  }
}

std::vector<TransformSpec> invertible_vector_specs(std::size_t rows, std::size_t cols) {
  std::vector<TransformSpec> specs(4);
  specs[0].kind = TransformSpec::Kind::kFeaturePermutation;
  specs[0].permutation = cycle_permutation(cols);
  specs[1].kind = TransformSpec::Kind::kInstanceShuffle;
  specs[1].permutation = derangement(rows, 11);
  specs[2].kind = TransformSpec::Kind::kFeatureShift;
  specs[2].k = 3.0;
  specs[3].kind = TransformSpec::Kind::kInstanceScale;
  specs[3].k = 2.0;
  return specs;
}

TEST(TransformPropertyTest, VectorTransformsInvertBitwiseAndKeepLabels) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto set = make_vectors(7, 6, seed);
    for (const auto& spec : invertible_vector_specs(7, 6)) {
      const auto moved = apply(spec, set);
      std::multiset<int> a(set.labels.begin(), set.labels.end());
      std::multiset<int> b(moved.labels.begin(), moved.labels.end());
      EXPECT_EQ(a, b) << spec.label();
      if (spec.kind != TransformSpec::Kind::kInstanceShuffle) {
        EXPECT_EQ(moved.labels, set.labels) << spec.label();
      }
      EXPECT_EQ(apply(inverse(spec), moved), set) << spec.label();
    }
  }
}

TEST(TransformPropertyTest, ImageTransformsInvertBitwiseAndKeepLabels) {
  const auto set = make_images(3, 6, 5);
  std::vector<TransformSpec> specs;
  for (const auto& order : all_channel_orders()) {
    TransformSpec s;
    s.kind = TransformSpec::Kind::kChannelOrder;
    s.order = order;
    specs.push_back(s);
  }
  for (Dihedral g : kAllDihedral) {
    TransformSpec s;
    s.kind = TransformSpec::Kind::kDihedral;
    s.dihedral = g;
    specs.push_back(s);
  }
  TransformSpec half;
  half.kind = TransformSpec::Kind::kInstanceScale;
  half.k = 0.5;
  specs.push_back(half);
  for (const auto& spec : specs) {
    const auto moved = apply(spec, set);
    EXPECT_EQ(moved.labels, set.labels) << spec.label();
    EXPECT_EQ(apply(inverse(spec), moved), set) << spec.label();
  }
  TransformSpec norm;
  norm.kind = TransformSpec::Kind::kNormalize;
  EXPECT_EQ(apply(norm, set).labels, set.labels);
  EXPECT_THROW(inverse(norm), ArgumentError);
}

TEST(TransformPropertyTest, KindsCheckTheirSetType) {
  TransformSpec s;
  s.kind = TransformSpec::Kind::kDihedral;
  EXPECT_THROW(apply(s, make_vectors(2, 2, 1)), ArgumentError);
  s.kind = TransformSpec::Kind::kFeatureShift;
  EXPECT_THROW(apply(s, make_images(1, 2, 1)), ArgumentError);
}

TEST(TransportTest, DihedralTensorActsOnTrailingAxes) {
  cnn::Tensor<float> t({2, 1, 3, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  const auto out = dihedral_tensor(t, Dihedral::kTranspose);
  EXPECT_EQ(out[1], t[3]);
  EXPECT_EQ(out[9 + 1], t[9 + 3]);
  EXPECT_EQ(dihedral_tensor(out, Dihedral::kTranspose), t);
}

TEST(TransportTest, ModelTransportMovesEveryKernel) {
  Rng rng(8);
  const auto model = cnn::init_model<float>(cnn::Architecture{}, {}, rng);
  const auto moved = transport_model(model, Dihedral::kR90);
  EXPECT_EQ(moved.stem.weights, dihedral_tensor(model.stem.weights, Dihedral::kR90));
  EXPECT_EQ(moved.blocks[1].conv2.weights,
            dihedral_tensor(model.blocks[1].conv2.weights, Dihedral::kR90));
  EXPECT_EQ(moved.head, model.head);
  EXPECT_EQ(moved.head_bn, model.head_bn);
  const auto permuted = transport_model(model, channel_order_from_string("GBR"));
  EXPECT_EQ(permuted.stem.weights,
            permute_channels(model.stem.weights, channel_order_from_string("GBR")));
}

}  // namespace
}  // namespace mtv::metamorphic
