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

#include "mtv/dataset.h"

#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "gtest/gtest.h"
#include "mtv/error.h"
#include "mtv/rng.h"

namespace mtv::dataset {
namespace {

std::string digits_row(int label, int fill = 0) {
  std::string row;
  for (int i = 0; i < 64; ++i) row += std::to_string(fill) + ",";
  return row + std::to_string(label) + "\n";
}

std::vector<std::uint8_t> random_cifar(std::size_t records, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> bytes(records * kCifarRecord);
  for (std::size_t r = 0; r < records; ++r) {
    bytes[r * kCifarRecord] = static_cast<std::uint8_t>(rng.uniform_index(10));
    for (std::size_t i = 1; i < kCifarRecord; ++i) {
      bytes[r * kCifarRecord + i] = static_cast<std::uint8_t>(rng.uniform_index(256));
    }
  }
  return bytes;
}

template <typename Fn>
std::string error_message(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(DigitsCsvTest, SingleZeroRowWithLabel) {
  const LabeledVectorSet set = parse_digits_csv(digits_row(5));
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.cols, 64u);
  EXPECT_EQ(set.labels[0], 5);
  for (double v : set.row(0)) EXPECT_EQ(v, 0.0);
}

TEST(DigitsCsvTest, LabelComesFromLastColumn) {
  std::string row = "3,7";
  for (int i = 2; i < 64; ++i) row += ",1";
  row += ",4\n";
  const LabeledVectorSet set = parse_digits_csv(row);
  EXPECT_EQ(set.labels[0], 4);
  EXPECT_EQ(set.row(0)[1], 7.0);
}

TEST(DigitsCsvTest, EmptyInputHasNoInstances) {
  EXPECT_THROW(parse_digits_csv(""), ParseError);
  EXPECT_NE(error_message([] { parse_digits_csv(""); }).find("no instances"),
            std::string::npos);
}

TEST(DigitsCsvTest, MalformedRowNamesRowIndex) {
  const std::string text = digits_row(1) + "1,2,3\n";
  EXPECT_THROW(parse_digits_csv(text), ParseError);
  EXPECT_NE(error_message([&] { parse_digits_csv(text); }).find("row 1"), std::string::npos);

  std::string bad = digits_row(2);
  bad[0] = 'x';
  EXPECT_THROW(parse_digits_csv(bad), ParseError);
}

TEST(DigitsCsvTest, LabelOutsideRangeIsValidationError) {
  EXPECT_THROW(parse_digits_csv(digits_row(10)), ValidationError);
  EXPECT_THROW(parse_digits_csv(digits_row(-1)), ValidationError);
  std::string fractional = digits_row(0);
  fractional.replace(fractional.size() - 2, 1, "2.5");
  EXPECT_THROW(parse_digits_csv(fractional), ValidationError);
}

TEST(DigitsCsvTest, AcceptsFloatsAndRoundTrips) {
  std::string row;
  for (int i = 0; i < 64; ++i) row += std::to_string(i % 17) + ".25,";
  row += "9\n";
  const LabeledVectorSet set = parse_digits_csv(row + digits_row(3, 16));
  EXPECT_EQ(set.row(0)[4], 4.25);
  EXPECT_EQ(parse_digits_csv(format_digits_csv(set)), set);
}

TEST(DigitsCsvTest, BundledCorpusLoads) {
  const LabeledVectorSet set = load_digits_csv(std::string(MTV_TEST_DATA_DIR) + "/digits.csv");
  EXPECT_EQ(set.size(), 1797u);
  std::set<int> classes(set.labels.begin(), set.labels.end());
  EXPECT_EQ(classes.size(), 10u);
  for (double v : set.features) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 16.0);
  }
}

TEST(CifarBinaryTest, SingleRecordIsOneImage) {
  const auto bytes = random_cifar(1, 3);
  const LabeledImageSet set = parse_cifar_binary(bytes);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.height, 32u);
  EXPECT_EQ(set.width, 32u);
  EXPECT_EQ(set.labels[0], bytes[0]);
}

TEST(CifarBinaryTest, FirstPayloadByteIsRedTopLeft) {
  auto bytes = random_cifar(1, 4);
  bytes[1] = 201;
  bytes[1 + kCifarPlane] = 17;
  const LabeledImageSet set = parse_cifar_binary(bytes);
  EXPECT_EQ(set.channel_plane(0, 0)[0], 201.0f);
  EXPECT_EQ(set.channel_plane(0, 1)[0], 17.0f);
}

TEST(CifarBinaryTest, ChannelPlanesMapToByteRanges) {
  const auto bytes = random_cifar(2, 5);
  const LabeledImageSet set = parse_cifar_binary(bytes);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto plane = set.channel_plane(r, c);
      for (std::size_t i = 0; i < kCifarPlane; ++i) {
        ASSERT_EQ(plane[i], bytes[r * kCifarRecord + 1 + c * kCifarPlane + i]);
      }
    }
  }
}

TEST(CifarBinaryTest, LabelElevenIsRejected) {
  auto bytes = random_cifar(2, 6);
  bytes[kCifarRecord] = 11;
  EXPECT_THROW(parse_cifar_binary(bytes), ValidationError);
}

TEST(CifarBinaryTest, PartialRecordReportsOffset) {
  auto bytes = random_cifar(2, 7);
  bytes.resize(kCifarRecord + 100);
  EXPECT_THROW(parse_cifar_binary(bytes), FormatError);
  EXPECT_NE(error_message([&] { parse_cifar_binary(bytes); })
                .find(std::to_string(kCifarRecord)),
            std::string::npos);
  EXPECT_THROW(parse_cifar_binary({}), FormatError);
}

TEST(CifarBinaryTest, SerializeRoundTripsByteForByte) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto bytes = random_cifar(1 + seed, 100 + seed);
    EXPECT_EQ(serialize_cifar_binary(parse_cifar_binary(bytes)), bytes);
  }
}

TEST(CifarBinaryTest, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "mtv_dataset_test.bin";
  const LabeledImageSet set = parse_cifar_binary(random_cifar(3, 8));
  write_cifar_binary(path.string(), set);
  EXPECT_EQ(load_cifar_binary(path.string()), set);
  std::filesystem::remove(path);
  EXPECT_THROW(load_cifar_binary(path.string()), IoError);
}

LabeledVectorSet labeled_rows(const std::vector<std::size_t>& class_sizes) {
  LabeledVectorSet set;
  set.cols = 2;
  double next = 0.0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    for (std::size_t i = 0; i < class_sizes[c]; ++i) {
      set.features.push_back(next);
      set.features.push_back(next + 0.5);
      set.labels.push_back(static_cast<int>(c));
      next += 1.0;
    }
  }
  return set;
}

TEST(SubsampleTest, FullFractionIsIdentity) {
  const LabeledVectorSet set = labeled_rows({3, 5, 2});
  EXPECT_EQ(subsample_stratified(set, 1.0, 9), set);
}

TEST(SubsampleTest, SameSeedSameOutput) {
  const LabeledVectorSet set = labeled_rows({30, 50, 20});
  EXPECT_EQ(subsample_stratified(set, 0.3, 42), subsample_stratified(set, 0.3, 42));
  EXPECT_NE(subsample_stratified(set, 0.3, 42), subsample_stratified(set, 0.3, 43));
}

TEST(SubsampleTest, RejectsNonPositiveFraction) {
  const LabeledVectorSet set = labeled_rows({3, 3});
  EXPECT_THROW(subsample_stratified(set, 0.0, 1), ArgumentError);
  EXPECT_THROW(subsample_stratified(set, -0.5, 1), ArgumentError);
}

TEST(SubsampleTest, TenPercentOfBalancedCifarSizedCorpus) {
  const std::vector<std::size_t> sizes(10, 5029);
  const auto counts = stratified_counts(sizes, 0.1);
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  EXPECT_EQ(total, 5029u);
  for (std::size_t c : counts) EXPECT_NEAR(static_cast<double>(c), 502.9, 1.0);
}

TEST(SubsampleTest, StratificationInvariantHoldsForRandomShapes) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(8);
    std::vector<std::size_t> sizes(k);
    for (auto& s : sizes) s = 1 + rng.uniform_index(60);
    const double fraction = 0.01 + 0.99 * rng.uniform();
    const auto counts = stratified_counts(sizes, fraction);
    for (std::size_t c = 0; c < k; ++c) {
      const double m = static_cast<double>(sizes[c]);
      EXPECT_LE(std::abs(static_cast<double>(counts[c]) / m - fraction), 1.0 / m + 1e-12)
          << "trial " << trial << " class " << c;
    }
  }
}

TEST(SubsampleTest, KeepsOriginalOrderAndClassCounts) {
  const LabeledVectorSet set = labeled_rows({40, 20, 10});
  const LabeledVectorSet sub = subsample_stratified(set, 0.5, 5);
  std::map<int, int> counts;
  for (int l : sub.labels) ++counts[l];
  EXPECT_EQ(counts[0], 20);
  EXPECT_EQ(counts[1], 10);
  EXPECT_EQ(counts[2], 5);
  for (std::size_t i = 1; i < sub.size(); ++i) EXPECT_LT(sub.row(i - 1)[0], sub.row(i)[0]);
}

TEST(SubsampleTest, ImageSetsAreStratifiedToo) {
  const LabeledImageSet set = make_synthetic_images(10, 3);
  const LabeledImageSet sub = subsample_stratified(set, 0.3, 1);
  EXPECT_EQ(sub.size(), 30u);
  std::map<int, int> counts;
  for (int l : sub.labels) ++counts[l];
  for (const auto& [label, n] : counts) EXPECT_EQ(n, 3) << label;
}

TEST(SplitTest, DisjointAndStratified) {
  const LabeledVectorSet set = labeled_rows({40, 20, 12});
  const VectorSplit split = split_stratified(set, 0.25, 3);
  EXPECT_EQ(split.train.size() + split.test.size(), set.size());
  std::set<double> train_keys;
  for (std::size_t i = 0; i < split.train.size(); ++i) train_keys.insert(split.train.row(i)[0]);
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    EXPECT_FALSE(train_keys.contains(split.test.row(i)[0]));
  }
  EXPECT_EQ(split.test.size(), 18u);
}

TEST(ImageOpsTest, CenterCropTakesMiddleWindow) {
  const LabeledImageSet set = make_synthetic_images(1, 9);
  const LabeledImageSet crop = center_crop(set, 16);
  EXPECT_EQ(crop.height, 16u);
  EXPECT_EQ(crop.labels, set.labels);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(crop.channel_plane(0, c)[0], set.channel_plane(0, c)[8 * 32 + 8]);
    EXPECT_EQ(crop.channel_plane(0, c)[15 * 16 + 15], set.channel_plane(0, c)[23 * 32 + 23]);
  }
  EXPECT_THROW(center_crop(set, 15), ArgumentError);
}

TEST(ImageOpsTest, SyntheticCorpusIsValidAndDeterministic) {
  const LabeledImageSet a = make_synthetic_images(4, 77);
  EXPECT_NO_THROW(validate(a, 10));
  EXPECT_EQ(a.size(), 40u);
  EXPECT_EQ(a, make_synthetic_images(4, 77));
  EXPECT_NE(a, make_synthetic_images(4, 78));
  for (float v : a.pixels) EXPECT_EQ(v, std::floor(v));
}

TEST(ImageOpsTest, ConcatAndSelect) {
  const LabeledImageSet a = make_synthetic_images(1, 1);
  const LabeledImageSet b = make_synthetic_images(1, 2);
  const LabeledImageSet both = concat(std::vector<LabeledImageSet>{a, b});
  EXPECT_EQ(both.size(), 20u);
  const std::vector<std::size_t> second_half{10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  EXPECT_EQ(select(both, second_half), b);
}

TEST(ManifestTest, ParsesAndResolvesRelativePaths) {
  const Manifest m = parse_manifest(
      R"({"format": "cifar_binary", "classes": 10, "train": ["a.bin", "/abs/b.bin"],
          "test": "t.bin"})",
      "/data/root");
  EXPECT_EQ(m.format, Manifest::Format::kCifarBinary);
  ASSERT_EQ(m.train.size(), 2u);
  EXPECT_EQ(m.train[0], "/data/root/a.bin");
  EXPECT_EQ(m.train[1], "/abs/b.bin");
  EXPECT_EQ(*m.test, "/data/root/t.bin");
  EXPECT_EQ(parse_manifest(manifest_to_json(m), "/elsewhere").train, m.train);
}

TEST(ManifestTest, RejectsBadDocuments) {
  EXPECT_THROW(parse_manifest("{"), ConfigError);
  EXPECT_THROW(parse_manifest(R"({"format": "png", "train": "x"})"), ConfigError);
  EXPECT_THROW(parse_manifest(R"({"format": "digits_csv"})"), ConfigError);
}

TEST(ManifestTest, DigitsSplitFromManifest) {
  const Manifest m = parse_manifest(R"({"format": "digits_csv", "train": "digits.csv",
                                        "test_fraction": 0.2})",
                                    MTV_TEST_DATA_DIR);
  const VectorSplit split = load_vector_split(m, 1);
  EXPECT_EQ(split.train.size() + split.test.size(), 1797u);
  EXPECT_NEAR(static_cast<double>(split.test.size()), 0.2 * 1797, 10.0);
}

}  // namespace
}  // namespace mtv::dataset
