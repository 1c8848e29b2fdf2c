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

// Labeled corpora used by the classifiers under test:
//
//   * 8x8 gray digits, one instance per CSV row: 64 feature columns followed
//     by the label in the last column, no header.
//   * 32x32 color images in the CIFAR-10 binary layout: per record one label
//     byte then 1024 R, 1024 G and 1024 B bytes, each plane row-major.
//
// Images are held channel-planar in memory as well, so a channel permutation
// is a plane swap.

#ifndef MTV_DATASET_H_
#define MTV_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtv::dataset {

inline constexpr std::size_t kDigitFeatures = 64;
inline constexpr std::size_t kDigitColumns = kDigitFeatures + 1;
inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPlane;
inline constexpr int kDefaultClasses = 10;

// Row-major m x n feature matrix plus one integer label per row.
struct LabeledVectorSet {
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * cols, cols};
  }
  std::span<double> row(std::size_t i) {
    return {features.data() + i * cols, cols};
  }
  bool operator==(const LabeledVectorSet&) const = default;
};

// m images of shape (channels, side, side), channel-planar, row-major
// within each plane.
struct LabeledImageSet {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t plane_size() const { return height * width; }
  std::size_t image_size() const { return channels * height * width; }
  std::span<const float> image(std::size_t i) const {
    return {pixels.data() + i * image_size(), image_size()};
  }
  std::span<float> image(std::size_t i) {
    return {pixels.data() + i * image_size(), image_size()};
  }
  std::span<const float> channel_plane(std::size_t i, std::size_t c) const {
    return image(i).subspan(c * plane_size(), plane_size());
  }
  bool operator==(const LabeledImageSet&) const = default;
};

template <typename Set>
struct DatasetSplit {
  Set train;
  Set test;
};

using VectorSplit = DatasetSplit<LabeledVectorSet>;
using ImageSplit = DatasetSplit<LabeledImageSet>;

// Invariant checks; throw ValidationError.
void validate(const LabeledVectorSet& set, int class_count);
void validate(const LabeledImageSet& set, int class_count);
template <typename Set>
void validate(const DatasetSplit<Set>& split, int class_count) {
  validate(split.train, class_count);
  validate(split.test, class_count);
}

// Digits CSV. Labels must be integral and in 0..class_count-1.
LabeledVectorSet parse_digits_csv(std::string_view text,
                                  int class_count = kDefaultClasses);
LabeledVectorSet load_digits_csv(const std::string& path,
                                 int class_count = kDefaultClasses);
std::string format_digits_csv(const LabeledVectorSet& set);

// CIFAR-10 binary records.
LabeledImageSet parse_cifar_binary(std::span<const std::uint8_t> bytes,
                                   int class_count = kDefaultClasses);
LabeledImageSet load_cifar_binary(const std::string& path,
                                  int class_count = kDefaultClasses);
std::vector<std::uint8_t> serialize_cifar_binary(const LabeledImageSet& set);
void write_cifar_binary(const std::string& path, const LabeledImageSet& set);

// Rows (instances) by index, in the given order.
LabeledVectorSet select(const LabeledVectorSet& set,
                        std::span<const std::size_t> indices);
LabeledImageSet select(const LabeledImageSet& set,
                       std::span<const std::size_t> indices);

LabeledImageSet concat(std::span<const LabeledImageSet> parts);

// Per-class sample counts for a stratified draw of `fraction` of each class
// (largest-remainder apportionment of round-half-up(fraction * m)). Indexed
// like `classes`.
std::vector<std::size_t> stratified_counts(std::span<const std::size_t> class_sizes,
                                           double fraction);

// Stratified subsample; the output keeps the original relative order.
// Deterministic in `seed`.
LabeledVectorSet subsample_stratified(const LabeledVectorSet& set,
                                      double fraction, std::uint64_t seed);
LabeledImageSet subsample_stratified(const LabeledImageSet& set,
                                     double fraction, std::uint64_t seed);

// Disjoint stratified train/test split. Every class keeps at least one
// training instance.
VectorSplit split_stratified(const LabeledVectorSet& set, double test_fraction,
                             std::uint64_t seed);

// Central side x side window of every image.
LabeledImageSet center_crop(const LabeledImageSet& set, std::size_t side);

// Desk-scale stand-in for CIFAR-10: procedurally drawn 32x32 color images
// with ten texture/shape classes. `per_class` images of every class, in
// interleaved class order. Deterministic in `seed`.
LabeledImageSet make_synthetic_images(std::size_t per_class, std::uint64_t seed,
                                      int class_count = kDefaultClasses);

// Dataset manifest (JSON):
//   {"format": "digits_csv" | "cifar_binary",
//    "classes": 10,
//    "train": "path" | ["shard", ...],
//    "test": "path",            // optional
//    "test_fraction": 0.25}     // used when "test" is absent
// Relative paths resolve against the manifest's directory.
struct Manifest {
  enum class Format { kDigitsCsv, kCifarBinary };
  Format format = Format::kDigitsCsv;
  int classes = kDefaultClasses;
  std::vector<std::string> train;
  std::optional<std::string> test;
  double test_fraction = 0.25;
};

Manifest parse_manifest(std::string_view json_text,
                        const std::string& base_dir = ".");
Manifest load_manifest(const std::string& path);
std::string manifest_to_json(const Manifest& manifest);

VectorSplit load_vector_split(const Manifest& manifest, std::uint64_t seed);
ImageSplit load_image_split(const Manifest& manifest);

}  // namespace mtv::dataset

#endif  // MTV_DATASET_H_
