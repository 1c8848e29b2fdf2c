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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "mtv/error.h"
#include "mtv/rng.h"

namespace mtv::dataset {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view field, std::size_t row, std::size_t col) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("row " + std::to_string(row) + ", column " +
                     std::to_string(col) + ": '" + std::string(field) +
                     "' is not a number");
  }
  if (!std::isfinite(value)) {
    throw ParseError("row " + std::to_string(row) + ", column " +
                     std::to_string(col) + ": non-finite value");
  }
  return value;
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

// label -> row indices, labels ascending.
std::map<int, std::vector<std::size_t>> group_by_label(std::span<const int> labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

std::vector<std::size_t> stratified_indices(std::span<const int> labels,
                                            double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ArgumentError("subsample fraction must lie in (0, 1], got " +
                        std::to_string(fraction));
  }
  auto groups = group_by_label(labels);
  std::vector<std::size_t> sizes;
  for (const auto& [label, rows] : groups) sizes.push_back(rows.size());
  const auto counts = stratified_counts(sizes, fraction);

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  std::size_t k = 0;
  for (auto& [label, rows] : groups) {
    rng.shuffle(std::span<std::size_t>(rows));
    chosen.insert(chosen.end(), rows.begin(), rows.begin() + counts[k]);
    ++k;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace

void validate(const LabeledVectorSet& set, int class_count) {
  if (set.size() == 0) throw ValidationError("no instances");
  if (set.features.size() != set.size() * set.cols) {
    throw ValidationError("feature matrix does not match row count");
  }
  for (double v : set.features) {
    if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] < 0 || set.labels[i] >= class_count) {
      throw ValidationError("row " + std::to_string(i) + ": label " +
                            std::to_string(set.labels[i]) + " outside 0.." +
                            std::to_string(class_count - 1));
    }
  }
}

void validate(const LabeledImageSet& set, int class_count) {
  if (set.size() == 0) throw ValidationError("no instances");
  if (set.height != set.width) {
    throw ValidationError("images must be square, got " +
                          std::to_string(set.height) + "x" +
                          std::to_string(set.width));
  }
  if (set.pixels.size() != set.size() * set.image_size()) {
    throw ValidationError("pixel buffer does not match image count");
  }
  for (float v : set.pixels) {
    if (!std::isfinite(v) || v < 0.0f || v > 255.0f) {
      throw ValidationError("pixel value outside [0, 255]");
    }
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] < 0 || set.labels[i] >= class_count) {
      throw ValidationError("image " + std::to_string(i) + ": label " +
                            std::to_string(set.labels[i]) + " outside 0.." +
                            std::to_string(class_count - 1));
    }
  }
}

LabeledVectorSet parse_digits_csv(std::string_view text, int class_count) {
  LabeledVectorSet set;
  set.cols = kDigitFeatures;
  std::size_t row = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (trim(line).empty()) continue;

    std::size_t fields = 0;
    double value = 0.0;
    while (true) {
      const auto comma = line.find(',');
      const std::string_view field = line.substr(0, comma);
      if (fields < kDigitColumns) {
        value = parse_number(field, row, fields);
        if (fields < kDigitFeatures) set.features.push_back(value);
      }
      ++fields;
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (fields != kDigitColumns) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(kDigitColumns) + " fields, found " +
                       std::to_string(fields));
    }
    // `value` now holds column 64, the label.
    if (value != std::floor(value)) {
      throw ValidationError("row " + std::to_string(row) + ": label " +
                            format_number(value) + " is not an integer");
    }
    if (value < 0 || value >= class_count) {
      throw ValidationError("row " + std::to_string(row) + ": label " +
                            format_number(value) + " outside 0.." +
                            std::to_string(class_count - 1));
    }
    set.labels.push_back(static_cast<int>(value));
    ++row;
  }
  if (set.size() == 0) throw ParseError("no instances");
  return set;
}

LabeledVectorSet load_digits_csv(const std::string& path, int class_count) {
  return parse_digits_csv(read_file(path), class_count);
}

std::string format_digits_csv(const LabeledVectorSet& set) {
  std::string out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (double v : set.row(i)) {
      out += format_number(v);
      out += ',';
    }
    out += std::to_string(set.labels[i]);
    out += '\n';
  }
  return out;
}

LabeledImageSet parse_cifar_binary(std::span<const std::uint8_t> bytes,
                                   int class_count) {
  if (bytes.empty()) throw FormatError("no instances");
  const std::size_t records = bytes.size() / kCifarRecord;
  if (bytes.size() % kCifarRecord != 0) {
    throw FormatError("trailing partial record at byte offset " +
                      std::to_string(records * kCifarRecord) + " (" +
                      std::to_string(bytes.size() % kCifarRecord) + " of " +
                      std::to_string(kCifarRecord) + " bytes)");
  }
  LabeledImageSet set;
  set.channels = 3;
  set.height = kCifarSide;
  set.width = kCifarSide;
  set.labels.reserve(records);
  set.pixels.reserve(records * 3 * kCifarPlane);
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t offset = r * kCifarRecord;
    const int label = bytes[offset];
    if (label >= class_count) {
      throw ValidationError("record " + std::to_string(r) + " (byte offset " +
                            std::to_string(offset) + "): label " +
                            std::to_string(label) + " outside 0.." +
                            std::to_string(class_count - 1));
    }
    set.labels.push_back(label);
    for (std::size_t b = 1; b < kCifarRecord; ++b) {
      set.pixels.push_back(static_cast<float>(bytes[offset + b]));
    }
  }
  return set;
}

LabeledImageSet load_cifar_binary(const std::string& path, int class_count) {
  const std::string raw = read_file(path);
  return parse_cifar_binary(
      std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()),
      class_count);
}

std::vector<std::uint8_t> serialize_cifar_binary(const LabeledImageSet& set) {
  if (set.channels != 3 || set.height != kCifarSide || set.width != kCifarSide) {
    throw ArgumentError("CIFAR records hold 3x32x32 images");
  }
  std::vector<std::uint8_t> out;
  out.reserve(set.size() * kCifarRecord);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] < 0 || set.labels[i] > 255) {
      throw ValidationError("label does not fit in one byte");
    }
    out.push_back(static_cast<std::uint8_t>(set.labels[i]));
    for (float v : set.image(i)) {
      if (!(v >= 0.0f && v <= 255.0f) || v != std::floor(v)) {
        throw ValidationError("pixel value is not a byte");
      }
      out.push_back(static_cast<std::uint8_t>(v));
    }
  }
  return out;
}

void write_cifar_binary(const std::string& path, const LabeledImageSet& set) {
  const auto bytes = serialize_cifar_binary(set);
  write_file(path, std::string(bytes.begin(), bytes.end()));
}

LabeledVectorSet select(const LabeledVectorSet& set,
                        std::span<const std::size_t> indices) {
  LabeledVectorSet out;
  out.cols = set.cols;
  out.features.reserve(indices.size() * set.cols);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= set.size()) throw ArgumentError("row index out of range");
    const auto r = set.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(set.labels[i]);
  }
  return out;
}

LabeledImageSet select(const LabeledImageSet& set,
                       std::span<const std::size_t> indices) {
  LabeledImageSet out;
  out.channels = set.channels;
  out.height = set.height;
  out.width = set.width;
  out.pixels.reserve(indices.size() * set.image_size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= set.size()) throw ArgumentError("image index out of range");
    const auto img = set.image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(set.labels[i]);
  }
  return out;
}

LabeledImageSet concat(std::span<const LabeledImageSet> parts) {
  if (parts.empty()) throw ArgumentError("concat: no parts");
  LabeledImageSet out;
  out.channels = parts[0].channels;
  out.height = parts[0].height;
  out.width = parts[0].width;
  for (const auto& p : parts) {
    if (p.channels != out.channels || p.height != out.height ||
        p.width != out.width) {
      throw ArgumentError("concat: image shapes differ");
    }
    out.pixels.insert(out.pixels.end(), p.pixels.begin(), p.pixels.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

std::vector<std::size_t> stratified_counts(std::span<const std::size_t> class_sizes,
                                           double fraction) {
  const std::size_t total_size =
      std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(total_size) + 0.5));

  std::vector<std::size_t> counts(class_sizes.size());
  std::vector<double> remainder(class_sizes.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double exact = fraction * static_cast<double>(class_sizes[c]);
    counts[c] = std::min(class_sizes[c],
                         static_cast<std::size_t>(std::floor(exact + 1e-9)));
    remainder[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  // Largest remainder first; ties go to the larger class, then the lower one.
  std::vector<std::size_t> order(class_sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return class_sizes[a] > class_sizes[b];
  });
  for (std::size_t k = 0; assigned < target && k < order.size(); ++k) {
    const std::size_t c = order[k];
    if (counts[c] < class_sizes[c] && remainder[c] > 0.0) {
      ++counts[c];
      ++assigned;
    }
  }
  return counts;
}

LabeledVectorSet subsample_stratified(const LabeledVectorSet& set,
                                      double fraction, std::uint64_t seed) {
  const auto idx = stratified_indices(set.labels, fraction, seed);
  return select(set, idx);
}

LabeledImageSet subsample_stratified(const LabeledImageSet& set,
                                     double fraction, std::uint64_t seed) {
  const auto idx = stratified_indices(set.labels, fraction, seed);
  return select(set, idx);
}

VectorSplit split_stratified(const LabeledVectorSet& set, double test_fraction,
                             std::uint64_t seed) {
  if (!(test_fraction > 0.0) || test_fraction >= 1.0) {
    throw ArgumentError("test fraction must lie in (0, 1)");
  }
  auto groups = group_by_label(set.labels);
  std::vector<std::size_t> sizes;
  for (const auto& [label, rows] : groups) sizes.push_back(rows.size());
  const auto counts = stratified_counts(sizes, test_fraction);

  Rng rng(seed);
  std::vector<std::size_t> test_rows;
  std::vector<std::size_t> train_rows;
  std::size_t k = 0;
  for (auto& [label, rows] : groups) {
    rng.shuffle(std::span<std::size_t>(rows));
    const std::size_t n_test = std::min(counts[k], rows.size() - 1);
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + n_test);
    train_rows.insert(train_rows.end(), rows.begin() + n_test, rows.end());
    ++k;
  }
  if (test_rows.empty()) throw ArgumentError("split leaves the test set empty");
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  return {select(set, train_rows), select(set, test_rows)};
}

LabeledImageSet center_crop(const LabeledImageSet& set, std::size_t side) {
  if (set.height != set.width) throw ArgumentError("center_crop: non-square images");
  if (side == 0 || side > set.height || (set.height - side) % 2 != 0) {
    throw ArgumentError("center_crop: side " + std::to_string(side) +
                        " cannot be centered in " + std::to_string(set.height));
  }
  const std::size_t off = (set.height - side) / 2;
  LabeledImageSet out;
  out.channels = set.channels;
  out.height = side;
  out.width = side;
  out.labels = set.labels;
  out.pixels.reserve(set.size() * set.channels * side * side);
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t c = 0; c < set.channels; ++c) {
      const auto plane = set.channel_plane(i, c);
      for (std::size_t r = 0; r < side; ++r) {
        const float* src = plane.data() + (r + off) * set.width + off;
        out.pixels.insert(out.pixels.end(), src, src + side);
      }
    }
  }
  return out;
}

}  // namespace mtv::dataset
