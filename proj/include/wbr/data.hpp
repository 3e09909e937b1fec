// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wbr/linalg.hpp"

namespace wbr {

using ClassId = std::uint32_t;

/// Samples as rows of `features` with one class label per row.
struct LabeledDataset {
  Matrix features;
  std::vector<ClassId> labels;
  std::uint32_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Throws ConsistencyError when row count and label count differ or a label
  /// is >= num_classes.
  void validate() const;

  /// Dataset restricted to `rows`, in the given order.
  LabeledDataset subset(std::span<const std::size_t> rows) const;
};

/// Layout of the 24-byte WBRF header. All integers are little-endian on disk.
struct FeatureFileHeader {
  static constexpr char kMagic[4] = {'W', 'B', 'R', 'F'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kSize = 24;

  std::uint64_t count = 0;
  std::uint32_t dim = 0;
  std::uint32_t num_classes = 0;
};

/// Reads an MNIST image/label IDX pair (big-endian, magic 2051 / 2049).
/// Pixels are scaled to [0, 1] by dividing by 255; num_classes is 10.
LabeledDataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path);

/// Reads a WBRF feature file; f32 payload is widened to double.
LabeledDataset load_feature_file(const std::filesystem::path& path);

/// Writes a WBRF feature file. Features are narrowed to f32.
void write_feature_file(const std::filesystem::path& path, const LabeledDataset& dataset);

/// Per-feature affine transform x -> (x - mean) / stddev applied in place.
void standardize(LabeledDataset& dataset, double mean, double stddev);

/// Conventional MNIST pixel statistics used by input_norm = "standard".
inline constexpr double kMnistPixelMean = 0.1307;
inline constexpr double kMnistPixelStd = 0.3081;

}  // namespace wbr
