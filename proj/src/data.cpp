// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/data.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wbr/error.hpp"

namespace wbr {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

std::uint32_t read_be32(std::span<const unsigned char> b, std::size_t offset) {
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

template <typename T>
T read_le(std::span<const unsigned char> b, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= T{b[offset + i]} << (8 * i);
  return value;
}

template <typename T>
void append_le(std::vector<unsigned char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFF));
  }
}

}  // namespace

void LabeledDataset::validate() const {
  if (features.rows() != labels.size()) {
    throw ConsistencyError("dataset has " + std::to_string(features.rows()) + " rows but " +
                           std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw ConsistencyError("label " + std::to_string(labels[i]) + " at row " +
                             std::to_string(i) + " is not below num_classes " +
                             std::to_string(num_classes));
    }
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.features = gather_rows(features, rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels[r]);
  out.num_classes = num_classes;
  return out;
}

LabeledDataset load_mnist_idx(const std::filesystem::path& images_path,
                              const std::filesystem::path& labels_path) {
  const auto images = read_all(images_path);
  const auto labels = read_all(labels_path);

  if (images.size() < 16) throw FormatError("'" + images_path.string() + "' is too short");
  if (labels.size() < 8) throw FormatError("'" + labels_path.string() + "' is too short");
  if (read_be32(images, 0) != kIdxImagesMagic) {
    throw FormatError("'" + images_path.string() + "' is not an IDX image file (bad magic)");
  }
  if (read_be32(labels, 0) != kIdxLabelsMagic) {
    throw FormatError("'" + labels_path.string() + "' is not an IDX label file (bad magic)");
  }

  const std::size_t count = read_be32(images, 4);
  const std::size_t height = read_be32(images, 8);
  const std::size_t width = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (count != label_count) {
    throw ConsistencyError("image count " + std::to_string(count) + " != label count " +
                           std::to_string(label_count));
  }
  const std::size_t dim = height * width;
  if (images.size() < 16 + count * dim) {
    throw LengthError("'" + images_path.string() + "' is truncated");
  }
  if (labels.size() < 8 + count) throw LengthError("'" + labels_path.string() + "' is truncated");

  LabeledDataset ds;
  ds.num_classes = 10;
  ds.features = Matrix(count, dim);
  auto out = ds.features.data();
  for (std::size_t i = 0; i < count * dim; ++i) out[i] = images[16 + i] / 255.0;
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.labels[i] = labels[8 + i];
    if (ds.labels[i] >= ds.num_classes) {
      throw FormatError("'" + labels_path.string() + "' has label " +
                        std::to_string(ds.labels[i]) + " at index " + std::to_string(i));
    }
  }
  return ds;
}

LabeledDataset load_feature_file(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const std::span<const unsigned char> b(bytes);
  if (bytes.size() < FeatureFileHeader::kSize) {
    throw FormatError("'" + path.string() + "' is too short for a WBRF header");
  }
  if (std::memcmp(bytes.data(), FeatureFileHeader::kMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "' does not start with WBRF magic");
  }
  const auto version = read_le<std::uint32_t>(b, 4);
  if (version != FeatureFileHeader::kVersion) {
    throw VersionError("'" + path.string() + "' has WBRF version " + std::to_string(version) +
                       ", expected " + std::to_string(FeatureFileHeader::kVersion));
  }
  FeatureFileHeader header;
  header.count = read_le<std::uint64_t>(b, 8);
  header.dim = read_le<std::uint32_t>(b, 16);
  header.num_classes = read_le<std::uint32_t>(b, 20);

  const std::uint64_t payload_values = header.count * header.dim;
  const std::uint64_t expected =
      FeatureFileHeader::kSize + payload_values * 4 + header.count * 4;
  if (bytes.size() < expected) {
    throw LengthError("'" + path.string() + "' is truncated: " + std::to_string(bytes.size()) +
                      " bytes, header requires " + std::to_string(expected));
  }
  if (bytes.size() > expected) {
    throw FormatError("'" + path.string() + "' has " + std::to_string(bytes.size() - expected) +
                      " trailing bytes");
  }

  LabeledDataset ds;
  ds.num_classes = header.num_classes;
  ds.features = Matrix(header.count, header.dim);
  auto out = ds.features.data();
  std::size_t offset = FeatureFileHeader::kSize;
  for (std::uint64_t i = 0; i < payload_values; ++i, offset += 4) {
    out[i] = static_cast<double>(std::bit_cast<float>(read_le<std::uint32_t>(b, offset)));
  }
  ds.labels.resize(header.count);
  for (std::uint64_t i = 0; i < header.count; ++i, offset += 4) {
    ds.labels[i] = read_le<std::uint32_t>(b, offset);
    if (ds.labels[i] >= ds.num_classes) {
      throw FormatError("'" + path.string() + "' has label " + std::to_string(ds.labels[i]) +
                        " >= num_classes " + std::to_string(ds.num_classes));
    }
  }
  return ds;
}

void write_feature_file(const std::filesystem::path& path, const LabeledDataset& dataset) {
  dataset.validate();
  std::vector<unsigned char> bytes;
  bytes.reserve(FeatureFileHeader::kSize + dataset.features.size() * 4 + dataset.size() * 4);
  bytes.insert(bytes.end(), std::begin(FeatureFileHeader::kMagic),
               std::end(FeatureFileHeader::kMagic));
  append_le<std::uint32_t>(bytes, FeatureFileHeader::kVersion);
  append_le<std::uint64_t>(bytes, dataset.size());
  append_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(dataset.dim()));
  append_le<std::uint32_t>(bytes, dataset.num_classes);
  for (double v : dataset.features.data()) {
    append_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  for (ClassId label : dataset.labels) append_le<std::uint32_t>(bytes, label);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

void standardize(LabeledDataset& dataset, double mean, double stddev) {
  if (!(stddev > 0.0)) throw ConfigError("standardization stddev must be positive");
  for (double& v : dataset.features.data()) v = (v - mean) / stddev;
}

}  // namespace wbr
