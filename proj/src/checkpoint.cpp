// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wbr/error.hpp"
#include "wbr/trainer.hpp"

namespace wbr {

namespace {

constexpr char kModelMagic[4] = {'W', 'B', 'R', 'M'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  template <typename T>
  T get() {
    if (offset_ + sizeof(T) > bytes_.size()) throw LengthError("'" + path_ + "' is truncated");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= T{bytes_[offset_ + i]} << (8 * i);
    offset_ += sizeof(T);
    return value;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  bool at_end() const noexcept { return offset_ == bytes_.size(); }
  const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
  std::string path_;
  std::size_t offset_ = 0;
};

}  // namespace

void write_model_checkpoint(const std::filesystem::path& path, const MlpModel& model) {
  std::vector<unsigned char> bytes(std::begin(kModelMagic), std::end(kModelMagic));
  put<std::uint32_t>(bytes, kModelVersion);
  put<std::uint32_t>(bytes, static_cast<std::uint32_t>(model.layer_dims.size()));
  for (std::size_t d : model.layer_dims) put<std::uint64_t>(bytes, d);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (double v : model.weights[l].data()) put<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(v));
    for (double v : model.biases[l].data()) put<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

MlpModel load_model_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Reader reader(std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>()),
                path.string());
  if (reader.bytes().size() < 4 || std::memcmp(reader.bytes().data(), kModelMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "' is not a WBRM model checkpoint");
  }
  reader.get<std::uint32_t>();  // magic
  const auto version = reader.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw VersionError("'" + path.string() + "' has model checkpoint version " +
                       std::to_string(version));
  }
  const auto num_dims = reader.get<std::uint32_t>();
  if (num_dims < 2) throw FormatError("'" + path.string() + "' declares fewer than 2 layer dims");
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < num_dims; ++i) dims.push_back(reader.get<std::uint64_t>());
  MlpModel model = MlpModel::zeros(dims);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (double& v : model.weights[l].data()) v = reader.get_f64();
    for (double& v : model.biases[l].data()) v = reader.get_f64();
  }
  if (!reader.at_end()) throw FormatError("'" + path.string() + "' has trailing bytes");
  return model;
}

}  // namespace wbr
