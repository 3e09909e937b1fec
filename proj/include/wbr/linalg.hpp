// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace wbr {

/// Row-major dense matrix of doubles. A row vector is a 1 x n matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of `data`; throws ShapeError unless data.size() == rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// "rows x cols", used in error messages.
  std::string shape_string() const;
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(double value) noexcept;
  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double factor) noexcept;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix lhs, const Matrix& rhs);
Matrix operator*(Matrix lhs, double factor);
Matrix operator*(double factor, Matrix rhs);

/// Standard product a * b. Throws ShapeError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materializing the transpose.
Matrix matmul_transposed_b(const Matrix& a, const Matrix& b);
/// a^T * b without materializing the transpose.
Matrix matmul_transposed_a(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// Frobenius norm, sqrt of the sum of squares. Zero for an empty matrix.
double l2_norm(const Matrix& m);
double l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double sum_of_squares(std::span<const double> v);
bool all_finite(std::span<const double> v);
inline bool all_finite(const Matrix& m) { return all_finite(m.data()); }

/// Rows of `m` selected by index, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

/// xoshiro256++ generator seeded through splitmix64, so sequences depend on
/// nothing but the 64-bit seed.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller; platform independent unlike <random> distributions.
  double normal() noexcept;
  /// Advances 2^128 steps; used to derive non-overlapping streams.
  void jump() noexcept;
  /// Copy of this generator advanced by jump().
  SeededRng fork() const noexcept;

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Fisher-Yates permutation of 0..n-1 drawn from `rng`.
std::vector<std::size_t> rng_shuffle(SeededRng& rng, std::size_t n);

}  // namespace wbr
