#pragma once

// Dense vector/matrix primitives, cosine similarity, sign binarization and
// the Hamming-distance/inner-product identity. Everything here is a pure
// function on immutable inputs; safe for concurrent use.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "asymhash/errors.hpp"

namespace asymhash {

using RealVector = std::vector<double>;
using LabelVector = std::vector<std::uint8_t>;  // entries 0/1

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dot product. Throws DimensionError on length mismatch.
double inner_product(std::span<const double> a, std::span<const double> b);

double squared_norm(std::span<const double> a);
double norm(std::span<const double> a);

/// Cosine similarity, clamped to [-1, 1] against round-off.
/// Throws DegenerateVectorError on a zero-norm operand.
double cosine(std::span<const double> a, std::span<const double> b);

/// sign with the fixed convention sign(0) = +1.
inline double sign_value(double x) { return x < 0.0 ? -1.0 : 1.0; }

/// A K-bit code with entries in {-1, +1}, stored as packed 64-bit words
/// (bit set = +1). Packed and ±1-real representations round-trip losslessly.
class BinaryCode {
 public:
  BinaryCode() = default;
  explicit BinaryCode(int length)
      : length_(length), words_((static_cast<std::size_t>(length) + 63) / 64, 0) {}

  /// Builds from ±1 integer bits; throws DomainError on any other value.
  static BinaryCode from_bits(std::span<const int> bits);

  int length() const { return length_; }

  /// Returns -1 or +1.
  int bit(int i) const {
    return (words_[static_cast<std::size_t>(i) >> 6] >> (i & 63)) & 1u ? +1 : -1;
  }

  void set_bit(int i, int value);

  /// The ±1 real-vector representation used during training.
  RealVector to_reals() const;

  std::span<const std::uint64_t> words() const { return words_; }

  bool operator==(const BinaryCode&) const = default;

 private:
  int length_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Entry-wise sign of a real vector, sign(0) = +1.
BinaryCode sign_binarize(std::span<const double> h);

/// (K - ip) / 2. Throws DomainError when |ip| > K.
double hamming_from_inner(int code_bits, double ip);

/// Number of differing bit positions; equals hamming_from_inner applied to
/// the codes' ±1 inner product. Throws DimensionError on length mismatch.
int hamming_distance(const BinaryCode& a, const BinaryCode& b);

/// Inner product of two codes as ±1 vectors: K - 2 * hamming_distance.
int code_inner_product(const BinaryCode& a, const BinaryCode& b);

/// Cosine of two equal-length codes: inner product / K.
double code_cosine(const BinaryCode& a, const BinaryCode& b);

}  // namespace asymhash
