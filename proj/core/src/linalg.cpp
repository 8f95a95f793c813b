#include "asymhash/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace asymhash {

double inner_product(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("inner_product: length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> a) {
  double acc = 0.0;
  for (double x : a) acc += x * x;
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double ip = inner_product(a, b);
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateVectorError("cosine: zero-norm operand");
  }
  return std::clamp(ip / (na * nb), -1.0, 1.0);
}

BinaryCode BinaryCode::from_bits(std::span<const int> bits) {
  BinaryCode code(static_cast<int>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != -1 && bits[i] != 1) {
      throw DomainError("BinaryCode: bit " + std::to_string(i) + " is " +
                        std::to_string(bits[i]) + ", expected -1 or +1");
    }
    code.set_bit(static_cast<int>(i), bits[i]);
  }
  return code;
}

void BinaryCode::set_bit(int i, int value) {
  if (value != -1 && value != 1) {
    throw DomainError("BinaryCode::set_bit: expected -1 or +1");
  }
  const std::uint64_t mask = std::uint64_t{1} << (i & 63);
  if (value > 0) {
    words_[static_cast<std::size_t>(i) >> 6] |= mask;
  } else {
    words_[static_cast<std::size_t>(i) >> 6] &= ~mask;
  }
}

RealVector BinaryCode::to_reals() const {
  RealVector out(static_cast<std::size_t>(length_));
  for (int i = 0; i < length_; ++i) out[static_cast<std::size_t>(i)] = bit(i);
  return out;
}

BinaryCode sign_binarize(std::span<const double> h) {
  BinaryCode code(static_cast<int>(h.size()));
  for (std::size_t i = 0; i < h.size(); ++i) {
    code.set_bit(static_cast<int>(i), h[i] < 0.0 ? -1 : +1);
  }
  return code;
}

double hamming_from_inner(int code_bits, double ip) {
  if (std::abs(ip) > static_cast<double>(code_bits)) {
    throw DomainError("hamming_from_inner: |ip| = " + std::to_string(std::abs(ip)) +
                      " exceeds code length " + std::to_string(code_bits));
  }
  return (static_cast<double>(code_bits) - ip) / 2.0;
}

int hamming_distance(const BinaryCode& a, const BinaryCode& b) {
  if (a.length() != b.length()) {
    throw DimensionError("hamming_distance: code length mismatch");
  }
  // Padding bits are kept zero on both sides, so XOR never sees them.
  int dist = 0;
  auto wa = a.words();
  auto wb = b.words();
  for (std::size_t w = 0; w < wa.size(); ++w) {
    dist += std::popcount(wa[w] ^ wb[w]);
  }
  return dist;
}

int code_inner_product(const BinaryCode& a, const BinaryCode& b) {
  return a.length() - 2 * hamming_distance(a, b);
}

double code_cosine(const BinaryCode& a, const BinaryCode& b) {
  if (a.length() == 0) throw DegenerateVectorError("code_cosine: empty code");
  return static_cast<double>(code_inner_product(a, b)) / static_cast<double>(a.length());
}

}  // namespace asymhash
