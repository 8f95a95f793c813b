#pragma once

#include <stdexcept>

namespace asymhash {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (vector lengths, matrix dims, code lengths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A zero-norm vector reached a cosine evaluation.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (CSV cell, checkpoint header, ...).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Dataset invariant violation (all-zero label row, row-count mismatch, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration, rejected before any work is done.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or other numeric breakdown during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Dictionary lookup of an unseen label vector.
class LookupError : public Error {
 public:
  using Error::Error;
};

}  // namespace asymhash
