#pragma once

#include <stdexcept>
#include <string>

namespace resync {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// QR factorization of a retraction argument is rank deficient.
class DegenerateFactorization : public Error {
 public:
  using Error::Error;
};

/// A matrix that must have full (or near-full) rank does not.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Two viewing directions are (numerically) parallel: the common line of the
/// pair is undefined.
class DegeneratePair : public Error {
 public:
  DegeneratePair(int i, int j)
      : Error("degenerate pair (" + std::to_string(i) + "," +
              std::to_string(j) + "): parallel viewing directions"),
        i(i),
        j(j) {}
  int i;
  int j;
};

/// The symmetric eigensolver did not converge.
class EigenFailure : public Error {
 public:
  using Error::Error;
};

/// Mismatched problem sizes (K of a rotation set vs. a common-line set, ...).
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Inconsistent solver configuration.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace resync
