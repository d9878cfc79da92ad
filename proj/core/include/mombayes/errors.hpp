#pragma once

#include <stdexcept>
#include <string>

namespace mombayes {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside the compact box, or a malformed specification.
class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnsupportedLoss : public Error {
 public:
  using Error::Error;
};

/// Raised at the kink of a nonsmooth likelihood (Laplace at x == theta).
class NonDifferentiablePoint : public Error {
 public:
  using Error::Error;
};

class EmptyData : public Error {
 public:
  using Error::Error;
};

class InvalidK : public Error {
 public:
  using Error::Error;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

/// Every block sits in the flat part of rho; the implicit gradient is undefined.
class FlatScore : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientDraws : public Error {
 public:
  using Error::Error;
};

class SingularCovariance : public Error {
 public:
  using Error::Error;
};

class TooManyOutliers : public Error {
 public:
  using Error::Error;
};

}  // namespace mombayes
