#pragma once

#include <stdexcept>
#include <string>

namespace baker {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NoAdmissibleP : public Error {
 public:
  using Error::Error;
};

class NoNegativeWindow : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class DivideByZero : public Error {
 public:
  using Error::Error;
};

/// Raised when a log-space value does not fit the binary64 exponent range.
class RangeSignal : public Error {
 public:
  RangeSignal(const std::string& what, double lnmod) : Error(what), lnmod_(lnmod) {}
  double lnmod() const noexcept { return lnmod_; }

 private:
  double lnmod_;
};

class OverflowSignal : public RangeSignal {
 public:
  using RangeSignal::RangeSignal;
};

class UnderflowSignal : public RangeSignal {
 public:
  using RangeSignal::RangeSignal;
};

class TruncationInsufficient : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class BoundOnlyContext : public Error {
 public:
  using Error::Error;
};

class PoleError : public Error {
 public:
  using Error::Error;
};

class ScanInconclusive : public Error {
 public:
  using Error::Error;
};

class QuadratureStalled : public Error {
 public:
  using Error::Error;
};

class NoAdmissibleN : public Error {
 public:
  using Error::Error;
};

class FitFailed : public Error {
 public:
  using Error::Error;
};

class CriticalPoint : public Error {
 public:
  using Error::Error;
};

class NaNGuard : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace baker
