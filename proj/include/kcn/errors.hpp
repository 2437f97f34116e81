#pragma once

#include <stdexcept>
#include <string>

namespace kcn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter and regime errors.
class InvalidParams : public Error { public: using Error::Error; };
class BoundaryExponent : public Error { public: using Error::Error; };
class RegimeMismatch : public Error { public: using Error::Error; };
class ThresholdViolated : public Error { public: using Error::Error; };
class DiscriminantNonpositive : public Error { public: using Error::Error; };

// Field and operator errors.
class ZeroFunction : public Error { public: using Error::Error; };
class DilationOutOfRange : public Error { public: using Error::Error; };
class GridMismatch : public Error { public: using Error::Error; };
class QuadratureFailure : public Error { public: using Error::Error; };
class ExponentOutOfRange : public Error { public: using Error::Error; };
class MassMismatch : public Error { public: using Error::Error; };
class CacheMismatch : public Error { public: using Error::Error; };

// Fiber geometry errors.
class ExponentPattern : public Error { public: using Error::Error; };
class ConditionFailed : public Error { public: using Error::Error; };
class StructureMismatch : public Error { public: using Error::Error; };

class NotConverged : public Error { public: using Error::Error; };

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace kcn
