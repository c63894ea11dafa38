#pragma once

#include <stdexcept>
#include <string>

namespace tdkps {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Data and file-format problems.
class FormatError : public Error { public: using Error::Error; };
class LengthError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class BoundsError : public Error { public: using Error::Error; };
class DimensionError : public Error { public: using Error::Error; };

// Caller misuse: bad arguments, unknown names, malformed configs.
class ArgumentError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

// Numerical failures.
class DegenerateInputError : public Error { public: using Error::Error; };
class SingularityError : public Error { public: using Error::Error; };
class ZeroVarianceError : public Error { public: using Error::Error; };

}  // namespace tdkps
