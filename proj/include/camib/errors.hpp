#ifndef CAMIB_ERRORS_HPP
#define CAMIB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace camib {

// Base class for everything thrown by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Caller handed us something invalid (bad shape, bad flag, bad config key).
class ArgumentError : public Error {
public:
  explicit ArgumentError(const std::string& what) : Error(what) {}
};

// Config-file validation failure. Subtype of ArgumentError so generic
// handlers treat it as caller error.
class ConfigError : public ArgumentError {
public:
  explicit ConfigError(const std::string& what) : ArgumentError(what) {}
};

// File could not be read/written/parsed.
class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// A computation produced a non-finite value or otherwise failed numerically.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

}  // namespace camib

#endif  // CAMIB_ERRORS_HPP
