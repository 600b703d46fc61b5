#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace stheat {

// Precondition violated by the caller (bad sizes, out-of-range parameters).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative or root-finding procedure failed to converge.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResourceLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pivot block of a block-tridiagonal factorization is exactly singular.
class SingularSystem : public std::runtime_error {
 public:
  SingularSystem(std::size_t element, const std::string& what)
      : std::runtime_error(what), element_(element) {}
  std::size_t element() const noexcept { return element_; }

 private:
  std::size_t element_;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace stheat
