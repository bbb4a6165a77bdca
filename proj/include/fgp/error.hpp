#pragma once

#include <stdexcept>
#include <string>

namespace fgp {

/// Bad user input: malformed data, dimension mismatch, invalid parameters.
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string &what) : std::runtime_error(what) {}
};

/// Numerical failure such as a non-positive log argument.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string &what)
      : std::runtime_error(what) {}
};

} // namespace fgp
