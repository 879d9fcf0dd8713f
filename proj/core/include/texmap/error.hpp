#pragma once

#include <stdexcept>
#include <string>

namespace texmap {

// Bad or missing user input (files, manifests, options). CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A violated internal consistency requirement. CLI exit code 2.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace texmap
