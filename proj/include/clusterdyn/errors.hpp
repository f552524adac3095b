#pragma once

#include <stdexcept>
#include <string>

namespace clusterdyn {

/// Structural or semantic problem with a model description.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

/// Runtime numerical failure (singular factorization, non-convergence).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace clusterdyn
