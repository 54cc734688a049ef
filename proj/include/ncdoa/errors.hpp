#pragma once

#include <stdexcept>
#include <string>

namespace ncdoa {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid geometry, scenario, grid or config file content. Messages name the
// offending field where one exists.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The lifted solution is identically zero, so no source can be recovered.
class DegenerateSolution : public Error {
 public:
  using Error::Error;
};

// A sub-array's rank-1 factor entry vanished and its phase is undefined.
class PhaseUndetermined : public Error {
 public:
  PhaseUndetermined(std::size_t subarray, const std::string& what)
      : Error(what), subarray_(subarray) {}
  std::size_t subarray() const { return subarray_; }

 private:
  std::size_t subarray_;
};

// Non-coherent MUSIC needs every sub-array to share one ULA layout.
class UnsupportedGeometry : public Error {
 public:
  using Error::Error;
};

// SVD / eigensolver failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ncdoa
