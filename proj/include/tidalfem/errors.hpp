#ifndef TIDALFEM_ERRORS_HPP
#define TIDALFEM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tidalfem {

// Error categories map onto distinct CLI exit codes.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ResourceError : std::runtime_error {
  explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Carries the last residual so callers can report how close the solve got.
struct SolverError : std::runtime_error {
  SolverError(const std::string& msg, double residual_, int iterations_)
      : std::runtime_error(msg), residual(residual_), iterations(iterations_) {}
  double residual;
  int iterations;
};

}  // namespace tidalfem

#endif
