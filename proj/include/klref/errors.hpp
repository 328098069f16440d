#ifndef KLREF_ERRORS_HPP
#define KLREF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace klref {

// Malformed inputs, inconsistent sizes, invalid ids, nonconforming meshes.
class StructuralError : public std::runtime_error {
 public:
  explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// Parameter outside the admissible range of a formula.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Iterative solver failed to reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_ = 0.0;
};

// File system / parsing problems.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// A violated internal invariant; indicates a bug, not bad user input.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

// Allocation failure annotated with the level that triggered it.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, int level)
      : std::runtime_error(what), level_(level) {}
  int level() const { return level_; }

 private:
  int level_ = -1;
};

}  // namespace klref

#endif
