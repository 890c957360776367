#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace sweepmp {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used in the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }
  /// JSON pointer into the problem file that produced the error, if any.
  const std::string& pointer() const noexcept { return pointer_; }
  void set_pointer(std::string pointer) { pointer_ = std::move(pointer); }
  /// Position in the expression source for parse-time errors.
  std::optional<std::size_t> source_offset() const noexcept { return source_offset_; }

 protected:
  void set_source_offset(std::size_t offset) { source_offset_ = offset; }

 private:
  std::string kind_;
  std::string pointer_;
  std::optional<std::size_t> source_offset_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error("parse_error", what + " at offset " + std::to_string(offset)), offset_(offset) {
    set_source_offset(offset);
  }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownVariable : public Error {
 public:
  UnknownVariable(const std::string& name, std::size_t offset)
      : Error("unknown_variable",
              "unknown variable '" + name + "' at offset " + std::to_string(offset)),
        name_(name),
        offset_(offset) {
    set_source_offset(offset);
  }
  const std::string& name() const noexcept { return name_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string name_;
  std::size_t offset_;
};

class UnknownFunction : public Error {
 public:
  UnknownFunction(const std::string& name, std::size_t offset)
      : Error("unknown_function",
              "unknown function '" + name + "' at offset " + std::to_string(offset)) {
    set_source_offset(offset);
  }
};

class UnboundVariable : public Error {
 public:
  explicit UnboundVariable(const std::string& name)
      : Error("unbound_variable", "variable '" + name + "' is not bound") {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain_error", what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("dimension_mismatch", what) {}
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& pointer, const std::string& what)
      : Error("schema_error", (pointer.empty() ? "/" : pointer) + ": " + what) {
    set_pointer(pointer);
  }
};

class ProjectionFailure : public Error {
 public:
  explicit ProjectionFailure(const std::string& what) : Error("projection_failure", what) {}
};

class StepUnderflow : public Error {
 public:
  explicit StepUnderflow(const std::string& what) : Error("step_underflow", what) {}
};

class InvarianceViolation : public Error {
 public:
  explicit InvarianceViolation(const std::string& what) : Error("invariance_violation", what) {}
};

class ScheduleInfeasible : public Error {
 public:
  explicit ScheduleInfeasible(const std::string& what) : Error("schedule_infeasible", what) {}
};

class UnsupportedGeometry : public Error {
 public:
  explicit UnsupportedGeometry(const std::string& what) : Error("unsupported_geometry", what) {}
};

class InvalidParameters : public Error {
 public:
  explicit InvalidParameters(const std::string& what) : Error("invalid_parameters", what) {}
};

class NoFeasibleSwitch : public Error {
 public:
  explicit NoFeasibleSwitch(const std::string& what) : Error("no_feasible_switch", what) {}
};

}  // namespace sweepmp
