#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace df4lcz {

enum class ErrorKind {
  dimension,
  index,
  domain,
  format,
  input,
  consistency,
  singular_degree,
  degenerate_batch,
  numeric,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::index: return "index";
    case ErrorKind::domain: return "domain";
    case ErrorKind::format: return "format";
    case ErrorKind::input: return "input";
    case ErrorKind::consistency: return "consistency";
    case ErrorKind::singular_degree: return "singular_degree";
    case ErrorKind::degenerate_batch: return "degenerate_batch";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

/// Base of every error raised by the library. `kind()` lets callers (the CLI
/// in particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
 public:
  explicit KindError(const std::string& what) : Error(K, what) {}
};

using DimensionError = KindError<ErrorKind::dimension>;
using IndexError = KindError<ErrorKind::index>;
using DomainError = KindError<ErrorKind::domain>;
using FormatError = KindError<ErrorKind::format>;
using InputError = KindError<ErrorKind::input>;
using ConsistencyError = KindError<ErrorKind::consistency>;
using SingularDegreeError = KindError<ErrorKind::singular_degree>;
using DegenerateBatchError = KindError<ErrorKind::degenerate_batch>;
using NumericError = KindError<ErrorKind::numeric>;

}  // namespace df4lcz
