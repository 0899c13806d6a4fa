#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gckn {

/// Machine-readable failure categories. The CLI prints `category_name(kind)`
/// on stderr so callers can dispatch without parsing messages.
enum class ErrorKind {
  IndexOutOfRange,
  SelfLoop,
  DuplicateEdge,
  AttributeShapeMismatch,
  UnknownLabel,
  MissingFile,
  InconsistentNodeCount,
  NonContiguousGraphIds,
  ParseError,
  TooFewSamples,
  ContinuousAttributesUnsupported,
  DimensionMismatch,
  EigenFailure,
  UnsupportedFlavor,
  PathCapExceeded,
  SegmentMismatch,
  IoError,
  SchemaVersionMismatch,
  CorruptModel,
  EmptyPopulation,
  DegenerateSample,
  SingleClass,
  NonFinite,
  ShapeMismatch,
  EmptySelection,
  InvalidArgument,
};

std::string_view category_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(category_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Warnings go to stderr unless silenced (tests silence them).
void warn(std::string_view message);
void set_warnings_enabled(bool enabled);

}  // namespace gckn
