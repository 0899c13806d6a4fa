#include "gckn/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace gckn {

std::string_view category_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::SelfLoop: return "SelfLoop";
    case ErrorKind::DuplicateEdge: return "DuplicateEdge";
    case ErrorKind::AttributeShapeMismatch: return "AttributeShapeMismatch";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::InconsistentNodeCount: return "InconsistentNodeCount";
    case ErrorKind::NonContiguousGraphIds: return "NonContiguousGraphIds";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::ContinuousAttributesUnsupported: return "ContinuousAttributesUnsupported";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::UnsupportedFlavor: return "UnsupportedFlavor";
    case ErrorKind::PathCapExceeded: return "PathCapExceeded";
    case ErrorKind::SegmentMismatch: return "SegmentMismatch";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::CorruptModel: return "CorruptModel";
    case ErrorKind::EmptyPopulation: return "EmptyPopulation";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptySelection: return "EmptySelection";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {
std::atomic<bool> g_warnings{true};
std::mutex g_warn_mutex;
}  // namespace

void set_warnings_enabled(bool enabled) { g_warnings.store(enabled); }

void warn(std::string_view message) {
  if (!g_warnings.load()) return;
  std::lock_guard lock(g_warn_mutex);
  std::cerr << "warning: " << message << '\n';
}

}  // namespace gckn
