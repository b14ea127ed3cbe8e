#pragma once

#include <stdexcept>
#include <string>

namespace oninfer {

enum class Errc {
  InvalidArgument,
  NegativeDimension,
  CycleDetected,
  ShapeMismatch,
  MissingInput,
  ParseError,
  UnsupportedVersion,
  BadMagic,
  MissingTensor,
  EmptyCalibrationSet,
  UncoveredEdge,
  UnmappedOffset,
  DmaOutOfBounds,
  Timeout,
  RejectedBusy,
  ModelLoadError,
  UnsupportedBackend,
  ReferenceFileMissing,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NegativeDimension: return "NegativeDimension";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingInput: return "MissingInput";
    case Errc::ParseError: return "ParseError";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::BadMagic: return "BadMagic";
    case Errc::MissingTensor: return "MissingTensor";
    case Errc::EmptyCalibrationSet: return "EmptyCalibrationSet";
    case Errc::UncoveredEdge: return "UncoveredEdge";
    case Errc::UnmappedOffset: return "UnmappedOffset";
    case Errc::DmaOutOfBounds: return "DmaOutOfBounds";
    case Errc::Timeout: return "Timeout";
    case Errc::RejectedBusy: return "RejectedBusy";
    case Errc::ModelLoadError: return "ModelLoadError";
    case Errc::UnsupportedBackend: return "UnsupportedBackend";
    case Errc::ReferenceFileMissing: return "ReferenceFileMissing";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace oninfer
