#pragma once

#include <stdexcept>
#include <string>

namespace snl {

enum class ErrorKind {
  MissingFile,
  ParseError,
  UnknownNode,
  EdgeOnNullNode,
  DuplicateEdge,
  SingleClassDatabase,
  LengthMismatch,
  KTooLarge,
  AsymmetricInput,
  DimensionMismatch,
  ZeroMatrix,
  RankDeficient,
  CTooLarge,
  ConfigInvalid,
  TooFewPerClass,
  SingleClassFold,
  DegenerateGroundTruth,
  IoError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::EdgeOnNullNode: return "EdgeOnNullNode";
    case ErrorKind::DuplicateEdge: return "DuplicateEdge";
    case ErrorKind::SingleClassDatabase: return "SingleClassDatabase";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::AsymmetricInput: return "AsymmetricInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroMatrix: return "ZeroMatrix";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::CTooLarge: return "CTooLarge";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::TooFewPerClass: return "TooFewPerClass";
    case ErrorKind::SingleClassFold: return "SingleClassFold";
    case ErrorKind::DegenerateGroundTruth: return "DegenerateGroundTruth";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace snl
