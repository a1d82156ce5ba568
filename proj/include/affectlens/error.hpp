#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affectlens {

enum class ErrorKind {
  // storage / validation
  MissingFile,
  ShapeMismatch,
  RowSumViolation,
  UnknownEmotionLabel,
  InvalidBundle,
  ParseError,
  IoFailure,
  // attention features
  NoValidQueries,
  SequenceTooShort,
  NotADistribution,
  TooFewLayers,
  ZeroVector,
  TooFewHeads,
  KTooLarge,
  EmptyTaskRegion,
  // aggregation / statistics
  EmptyInput,
  TooFewRows,
  SingleClassInput,
  ClassTooSmall,
  LengthMismatch,
  InvalidLabels,
  GroupTooSmall,
  NonFiniteInput,
  // latent space
  RankTooLarge,
  DegenerateData,
  DimensionMismatch,
  LabelSetMismatch,
  DegenerateCentroid,
  ZeroDifference,
  // segmenter
  EmptyAfterNormalization,
  // cli
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::RowSumViolation: return "RowSumViolation";
    case ErrorKind::UnknownEmotionLabel: return "UnknownEmotionLabel";
    case ErrorKind::InvalidBundle: return "InvalidBundle";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::NoValidQueries: return "NoValidQueries";
    case ErrorKind::SequenceTooShort: return "SequenceTooShort";
    case ErrorKind::NotADistribution: return "NotADistribution";
    case ErrorKind::TooFewLayers: return "TooFewLayers";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::TooFewHeads: return "TooFewHeads";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::EmptyTaskRegion: return "EmptyTaskRegion";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::SingleClassInput: return "SingleClassInput";
    case ErrorKind::ClassTooSmall: return "ClassTooSmall";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidLabels: return "InvalidLabels";
    case ErrorKind::GroupTooSmall: return "GroupTooSmall";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::RankTooLarge: return "RankTooLarge";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LabelSetMismatch: return "LabelSetMismatch";
    case ErrorKind::DegenerateCentroid: return "DegenerateCentroid";
    case ErrorKind::ZeroDifference: return "ZeroDifference";
    case ErrorKind::EmptyAfterNormalization: return "EmptyAfterNormalization";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace affectlens
