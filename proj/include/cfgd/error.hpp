// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Error type shared by every module.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfgd {

enum class ErrorKind {
  UnknownLabel,
  DuplicateBond,
  SelfLoop,
  EmptyDataset,
  UnbalancedParenthesis,
  UnclosedRing,
  UnknownAtom,
  BondConflict,
  EmptyInput,
  SyntaxError,
  UnknownProperty,
  InvalidT,
  BadMarginal,
  StepOutOfRange,
  ZeroMass,
  ShapeMismatch,
  Diverged,
  DimensionMismatch,
  NoValidSamples,
  DatasetError,
  CheckpointError,
  ConfigError,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::DuplicateBond: return "DuplicateBond";
    case ErrorKind::SelfLoop: return "SelfLoop";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::UnbalancedParenthesis: return "UnbalancedParenthesis";
    case ErrorKind::UnclosedRing: return "UnclosedRing";
    case ErrorKind::UnknownAtom: return "UnknownAtom";
    case ErrorKind::BondConflict: return "BondConflict";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownProperty: return "UnknownProperty";
    case ErrorKind::InvalidT: return "InvalidT";
    case ErrorKind::BadMarginal: return "BadMarginal";
    case ErrorKind::StepOutOfRange: return "StepOutOfRange";
    case ErrorKind::ZeroMass: return "ZeroMass";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NoValidSamples: return "NoValidSamples";
    case ErrorKind::DatasetError: return "DatasetError";
    case ErrorKind::CheckpointError: return "CheckpointError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cfgd
