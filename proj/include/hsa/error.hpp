#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsa {

enum class ErrorCode {
  // parsing
  UnbalancedParenthesis,
  UnmatchedRingBond,
  UnknownAtomSymbol,
  DisconnectedInput,
  EmptyInput,
  // tensors and autodiff
  ShapeMismatch,
  NaNInput,
  EmptyMask,
  NotScalar,
  DetachedFromTape,
  // data and training
  EmptyCorpus,
  EmptyDataset,
  TargetWidthMismatch,
  InvalidToggleCombination,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the SMILES reader; carries the byte offset of the offending character.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t offset, const std::string& what)
      : Error(code, what + " at byte " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace hsa
