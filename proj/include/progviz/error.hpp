#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace progviz {

enum class ErrorCode {
  // corpus
  FileNotFound,
  EncodingError,
  EmptyDocument,
  InvalidChunkSize,
  CorpusFormat,
  DuplicateDocument,
  // prompts / parse
  EmptyInput,
  MissingSlot,
  EmptyAnswer,
  ContractViolation,
  // telemetry
  NegativeInput,
  EmptyLedger,
  InvalidConfig,
  // pipeline
  PipelineAborted,
  ManifestStale,
  ManifestCorrupt,
  // site
  MissingArtifact,
  LocaleGap,
  IncompleteManifest,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries a machine-checkable code.
// Backend transport failures use BackendError (backend.hpp) instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace progviz
