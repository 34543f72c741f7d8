#include "progviz/error.hpp"

namespace progviz {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::EncodingError: return "EncodingError";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::InvalidChunkSize: return "InvalidChunkSize";
    case ErrorCode::CorpusFormat: return "CorpusFormat";
    case ErrorCode::DuplicateDocument: return "DuplicateDocument";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingSlot: return "MissingSlot";
    case ErrorCode::EmptyAnswer: return "EmptyAnswer";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::NegativeInput: return "NegativeInput";
    case ErrorCode::EmptyLedger: return "EmptyLedger";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::PipelineAborted: return "PipelineAborted";
    case ErrorCode::ManifestStale: return "ManifestStale";
    case ErrorCode::ManifestCorrupt: return "ManifestCorrupt";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::LocaleGap: return "LocaleGap";
    case ErrorCode::IncompleteManifest: return "IncompleteManifest";
  }
  return "Unknown";
}

}  // namespace progviz
