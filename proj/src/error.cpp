#include "rerank_search/error.hpp"

namespace rerank_search {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "missing column";
    case ErrorCode::DuplicateId: return "duplicate id";
    case ErrorCode::EmptyCorpus: return "empty corpus";
    case ErrorCode::MalformedCsv: return "malformed csv";
    case ErrorCode::EmptyText: return "empty text";
    case ErrorCode::AuthFailed: return "auth failed";
    case ErrorCode::RateLimited: return "rate limited";
    case ErrorCode::TransportError: return "transport error";
    case ErrorCode::BadResponse: return "bad response";
    case ErrorCode::DimMismatch: return "dim mismatch";
    case ErrorCode::EmptyInput: return "empty input";
    case ErrorCode::InvalidK: return "invalid k";
    case ErrorCode::ZeroNorm: return "zero norm";
    case ErrorCode::NonFiniteValue: return "non-finite value";
    case ErrorCode::IoError: return "io error";
    case ErrorCode::BadMagic: return "bad magic";
    case ErrorCode::VersionUnsupported: return "version unsupported";
    case ErrorCode::CorruptPayload: return "corrupt payload";
    case ErrorCode::ParseFailure: return "parse failure";
    case ErrorCode::ModelMismatch: return "model mismatch";
    case ErrorCode::UnknownRelevantId: return "unknown relevant id";
    case ErrorCode::InvalidArgument: return "invalid argument";
  }
  return "unknown error";
}

ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::AuthFailed:
    case ErrorCode::RateLimited:
    case ErrorCode::TransportError:
    case ErrorCode::BadResponse:
      return ErrorCategory::Provider;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidK:
      return ErrorCategory::Usage;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace rerank_search
