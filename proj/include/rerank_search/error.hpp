#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rerank_search {

enum class ErrorCode {
  // ingest
  MissingColumn,
  DuplicateId,
  EmptyCorpus,
  MalformedCsv,
  // embedder
  EmptyText,
  AuthFailed,
  RateLimited,
  TransportError,
  BadResponse,
  // index
  DimMismatch,
  EmptyInput,
  InvalidK,
  ZeroNorm,
  NonFiniteValue,
  IoError,
  BadMagic,
  VersionUnsupported,
  CorruptPayload,
  // reranker
  ParseFailure,
  // pipeline / eval
  ModelMismatch,
  UnknownRelevantId,
  InvalidArgument,
};

/// Broad class of an error, used by the CLI to pick an exit code.
enum class ErrorCategory { Usage, Data, Provider };

std::string_view to_string(ErrorCode code);
ErrorCategory category(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rerank_search
