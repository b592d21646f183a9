#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rerank_search/embedder.hpp"

namespace rerank_search {

enum class Metric : std::uint8_t { Cosine = 0, Dot = 1, L2 = 2 };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view name);

/// Higher is better for every metric; l2 reports the negated distance.
/// Sums run in double and the result is rounded to float.
float similarity(std::span<const float> a, std::span<const float> b, Metric metric);

struct ScoredMatch {
  std::string record_id;
  float score = 0.0f;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const ScoredMatch&, const ScoredMatch&) = default;
};

using Shortlist = std::vector<ScoredMatch>;

/// Exact brute-force vector store. Immutable once built.
class FlatIndex {
 public:
  struct Entry {
    std::string record_id;
    std::vector<float> vector;
  };

  /// Throws EmptyInput, DimMismatch, DuplicateId, NonFiniteValue; ZeroNorm
  /// when a cosine index is given an all-zero vector.
  static FlatIndex build(std::vector<std::pair<std::string, EmbeddingVector>> pairs, Metric metric = Metric::Cosine);

  /// min(k, size()) best entries by (score desc, record_id asc).
  Shortlist search(const EmbeddingVector& query, std::size_t k) const;
  Shortlist search(std::span<const float> query, std::size_t k) const;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  Metric metric() const noexcept { return metric_; }
  const std::string& model_id() const noexcept { return model_id_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  friend bool operator==(const FlatIndex& a, const FlatIndex& b);

 private:
  FlatIndex(std::vector<Entry> entries, std::size_t dim, Metric metric, std::string model_id);

  std::vector<Entry> entries_;
  std::vector<double> norms_;  // cached for cosine
  std::size_t dim_;
  Metric metric_;
  std::string model_id_;

  friend FlatIndex decode_index(std::span<const std::uint8_t> bytes);
};

inline constexpr std::uint8_t kIndexFormatVersion = 1;

/// Little-endian "VSIX" format with a trailing CRC32.
std::vector<std::uint8_t> encode_index(const FlatIndex& index);
/// Throws BadMagic, VersionUnsupported or CorruptPayload.
FlatIndex decode_index(std::span<const std::uint8_t> bytes);

/// Writes to a temporary sibling and renames over `path`.
void save_index(const FlatIndex& index, const std::filesystem::path& path);
FlatIndex load_index(const std::filesystem::path& path);

struct IndexFileInfo {
  std::uint8_t version = 0;
  Metric metric = Metric::Cosine;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::string model_id;
  bool crc_ok = false;
};

/// Header summary for `inspect`; throws the same errors as load_index.
IndexFileInfo inspect_index(const std::filesystem::path& path);

}  // namespace rerank_search
