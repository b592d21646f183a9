#include "rerank_search/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <unordered_set>

#include <zlib.h>

#include "rerank_search/error.hpp"

namespace rerank_search {
namespace {

constexpr std::uint8_t kMagic[4] = {'V', 'S', 'I', 'X'};
// magic + version + metric + dim + count + model_id length
constexpr std::size_t kFixedHeader = 4 + 1 + 1 + 4 + 8 + 2;

double dot64(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return sum;
}

double norm64(std::span<const float> a) { return std::sqrt(dot64(a, a)); }

bool better(float sa, const std::string& ia, float sb, const std::string& ib) {
  if (sa != sb) return sa > sb;
  return ia < ib;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::CorruptPayload, "index file truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_magic_and_version(std::span<const std::uint8_t> bytes) {
  const auto n = std::min<std::size_t>(bytes.size(), 4);
  if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n), kMagic)) {
    throw Error(ErrorCode::BadMagic, "not a VSIX index file");
  }
  if (bytes.size() < 5) throw Error(ErrorCode::CorruptPayload, "index file truncated inside header");
  if (bytes[4] != kIndexFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported, "index format version " + std::to_string(bytes[4]) + " is not supported");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Cosine: return "cosine";
    case Metric::Dot: return "dot";
    case Metric::L2: return "l2";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "cosine") return Metric::Cosine;
  if (name == "dot") return Metric::Dot;
  if (name == "l2") return Metric::L2;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(name) + "'");
}

float similarity(std::span<const float> a, std::span<const float> b, Metric metric) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  switch (metric) {
    case Metric::Dot:
      return static_cast<float>(dot64(a, b));
    case Metric::Cosine: {
      const double na = norm64(a);
      const double nb = norm64(b);
      if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroNorm, "cosine of a zero vector is undefined");
      return static_cast<float>(dot64(a, b) / (na * nb));
    }
    case Metric::L2: {
      double sum = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
      }
      return static_cast<float>(-std::sqrt(sum));
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown metric");
}

FlatIndex::FlatIndex(std::vector<Entry> entries, std::size_t dim, Metric metric, std::string model_id)
    : entries_(std::move(entries)), dim_(dim), metric_(metric), model_id_(std::move(model_id)) {
  if (metric_ == Metric::Cosine) {
    norms_.reserve(entries_.size());
    for (const auto& e : entries_) {
      norms_.push_back(norm64(e.vector));
      if (norms_.back() == 0.0) throw Error(ErrorCode::ZeroNorm, "entry '" + e.record_id + "' has a zero vector");
    }
  }
}

FlatIndex FlatIndex::build(std::vector<std::pair<std::string, EmbeddingVector>> pairs, Metric metric) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "cannot build an index from zero vectors");
  const auto dim = pairs.front().second.dim();
  const auto model_id = pairs.front().second.model_id;
  if (dim == 0) throw Error(ErrorCode::DimMismatch, "vectors must have at least one dimension");

  std::unordered_set<std::string> ids;
  std::vector<Entry> entries;
  entries.reserve(pairs.size());
  for (auto& [id, vec] : pairs) {
    if (vec.dim() != dim) {
      throw Error(ErrorCode::DimMismatch, "entry '" + id + "' has dim " + std::to_string(vec.dim()) + ", expected " +
                                              std::to_string(dim));
    }
    if (!ids.insert(id).second) throw Error(ErrorCode::DuplicateId, "id '" + id + "' appears more than once");
    if (!std::all_of(vec.values.begin(), vec.values.end(), [](float v) { return std::isfinite(v); })) {
      throw Error(ErrorCode::NonFiniteValue, "entry '" + id + "' holds NaN or Inf");
    }
    entries.push_back({std::move(id), std::move(vec.values)});
  }
  return FlatIndex(std::move(entries), dim, metric, model_id);
}

Shortlist FlatIndex::search(const EmbeddingVector& query, std::size_t k) const { return search(query.values, k); }

Shortlist FlatIndex::search(std::span<const float> query, std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::InvalidK, "k must be at least 1");
  if (query.size() != dim_) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) + ", index dim " + std::to_string(dim_));
  }

  std::vector<float> scores(entries_.size());
  if (metric_ == Metric::Cosine) {
    const double qn = norm64(query);
    if (qn == 0.0) throw Error(ErrorCode::ZeroNorm, "query vector is all zeros");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      scores[i] = static_cast<float>(dot64(query, entries_[i].vector) / (qn * norms_[i]));
    }
  } else {
    for (std::size_t i = 0; i < entries_.size(); ++i) scores[i] = similarity(query, entries_[i].vector, metric_);
  }

  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto m = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return better(scores[a], entries_[a].record_id, scores[b], entries_[b].record_id);
                    });

  Shortlist out;
  out.reserve(m);
  for (std::size_t r = 0; r < m; ++r) out.push_back({entries_[order[r]].record_id, scores[order[r]], r + 1});
  return out;
}

bool operator==(const FlatIndex& a, const FlatIndex& b) {
  if (a.dim_ != b.dim_ || a.metric_ != b.metric_ || a.model_id_ != b.model_id_ || a.entries_.size() != b.entries_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.record_id != y.record_id || x.vector.size() != y.vector.size()) return false;
    for (std::size_t d = 0; d < x.vector.size(); ++d) {
      if (std::bit_cast<std::uint32_t>(x.vector[d]) != std::bit_cast<std::uint32_t>(y.vector[d])) return false;
    }
  }
  return true;
}

std::vector<std::uint8_t> encode_index(const FlatIndex& index) {
  if (index.model_id().size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "model id longer than 65535 bytes");
  if (index.dim() > 0xFFFFFFFFu) throw Error(ErrorCode::InvalidArgument, "dim does not fit in 32 bits");

  Writer w;
  for (const auto b : kMagic) w.u8(b);
  w.u8(kIndexFormatVersion);
  w.u8(static_cast<std::uint8_t>(index.metric()));
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.u64(index.size());
  w.u16(static_cast<std::uint16_t>(index.model_id().size()));
  w.bytes(index.model_id());
  for (const auto& e : index.entries()) {
    if (e.record_id.size() > 0xFFFF) throw Error(ErrorCode::InvalidArgument, "record id longer than 65535 bytes");
    w.u16(static_cast<std::uint16_t>(e.record_id.size()));
    w.bytes(e.record_id);
    for (const float v : e.vector) w.f32(v);
  }
  w.u32(crc32_of(w.buffer()));
  return std::move(w.buffer());
}

FlatIndex decode_index(std::span<const std::uint8_t> bytes) {
  check_magic_and_version(bytes);
  if (bytes.size() < kFixedHeader + 4) throw Error(ErrorCode::CorruptPayload, "index file truncated inside header");

  const auto body = bytes.first(bytes.size() - 4);
  Reader trailer(bytes.last(4));
  if (trailer.u32() != crc32_of(body)) throw Error(ErrorCode::CorruptPayload, "checksum mismatch");

  Reader r(body);
  r.str(5);
  const auto metric_byte = r.u8();
  if (metric_byte > static_cast<std::uint8_t>(Metric::L2)) {
    throw Error(ErrorCode::CorruptPayload, "unknown metric tag " + std::to_string(metric_byte));
  }
  const auto dim = r.u32();
  const auto count = r.u64();
  std::string model_id = r.str(r.u16());
  if (dim == 0 || count == 0) throw Error(ErrorCode::CorruptPayload, "empty index header");
  if (count > r.remaining() / (2 + 4ull * dim)) throw Error(ErrorCode::CorruptPayload, "entry count exceeds payload");

  std::vector<FlatIndex::Entry> entries;
  entries.reserve(count);
  std::unordered_set<std::string> ids;
  for (std::uint64_t i = 0; i < count; ++i) {
    FlatIndex::Entry e;
    e.record_id = r.str(r.u16());
    if (!ids.insert(e.record_id).second) throw Error(ErrorCode::CorruptPayload, "duplicate id '" + e.record_id + "'");
    e.vector.resize(dim);
    for (auto& v : e.vector) {
      v = r.f32();
      if (!std::isfinite(v)) throw Error(ErrorCode::CorruptPayload, "non-finite vector component");
    }
    entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptPayload, "trailing bytes after last entry");

  try {
    return FlatIndex(std::move(entries), dim, static_cast<Metric>(metric_byte), std::move(model_id));
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptPayload, e.what());
  }
}

void save_index(const FlatIndex& index, const std::filesystem::path& path) {
  const auto bytes = encode_index(index);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp + ": " + ec.message());
}

FlatIndex load_index(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_index(bytes);
}

IndexFileInfo inspect_index(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  check_magic_and_version(bytes);
  if (bytes.size() < kFixedHeader) throw Error(ErrorCode::CorruptPayload, "index file truncated inside header");

  Reader r(bytes);
  r.str(4);
  IndexFileInfo info;
  info.version = r.u8();
  const auto metric_byte = r.u8();
  if (metric_byte > static_cast<std::uint8_t>(Metric::L2)) {
    throw Error(ErrorCode::CorruptPayload, "unknown metric tag " + std::to_string(metric_byte));
  }
  info.metric = static_cast<Metric>(metric_byte);
  info.dim = r.u32();
  info.count = r.u64();
  info.model_id = r.str(r.u16());

  try {
    decode_index(bytes);
    info.crc_ok = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CorruptPayload) throw;
    info.crc_ok = false;
  }
  return info;
}

}  // namespace rerank_search
