#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rerank_search {

using Field = std::pair<std::string, std::string>;

/// Which CSV columns identify a row and which feed the searchable document.
struct CorpusSchema {
  /// When absent, ids are zero-padded row ordinals: "r0001", "r0002", ...
  std::optional<std::string> id_column;
  std::vector<std::string> text_columns;
};

/// Renders "name: value" for each included field, in field order, joined by ", ".
std::string compose_document(std::span<const Field> fields, std::span<const std::string> included);

/// One corpus row. The document is always derived from the fields.
class Record {
 public:
  Record(std::string id, std::vector<Field> fields, std::span<const std::string> included);

  const std::string& id() const noexcept { return id_; }
  const std::vector<Field>& fields() const noexcept { return fields_; }
  const std::string& document() const noexcept { return document_; }

  friend bool operator==(const Record&, const Record&) = default;

 private:
  std::string id_;
  std::vector<Field> fields_;
  std::string document_;
};

std::string ordinal_id(std::size_t row);

/// Parses RFC 4180 CSV text (header row mandatory) into header + rows.
/// Throws MalformedCsv on quoting errors, ragged rows or invalid UTF-8.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable parse_csv(std::string_view text);

std::vector<Record> records_from_csv(std::string_view text, const CorpusSchema& schema);
std::vector<Record> load_csv(const std::filesystem::path& path, const CorpusSchema& schema);

/// Records plus id lookup; what the pipeline uses to turn matches into documents.
class Corpus {
 public:
  Corpus(std::vector<Record> records, CorpusSchema schema);

  const std::vector<Record>& records() const noexcept { return records_; }
  const CorpusSchema& schema() const noexcept { return schema_; }
  std::size_t size() const noexcept { return records_.size(); }
  const Record* find(std::string_view id) const;
  const Record& at(std::string_view id) const;

 private:
  std::vector<Record> records_;
  CorpusSchema schema_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// JSON sidecar written next to an index so search can render documents.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace rerank_search
