#include "rerank_search/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rerank_search/error.hpp"

namespace rerank_search {
namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not in CSV header");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

std::string compose_document(std::span<const Field> fields, std::span<const std::string> included) {
  std::string out;
  bool first = true;
  for (const auto& [name, value] : fields) {
    if (std::find(included.begin(), included.end(), name) == included.end()) continue;
    if (!first) out += ", ";
    out += name;
    out += ": ";
    out += value;
    first = false;
  }
  return out;
}

Record::Record(std::string id, std::vector<Field> fields, std::span<const std::string> included)
    : id_(std::move(id)), fields_(std::move(fields)), document_(compose_document(fields_, included)) {}

std::string ordinal_id(std::size_t row) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%04zu", row);
  return buf;
}

CsvTable parse_csv(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  if (!valid_utf8(text)) throw Error(ErrorCode::MalformedCsv, "input is not valid UTF-8");

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  std::size_t line = 1;
  std::size_t i = 0;
  const auto n = text.size();

  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    rows.push_back(std::move(row));
    row.clear();
  };

  while (i < n) {
    if (text[i] == '"') {
      // quoted field: runs to the closing quote, "" is an escaped quote
      ++i;
      for (;;) {
        if (i >= n) throw Error(ErrorCode::MalformedCsv, "unterminated quoted field starting on line " + std::to_string(line));
        const char c = text[i];
        if (c == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (c == '\n') ++line;
        field += c;
        ++i;
      }
      if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        throw Error(ErrorCode::MalformedCsv, "unexpected character after closing quote on line " + std::to_string(line));
      }
    } else {
      while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        if (text[i] == '"') throw Error(ErrorCode::MalformedCsv, "stray quote in unquoted field on line " + std::to_string(line));
        field += text[i++];
      }
    }

    if (i >= n) {
      end_row();
      break;
    }
    if (text[i] == ',') {
      row.push_back(std::move(field));
      field.clear();
      ++i;
      if (i == n) end_row();
      continue;
    }
    if (text[i] == '\r') {
      if (i + 1 < n && text[i + 1] == '\n') ++i;
    }
    ++i;
    ++line;
    end_row();
  }

  if (rows.empty()) throw Error(ErrorCode::MalformedCsv, "missing header row");

  CsvTable table;
  table.header = std::move(rows.front());
  std::set<std::string> seen(table.header.begin(), table.header.end());
  if (seen.size() != table.header.size()) throw Error(ErrorCode::MalformedCsv, "duplicate column name in header");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != table.header.size()) {
      throw Error(ErrorCode::MalformedCsv, "data row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                               " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(rows[r]));
  }
  return table;
}

std::vector<Record> records_from_csv(std::string_view text, const CorpusSchema& schema) {
  if (schema.text_columns.empty()) throw Error(ErrorCode::InvalidArgument, "schema needs at least one text column");
  auto table = parse_csv(text);

  for (const auto& col : schema.text_columns) column_of(table.header, col);
  std::optional<std::size_t> id_col;
  if (schema.id_column) id_col = column_of(table.header, *schema.id_column);

  if (table.rows.empty()) throw Error(ErrorCode::EmptyCorpus, "CSV has a header but no data rows");

  std::vector<Record> records;
  records.reserve(table.rows.size());
  std::set<std::string, std::less<>> ids;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto& cells = table.rows[r];
    std::string id = id_col ? cells[*id_col] : ordinal_id(r + 1);
    if (id.empty()) throw Error(ErrorCode::MalformedCsv, "empty id on data row " + std::to_string(r + 1));
    if (!ids.insert(id).second) throw Error(ErrorCode::DuplicateId, "id '" + id + "' appears more than once");

    std::vector<Field> fields;
    fields.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) fields.emplace_back(table.header[c], std::move(cells[c]));
    records.emplace_back(std::move(id), std::move(fields), schema.text_columns);
  }
  return records;
}

std::vector<Record> load_csv(const std::filesystem::path& path, const CorpusSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return records_from_csv(text, schema);
}

Corpus::Corpus(std::vector<Record> records, CorpusSchema schema)
    : records_(std::move(records)), schema_(std::move(schema)) {
  by_id_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!by_id_.emplace(records_[i].id(), i).second) {
      throw Error(ErrorCode::DuplicateId, "id '" + records_[i].id() + "' appears more than once");
    }
  }
}

const Record* Corpus::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

const Record& Corpus::at(std::string_view id) const {
  if (const auto* r = find(id)) return *r;
  throw Error(ErrorCode::UnknownRelevantId, "no record with id '" + std::string(id) + "'");
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  nlohmann::json j;
  j["schema"]["id_column"] = corpus.schema().id_column ? nlohmann::json(*corpus.schema().id_column) : nlohmann::json();
  j["schema"]["text_columns"] = corpus.schema().text_columns;
  auto& recs = j["records"] = nlohmann::json::array();
  for (const auto& r : corpus.records()) recs.push_back({{"id", r.id()}, {"fields", r.fields()}});

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
    out << j.dump(1) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp + ": " + ec.message());
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    CorpusSchema schema;
    if (!j.at("schema").at("id_column").is_null()) schema.id_column = j["schema"]["id_column"].get<std::string>();
    schema.text_columns = j.at("schema").at("text_columns").get<std::vector<std::string>>();
    std::vector<Record> records;
    for (const auto& r : j.at("records")) {
      records.emplace_back(r.at("id").get<std::string>(), r.at("fields").get<std::vector<Field>>(), schema.text_columns);
    }
    return Corpus(std::move(records), std::move(schema));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptPayload, "corpus file " + path.string() + ": " + e.what());
  }
}

}  // namespace rerank_search
