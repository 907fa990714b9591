#include "livinglab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "livinglab/error.hpp"

namespace livinglab {

using nlohmann::json;

std::string_view to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::publication:
      return "publication";
    case RecordKind::research_data:
      return "research_data";
  }
  return "publication";
}

RecordKind parse_record_kind(std::string_view text) {
  if (text == "publication") return RecordKind::publication;
  if (text == "research_data") return RecordKind::research_data;
  throw ValidationError("unknown kind '" + std::string(text) +
                        "' (expected publication or research_data)");
}

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                             : static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> record_tokens(const Record& record) {
  auto tokens = tokenize(record.title);
  auto append = [&tokens](std::string_view text) {
    auto more = tokenize(text);
    tokens.insert(tokens.end(), std::make_move_iterator(more.begin()),
                  std::make_move_iterator(more.end()));
  };
  append(record.abstract);
  for (const auto& topic : record.topics) append(topic);
  return tokens;
}

Corpus::Corpus(std::string site_id, std::vector<Record> records)
    : site_id_(std::move(site_id)), records_(std::move(records)) {
  if (records_.empty()) throw ValidationError("empty corpus for site '" + site_id_ + "'");
  by_id_.reserve(records_.size());
  term_vectors_.resize(records_.size());
  doc_lengths_.resize(records_.size());

  std::uint64_t total_length = 0;
  for (std::uint32_t doc = 0; doc < records_.size(); ++doc) {
    const auto& record = records_[doc];
    if (record.id.empty()) throw ValidationError("missing/empty id");
    if (!by_id_.emplace(record.id, doc).second) {
      throw ValidationError("duplicate record id '" + record.id + "'");
    }
    auto tokens = record_tokens(record);
    doc_lengths_[doc] = static_cast<std::uint32_t>(tokens.size());
    total_length += tokens.size();

    std::sort(tokens.begin(), tokens.end());
    auto& vec = term_vectors_[doc];
    for (auto it = tokens.begin(); it != tokens.end();) {
      auto end = std::find_if(it, tokens.end(), [&](const auto& t) { return t != *it; });
      vec.emplace_back(*it, static_cast<std::uint32_t>(end - it));
      it = end;
    }
    for (const auto& [term, tf] : vec) index_[term].push_back(Posting{doc, tf});
  }
  avg_doc_length_ = static_cast<double>(total_length) / static_cast<double>(records_.size());
}

std::optional<std::uint32_t> Corpus::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const Record* Corpus::find(std::string_view id) const {
  auto doc = index_of(id);
  return doc ? &records_[*doc] : nullptr;
}

std::span<const Posting> Corpus::postings(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return {};
  return it->second;
}

std::uint32_t Corpus::doc_length(std::string_view id) const {
  auto doc = index_of(id);
  if (!doc) throw UnknownRecord("unknown record '" + std::string(id) + "'");
  return doc_lengths_[*doc];
}

Record validate_record(const json& raw) {
  if (!raw.is_object()) throw ValidationError("record is not an object");

  std::vector<std::string> missing;
  auto non_empty_string = [&](const char* key) {
    auto it = raw.find(key);
    return it != raw.end() && it->is_string() && !it->get_ref<const std::string&>().empty();
  };
  for (const char* key : {"id", "kind", "title"}) {
    if (!non_empty_string(key)) missing.emplace_back(key);
  }
  if (!missing.empty()) {
    std::string msg = "missing/empty";
    for (const auto& key : missing) msg += " " + key;
    throw ValidationError(msg);
  }

  Record record;
  record.id = raw["id"].get<std::string>();
  record.kind = parse_record_kind(raw["kind"].get<std::string>());
  record.title = raw["title"].get<std::string>();

  for (const auto& [key, value] : raw.items()) {
    if (key == "id" || key == "kind" || key == "title") continue;
    if (key == "abstract") {
      if (!value.is_string()) throw ValidationError("abstract must be a string");
      record.abstract = value.get<std::string>();
    } else if (key == "topics") {
      if (!value.is_array()) throw ValidationError("topics must be an array");
      for (const auto& topic : value) {
        if (!topic.is_string()) throw ValidationError("topics must contain strings");
        record.topics.insert(topic.get<std::string>());
      }
    } else if (key == "language") {
      if (!value.is_string()) throw ValidationError("language must be a string");
      record.language = value.get<std::string>();
    } else if (key == "year") {
      if (value.is_null()) continue;
      if (!value.is_number_integer()) throw ValidationError("year must be an integer");
      auto year = value.get<std::int64_t>();
      if (year < 1800 || year > 2100) {
        throw ValidationError("year " + std::to_string(year) + " outside [1800, 2100]");
      }
      record.year = static_cast<int>(year);
    } else if (key == "extra") {
      if (!value.is_object()) throw ValidationError("extra must be an object");
      for (const auto& [k, v] : value.items()) {
        record.extra[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    } else {
      record.extra[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return record;
}

json record_to_json(const Record& record) {
  json out = {
      {"id", record.id},
      {"kind", to_string(record.kind)},
      {"title", record.title},
      {"abstract", record.abstract},
      {"topics", record.topics},
      {"language", record.language},
      {"extra", record.extra},
  };
  out["year"] = record.year ? json(*record.year) : json(nullptr);
  return out;
}

std::vector<Record> read_records(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      records.push_back(validate_record(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed record: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

Corpus load_corpus(const std::filesystem::path& path, std::string site_id) {
  auto records = read_records(path);
  if (records.empty()) throw ValidationError("empty corpus: " + path.string());
  return Corpus(std::move(site_id), std::move(records));
}

void write_records(const std::filesystem::path& path, std::span<const Record> records) {
  auto out = open_output(path);
  for (const auto& record : records) out << record_to_json(record).dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

HeadQuerySet::HeadQuerySet(std::vector<std::pair<std::string, std::string>> id_text) {
  queries_.reserve(id_text.size());
  for (auto& [id, text] : id_text) {
    if (id.empty()) throw ValidationError("empty query id");
    if (by_id_.contains(id)) throw ValidationError("duplicate query id '" + id + "'");
    by_id_.emplace(id, queries_.size());
    queries_.push_back(HeadQuery{std::move(id), std::move(text),
                                 static_cast<int>(queries_.size()) + 1});
  }
}

const HeadQuery* HeadQuerySet::find(std::string_view query_id) const {
  auto it = by_id_.find(std::string(query_id));
  return it == by_id_.end() ? nullptr : &queries_[it->second];
}

HeadQuerySet load_head_queries(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::pair<std::string, std::string>> id_text;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected query_id<TAB>text");
    }
    id_text.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  if (id_text.empty()) throw ValidationError("empty head-query file: " + path.string());
  return HeadQuerySet(std::move(id_text));
}

void write_head_queries(const std::filesystem::path& path, const HeadQuerySet& queries) {
  auto out = open_output(path);
  for (const auto& q : queries.queries()) out << q.query_id << '\t' << q.text << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace livinglab
