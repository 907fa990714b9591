#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace livinglab {

enum class RecordKind { publication, research_data };

std::string_view to_string(RecordKind kind);
/// Throws ValidationError("unknown kind ...") for anything but the two kinds.
RecordKind parse_record_kind(std::string_view text);

struct Record {
  std::string id;
  RecordKind kind = RecordKind::publication;
  std::string title;
  std::string abstract;
  std::set<std::string> topics;
  std::string language;
  std::optional<int> year;
  std::map<std::string, std::string> extra;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Lowercases ASCII letters and splits on every byte that is not an ASCII
/// letter or digit. Bytes >= 0x80 are kept inside tokens so UTF-8 words
/// survive intact. Empty tokens are dropped.
std::vector<std::string> tokenize(std::string_view text);

/// Tokens of the indexed fields of a record: title, abstract, then each topic.
std::vector<std::string> record_tokens(const Record& record);

struct Posting {
  std::uint32_t doc;  // position in Corpus::records()
  std::uint32_t tf;
};

/// An immutable, indexed document collection for one site.
class Corpus {
 public:
  /// Validates id uniqueness and builds the inverted index.
  /// Throws ValidationError on duplicate ids or an empty record set.
  Corpus(std::string site_id, std::vector<Record> records);

  const std::string& site_id() const noexcept { return site_id_; }
  std::span<const Record> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  std::optional<std::uint32_t> index_of(std::string_view id) const;
  const Record* find(std::string_view id) const;
  const Record& at(std::uint32_t doc) const { return records_.at(doc); }

  std::span<const Posting> postings(std::string_view term) const;
  std::size_t document_frequency(std::string_view term) const { return postings(term).size(); }
  std::size_t vocabulary_size() const noexcept { return index_.size(); }
  /// Iteration over the whole inverted index, term order unspecified.
  const std::unordered_map<std::string, std::vector<Posting>>& index() const noexcept {
    return index_;
  }

  std::uint32_t doc_length(std::uint32_t doc) const { return doc_lengths_.at(doc); }
  std::uint32_t doc_length(std::string_view id) const;
  double avg_doc_length() const noexcept { return avg_doc_length_; }

  /// Per-record (term, tf) pairs sorted by term.
  std::span<const std::pair<std::string, std::uint32_t>> term_vector(std::uint32_t doc) const {
    return term_vectors_.at(doc);
  }

 private:
  std::string site_id_;
  std::vector<Record> records_;
  std::unordered_map<std::string, std::uint32_t> by_id_;
  std::unordered_map<std::string, std::vector<Posting>> index_;
  std::vector<std::vector<std::pair<std::string, std::uint32_t>>> term_vectors_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
};

/// Checks a parsed candidate against the Record invariants. Unknown keys
/// are routed into `extra`. Throws ValidationError.
Record validate_record(const nlohmann::json& raw);

nlohmann::json record_to_json(const Record& record);

/// Reads line-delimited records. Blank lines are skipped.
/// Throws ValidationError naming the line number, duplicate id, or emptiness.
Corpus load_corpus(const std::filesystem::path& path, std::string site_id);
std::vector<Record> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, std::span<const Record> records);

struct HeadQuery {
  std::string query_id;
  std::string text;
  int frequency_rank = 0;
};

class HeadQuerySet {
 public:
  HeadQuerySet() = default;
  /// Assigns ranks 1..N in the given order. Throws ValidationError on duplicates.
  explicit HeadQuerySet(std::vector<std::pair<std::string, std::string>> id_text);

  std::span<const HeadQuery> queries() const noexcept { return queries_; }
  std::size_t size() const noexcept { return queries_.size(); }
  bool empty() const noexcept { return queries_.empty(); }
  const HeadQuery* find(std::string_view query_id) const;

 private:
  std::vector<HeadQuery> queries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// One `query_id<TAB>text` per line; blank lines skipped; rank = line order.
HeadQuerySet load_head_queries(const std::filesystem::path& path);
void write_head_queries(const std::filesystem::path& path, const HeadQuerySet& queries);

}  // namespace livinglab
