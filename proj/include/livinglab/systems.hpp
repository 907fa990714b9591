#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "livinglab/corpus.hpp"

namespace livinglab {

enum class Task { adhoc_retrieval, dataset_recommendation };
enum class SystemMode { builtin, remote, precomputed };

enum class BuiltinRanker {
  bm25,                   // ad-hoc site baseline
  tfidf_cosine,           // ad-hoc candidate
  bm25_recency,           // ad-hoc candidate, BM25 damped by record age
  reversed_bm25,          // ad-hoc, deliberately broken: worst matches first
  topic_jaccard,          // recommendation baseline
  abstract_tfidf_cosine,  // recommendation candidate
  random_shuffle,         // recommendation, deliberately uninformed
};

std::string_view to_string(Task task);
std::string_view to_string(SystemMode mode);
std::string_view to_string(BuiltinRanker ranker);
Task parse_task(std::string_view text);
SystemMode parse_system_mode(std::string_view text);
BuiltinRanker parse_builtin_ranker(std::string_view text);
Task task_of(BuiltinRanker ranker);

inline constexpr int kDefaultCutoff = 10;
inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
/// Age for the recency-biased ranker is measured against this year so
/// rankings do not depend on the wall clock.
inline constexpr int kRecencyReferenceYear = 2020;
inline constexpr auto kRemoteTimeout = std::chrono::seconds(2);

using Timestamp = std::int64_t;  // milliseconds since the Unix epoch
Timestamp now_ms();

struct RankedList {
  std::string source_system;
  std::string query_or_item;
  std::vector<std::string> entries;
  Timestamp produced_at = 0;
};

struct SystemDescriptor {
  std::string system_id;
  Task task = Task::adhoc_retrieval;
  SystemMode mode = SystemMode::builtin;
  std::optional<BuiltinRanker> ranker;  // builtin mode
  std::optional<std::string> address;   // remote mode
  std::optional<std::filesystem::path> run_path;  // precomputed mode

  /// Throws ValidationError when mode-specific fields are missing or the
  /// builtin ranker serves the other task.
  void validate() const;
};

nlohmann::json to_json(const SystemDescriptor& system);
SystemDescriptor system_from_json(const nlohmann::json& body);

/// What a site asks for in an ad-hoc session.
struct Query {
  std::string id;
  std::string text;
};

// ---------------------------------------------------------------------------
// Scoring primitives

double bm25_idf(std::size_t num_docs, std::size_t doc_freq);

/// Okapi BM25 of one record, k1 = 1.2, b = 0.75,
/// idf = ln(1 + (N - df + 0.5) / (df + 0.5)). Terms absent from the record
/// contribute 0; repeated query terms count once per occurrence.
double score_bm25(const Corpus& corpus, std::string_view record_id,
                  std::span<const std::string> query_terms);

/// Jaccard similarity of two topic sets; 0 when both are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Sorts by descending score, ascending id, and keeps the first k ids.
std::vector<std::string> top_k(std::vector<std::pair<double, std::string>> scored, int k);

// ---------------------------------------------------------------------------
// Participant contract

class System {
 public:
  explicit System(SystemDescriptor descriptor) : descriptor_(std::move(descriptor)) {}
  virtual ~System() = default;

  const SystemDescriptor& descriptor() const noexcept { return descriptor_; }
  const std::string& id() const noexcept { return descriptor_.system_id; }

  /// Ad-hoc retrieval. Requires task = adhoc_retrieval and k >= 1.
  RankedList rank(const Corpus& corpus, const Query& query, int k) const;

  /// Publication -> research data recommendation. Throws UnknownRecord when
  /// the seed is missing and WrongKind when it is not a publication.
  RankedList recommend(const Corpus& corpus, std::string_view seed_record, int k) const;

 protected:
  virtual std::vector<std::string> do_rank(const Corpus& corpus, const Query& query,
                                           int k) const = 0;
  virtual std::vector<std::string> do_recommend(const Corpus& corpus, const Record& seed,
                                                int k) const = 0;

 private:
  SystemDescriptor descriptor_;
};

/// Builds the implementation matching descriptor.mode. Precomputed runs
/// are read here. Throws ValidationError.
std::shared_ptr<const System> make_system(SystemDescriptor descriptor);

/// Checks a participant's list against the RankedList contract: no
/// duplicates, ids resolvable, length <= k, and research_data only for
/// recommendations. Throws InvalidResponse.
void validate_entries(const Corpus& corpus, std::span<const std::string> entries, int k,
                      Task task);

/// Reads a six-column TREC run (query_id, ignored, record_id, rank, score,
/// tag). Ranks per query must be exactly 1..n. An empty file is an empty run.
std::map<std::string, RankedList> load_precomputed_run(const std::filesystem::path& path);

/// Registry of participants keyed by system id. Not synchronized; the lab
/// server guards it.
class SystemRegistry {
 public:
  /// Throws ValidationError on a duplicate id or an invalid descriptor.
  void add(SystemDescriptor descriptor);
  void add(std::shared_ptr<const System> system);
  bool contains(std::string_view system_id) const;
  /// Throws NotFound.
  std::shared_ptr<const System> get(std::string_view system_id) const;
  std::vector<SystemDescriptor> descriptors() const;

 private:
  std::map<std::string, std::shared_ptr<const System>, std::less<>> systems_;
};

/// The builtin suite registered by default: bm25, tfidf_cosine,
/// bm25_recency, reversed_bm25, topic_jaccard, abstract_tfidf_cosine,
/// random_shuffle, each under its own name.
std::vector<SystemDescriptor> builtin_descriptors();

}  // namespace livinglab
