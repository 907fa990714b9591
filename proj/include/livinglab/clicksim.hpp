#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "livinglab/corpus.hpp"
#include "livinglab/interleave.hpp"
#include "livinglab/systems.hpp"

namespace livinglab {

/// Graded relevance per (query_id, record_id), grades 0..2. Pairs not
/// stored have grade 0. For recommendation the query id is the seed record id.
class Qrels {
 public:
  void set(const std::string& query_id, const std::string& record_id, int grade);
  int grade(std::string_view query_id, std::string_view record_id) const;
  std::size_t size() const noexcept;

  /// Stored pairs sorted by (query_id, record_id).
  std::vector<std::tuple<std::string, std::string, int>> sorted() const;

 private:
  std::unordered_map<std::string, std::unordered_map<std::string, int>> grades_;
};

/// Lines `query_id<TAB>record_id<TAB>grade`, sorted, grade > 0 only.
void export_qrels(const std::filesystem::path& path, const Qrels& qrels);
Qrels load_qrels(const std::filesystem::path& path);

/// 2 when every query term occurs in the title, 1 when any occurs in the
/// abstract or topics, else 0.
int grade_adhoc(std::string_view query_text, const Record& record);
/// 2 when the dataset carries every seed topic, 1 when it shares any, else 0.
/// Publications always grade 0.
int grade_recommendation(const Record& seed, const Record& candidate);

/// Grades every record that can score above 0 for every head query.
Qrels build_qrels(const Corpus& corpus, const HeadQuerySet& queries, Task task);

enum class ClickModel { pbm, cascade };
std::string_view to_string(ClickModel model);
ClickModel parse_click_model(std::string_view text);

/// 1 / (i + 1) for i = 0..k-1.
std::vector<double> default_examination(int k);

struct ClickModelConfig {
  ClickModel model = ClickModel::pbm;
  std::vector<double> examination = default_examination(kDefaultCutoff);
  double continuation = 0.5;
  std::shared_ptr<const Qrels> relevance = std::make_shared<Qrels>();
  std::array<double, 3> grade_to_attractiveness{0.05, 0.5, 0.95};

  double attractiveness(std::string_view query_id, std::string_view record_id) const;
  /// Throws ValidationError when a probability leaves [0, 1] or the
  /// examination vector increases with rank.
  void validate() const;
};

struct SimulatedUserPool {
  double zipf_exponent = 1.0;
  std::uint64_t rng_seed = 0;
};

/// P(rank r) = r^-s / sum_j j^-s for r = 1..n.
std::vector<double> zipf_probabilities(std::size_t n, double exponent);

/// Draws a head query by rank under a Zipf law. Deterministic in
/// (pool.rng_seed, draw_seed). Throws ValidationError for an empty set
/// or a non-positive exponent.
std::string sample_query(const SimulatedUserPool& pool, const HeadQuerySet& queries,
                         std::uint64_t draw_seed);

// The click models see record ids only. Team labels are stripped before
// the call so click probabilities cannot depend on them.

/// Position i clicked independently with probability
/// examination[i] * attractiveness(query, doc_i).
std::set<int> simulate_clicks_pbm(const ClickModelConfig& cfg, std::string_view query_id,
                                  std::span<const std::string> shown, std::uint64_t draw_seed);

/// Top-down scan: click with probability attractiveness; after a click keep
/// scanning with probability `continuation`.
std::set<int> simulate_clicks_cascade(const ClickModelConfig& cfg, std::string_view query_id,
                                      std::span<const std::string> shown,
                                      std::uint64_t draw_seed);

/// Dispatches on cfg.model.
std::set<int> simulate_clicks(const ClickModelConfig& cfg, std::string_view query_id,
                              std::span<const std::string> shown, std::uint64_t draw_seed);

inline std::set<int> simulate_clicks(const ClickModelConfig& cfg, std::string_view query_id,
                                     const InterleavedList& shown, std::uint64_t draw_seed) {
  const auto ids = shown.record_ids();
  return simulate_clicks(cfg, query_id, ids, draw_seed);
}

}  // namespace livinglab
