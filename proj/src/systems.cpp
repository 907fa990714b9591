#include "livinglab/systems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <httplib.h>

#include "livinglab/error.hpp"
#include "livinglab/rng.hpp"

namespace livinglab {

using nlohmann::json;

std::string_view to_string(Task task) {
  return task == Task::adhoc_retrieval ? "adhoc_retrieval" : "dataset_recommendation";
}

std::string_view to_string(SystemMode mode) {
  switch (mode) {
    case SystemMode::builtin:
      return "builtin";
    case SystemMode::remote:
      return "remote";
    case SystemMode::precomputed:
      return "precomputed";
  }
  return "builtin";
}

namespace {

constexpr std::pair<BuiltinRanker, std::string_view> kRankerNames[] = {
    {BuiltinRanker::bm25, "bm25"},
    {BuiltinRanker::tfidf_cosine, "tfidf_cosine"},
    {BuiltinRanker::bm25_recency, "bm25_recency"},
    {BuiltinRanker::reversed_bm25, "reversed_bm25"},
    {BuiltinRanker::topic_jaccard, "topic_jaccard"},
    {BuiltinRanker::abstract_tfidf_cosine, "abstract_tfidf_cosine"},
    {BuiltinRanker::random_shuffle, "random_shuffle"},
};

}  // namespace

std::string_view to_string(BuiltinRanker ranker) {
  for (const auto& [r, name] : kRankerNames) {
    if (r == ranker) return name;
  }
  return "bm25";
}

Task parse_task(std::string_view text) {
  if (text == "adhoc_retrieval") return Task::adhoc_retrieval;
  if (text == "dataset_recommendation") return Task::dataset_recommendation;
  throw ValidationError("unknown task '" + std::string(text) + "'");
}

SystemMode parse_system_mode(std::string_view text) {
  if (text == "builtin") return SystemMode::builtin;
  if (text == "remote") return SystemMode::remote;
  if (text == "precomputed") return SystemMode::precomputed;
  throw ValidationError("unknown system mode '" + std::string(text) + "'");
}

BuiltinRanker parse_builtin_ranker(std::string_view text) {
  for (const auto& [r, name] : kRankerNames) {
    if (name == text) return r;
  }
  throw ValidationError("unknown builtin ranker '" + std::string(text) + "'");
}

Task task_of(BuiltinRanker ranker) {
  switch (ranker) {
    case BuiltinRanker::topic_jaccard:
    case BuiltinRanker::abstract_tfidf_cosine:
    case BuiltinRanker::random_shuffle:
      return Task::dataset_recommendation;
    default:
      return Task::adhoc_retrieval;
  }
}

Timestamp now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void SystemDescriptor::validate() const {
  if (system_id.empty()) throw ValidationError("system_id must not be empty");
  switch (mode) {
    case SystemMode::builtin:
      if (!ranker) throw ValidationError("builtin system '" + system_id + "' needs a ranker");
      if (task_of(*ranker) != task) {
        throw ValidationError("ranker '" + std::string(to_string(*ranker)) +
                              "' does not serve task " + std::string(to_string(task)));
      }
      break;
    case SystemMode::remote:
      if (!address || address->empty()) {
        throw ValidationError("remote system '" + system_id + "' needs an address");
      }
      break;
    case SystemMode::precomputed:
      if (!run_path || run_path->empty()) {
        throw ValidationError("precomputed system '" + system_id + "' needs a run_path");
      }
      break;
  }
}

json to_json(const SystemDescriptor& system) {
  json out = {{"system_id", system.system_id},
              {"task", to_string(system.task)},
              {"mode", to_string(system.mode)}};
  if (system.ranker) out["ranker"] = to_string(*system.ranker);
  if (system.address) out["address"] = *system.address;
  if (system.run_path) out["run_path"] = system.run_path->string();
  return out;
}

SystemDescriptor system_from_json(const json& body) {
  if (!body.is_object()) throw ValidationError("system descriptor must be an object");
  try {
    SystemDescriptor system;
    system.system_id = body.at("system_id").get<std::string>();
    system.mode = parse_system_mode(body.value("mode", "builtin"));
    if (body.contains("ranker")) system.ranker = parse_builtin_ranker(body["ranker"].get<std::string>());
    if (body.contains("task")) {
      system.task = parse_task(body["task"].get<std::string>());
    } else if (system.ranker) {
      system.task = task_of(*system.ranker);
    } else {
      throw ValidationError("system '" + system.system_id + "' needs a task");
    }
    if (body.contains("address")) system.address = body["address"].get<std::string>();
    if (body.contains("run_path")) system.run_path = body["run_path"].get<std::string>();
    system.validate();
    return system;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad system descriptor: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scoring primitives

double bm25_idf(std::size_t num_docs, std::size_t doc_freq) {
  const double n = static_cast<double>(num_docs);
  const double df = static_cast<double>(doc_freq);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

namespace {

double bm25_term(double idf, double tf, double len, double avg_len) {
  return idf * (tf * (kBm25K1 + 1.0)) / (tf + kBm25K1 * (1.0 - kBm25B + kBm25B * len / avg_len));
}

std::vector<std::string> query_terms(std::string_view text) { return tokenize(text); }

/// Term-at-a-time BM25 over the postings of every query term.
std::unordered_map<std::uint32_t, double> bm25_accumulate(const Corpus& corpus,
                                                          std::span<const std::string> terms) {
  std::unordered_map<std::uint32_t, double> acc;
  const double avg = corpus.avg_doc_length();
  for (const auto& term : terms) {
    auto postings = corpus.postings(term);
    if (postings.empty()) continue;
    const double idf = bm25_idf(corpus.size(), postings.size());
    for (const auto& p : postings) {
      acc[p.doc] += bm25_term(idf, p.tf, corpus.doc_length(p.doc), avg);
    }
  }
  return acc;
}

double tfidf_weight(double tf, std::size_t num_docs, std::size_t doc_freq) {
  return (1.0 + std::log(tf)) *
         std::log(1.0 + static_cast<double>(num_docs) / static_cast<double>(doc_freq));
}

}  // namespace

double score_bm25(const Corpus& corpus, std::string_view record_id,
                  std::span<const std::string> query_terms) {
  auto doc = corpus.index_of(record_id);
  if (!doc) throw UnknownRecord("unknown record '" + std::string(record_id) + "'");
  const auto vec = corpus.term_vector(*doc);
  const double len = corpus.doc_length(*doc);
  double score = 0.0;
  for (const auto& term : query_terms) {
    auto it = std::lower_bound(vec.begin(), vec.end(), term,
                               [](const auto& entry, const std::string& t) { return entry.first < t; });
    if (it == vec.end() || it->first != term) continue;
    const double idf = bm25_idf(corpus.size(), corpus.document_frequency(term));
    score += bm25_term(idf, it->second, len, corpus.avg_doc_length());
  }
  return score;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : a) shared += b.count(t);
  return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

std::vector<std::string> top_k(std::vector<std::pair<double, std::string>> scored, int k) {
  auto better = [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  };
  const auto keep = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    better);
  std::vector<std::string> ids;
  ids.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(std::move(scored[i].second));
  return ids;
}

// ---------------------------------------------------------------------------
// Participant contract

RankedList System::rank(const Corpus& corpus, const Query& query, int k) const {
  if (descriptor_.task != Task::adhoc_retrieval) {
    throw ValidationError("system '" + id() + "' does not serve adhoc_retrieval");
  }
  if (k < 1) throw ValidationError("k must be >= 1");
  return RankedList{id(), query.id, do_rank(corpus, query, k), now_ms()};
}

RankedList System::recommend(const Corpus& corpus, std::string_view seed_record, int k) const {
  if (descriptor_.task != Task::dataset_recommendation) {
    throw ValidationError("system '" + id() + "' does not serve dataset_recommendation");
  }
  if (k < 1) throw ValidationError("k must be >= 1");
  const Record* seed = corpus.find(seed_record);
  if (!seed) throw UnknownRecord("unknown seed record '" + std::string(seed_record) + "'");
  if (seed->kind != RecordKind::publication) {
    throw WrongKind("seed record '" + seed->id + "' is research_data, expected publication");
  }
  return RankedList{id(), seed->id, do_recommend(corpus, *seed, k), now_ms()};
}

void validate_entries(const Corpus& corpus, std::span<const std::string> entries, int k,
                      Task task) {
  if (entries.size() > static_cast<std::size_t>(k)) {
    throw InvalidResponse("list has " + std::to_string(entries.size()) + " entries, cutoff is " +
                          std::to_string(k));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : entries) {
    if (!seen.insert(id).second) throw InvalidResponse("duplicate record id '" + id + "'");
    const Record* record = corpus.find(id);
    if (!record) throw InvalidResponse("unknown record id '" + id + "'");
    if (task == Task::dataset_recommendation && record->kind != RecordKind::research_data) {
      throw InvalidResponse("recommended record '" + id + "' is not research_data");
    }
  }
}

namespace {

class BuiltinSystem final : public System {
 public:
  using System::System;

 protected:
  std::vector<std::string> do_rank(const Corpus& corpus, const Query& query,
                                   int k) const override {
    const auto terms = query_terms(query.text);
    switch (*descriptor().ranker) {
      case BuiltinRanker::bm25:
        return rank_bm25(corpus, terms, k, false, false);
      case BuiltinRanker::bm25_recency:
        return rank_bm25(corpus, terms, k, true, false);
      case BuiltinRanker::reversed_bm25:
        return rank_bm25(corpus, terms, k, false, true);
      case BuiltinRanker::tfidf_cosine:
        return rank_tfidf(corpus, terms, k);
      default:
        throw ValidationError("ranker does not serve adhoc_retrieval");
    }
  }

  std::vector<std::string> do_recommend(const Corpus& corpus, const Record& seed,
                                        int k) const override {
    switch (*descriptor().ranker) {
      case BuiltinRanker::topic_jaccard:
        return recommend_jaccard(corpus, seed, k);
      case BuiltinRanker::abstract_tfidf_cosine:
        return recommend_abstract_cosine(corpus, seed, k);
      case BuiltinRanker::random_shuffle:
        return recommend_shuffle(corpus, seed, k);
      default:
        throw ValidationError("ranker does not serve dataset_recommendation");
    }
  }

 private:
  static std::vector<std::string> rank_bm25(const Corpus& corpus,
                                            std::span<const std::string> terms, int k,
                                            bool recency, bool reversed) {
    auto acc = bm25_accumulate(corpus, terms);
    std::vector<std::pair<double, std::string>> scored;
    scored.reserve(acc.size());
    for (auto [doc, score] : acc) {
      const Record& record = corpus.at(doc);
      if (recency) {
        const double age =
            record.year ? std::max(0, kRecencyReferenceYear - *record.year) : 0.0;
        score *= 1.0 / (1.0 + age / 10.0);
      }
      scored.emplace_back(reversed ? -score : score, record.id);
    }
    return top_k(std::move(scored), k);
  }

  static std::vector<std::string> rank_tfidf(const Corpus& corpus,
                                             std::span<const std::string> terms, int k) {
    std::map<std::string, double> query_tf;
    for (const auto& t : terms) query_tf[t] += 1.0;

    std::map<std::string, double> query_weights;
    double query_norm = 0.0;
    for (const auto& [term, tf] : query_tf) {
      const auto df = corpus.document_frequency(term);
      if (df == 0) continue;
      const double w = tfidf_weight(tf, corpus.size(), df);
      query_weights[term] = w;
      query_norm += w * w;
    }
    if (query_weights.empty()) return {};
    query_norm = std::sqrt(query_norm);

    std::unordered_map<std::uint32_t, double> dots;
    for (const auto& [term, qw] : query_weights) {
      const auto postings = corpus.postings(term);
      for (const auto& p : postings) {
        dots[p.doc] += qw * tfidf_weight(p.tf, corpus.size(), postings.size());
      }
    }
    std::vector<std::pair<double, std::string>> scored;
    scored.reserve(dots.size());
    for (const auto& [doc, dot] : dots) {
      double norm = 0.0;
      for (const auto& [term, tf] : corpus.term_vector(doc)) {
        const double w = tfidf_weight(tf, corpus.size(), corpus.document_frequency(term));
        norm += w * w;
      }
      scored.emplace_back(dot / (query_norm * std::sqrt(norm)), corpus.at(doc).id);
    }
    return top_k(std::move(scored), k);
  }

  static std::vector<std::string> recommend_jaccard(const Corpus& corpus, const Record& seed,
                                                    int k) {
    std::vector<std::pair<double, std::string>> scored;
    if (seed.topics.empty()) return {};
    for (const auto& record : corpus.records()) {
      if (record.kind != RecordKind::research_data) continue;
      const double sim = jaccard(seed.topics, record.topics);
      if (sim > 0.0) scored.emplace_back(sim, record.id);
    }
    return top_k(std::move(scored), k);
  }

  /// Cosine over abstract-only term vectors; idf computed over the
  /// research_data abstracts being ranked.
  static std::vector<std::string> recommend_abstract_cosine(const Corpus& corpus,
                                                            const Record& seed, int k) {
    using TermCounts = std::map<std::string, double>;
    auto counts = [](std::string_view text) {
      TermCounts tf;
      for (auto& t : tokenize(text)) tf[std::move(t)] += 1.0;
      return tf;
    };
    const TermCounts seed_tf = counts(seed.abstract);
    if (seed_tf.empty()) return {};

    std::vector<std::pair<const Record*, TermCounts>> datasets;
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& record : corpus.records()) {
      if (record.kind != RecordKind::research_data) continue;
      auto tf = counts(record.abstract);
      for (const auto& [term, _] : tf) ++df[term];
      datasets.emplace_back(&record, std::move(tf));
    }
    const std::size_t n = datasets.size();
    auto weight = [&](const std::string& term, double tf) {
      auto it = df.find(term);
      return it == df.end() ? 0.0 : tfidf_weight(tf, n, it->second);
    };
    double seed_norm = 0.0;
    TermCounts seed_w;
    for (const auto& [term, tf] : seed_tf) {
      const double w = weight(term, tf);
      if (w > 0.0) seed_w[term] = w;
      seed_norm += w * w;
    }
    if (seed_norm == 0.0) return {};
    seed_norm = std::sqrt(seed_norm);

    std::vector<std::pair<double, std::string>> scored;
    for (const auto& [record, tf] : datasets) {
      double dot = 0.0;
      double norm = 0.0;
      for (const auto& [term, count] : tf) {
        const double w = weight(term, count);
        norm += w * w;
        if (auto it = seed_w.find(term); it != seed_w.end()) dot += w * it->second;
      }
      if (dot > 0.0) scored.emplace_back(dot / (seed_norm * std::sqrt(norm)), record->id);
    }
    return top_k(std::move(scored), k);
  }

  /// Order fixed per seed item: a hash of (seed id, record id).
  static std::vector<std::string> recommend_shuffle(const Corpus& corpus, const Record& seed,
                                                    int k) {
    const auto salt = fnv1a64(seed.id);
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& record : corpus.records()) {
      if (record.kind != RecordKind::research_data) continue;
      scored.emplace_back(to_unit(derive_seed(salt, record.id)), record.id);
    }
    return top_k(std::move(scored), k);
  }
};

class PrecomputedSystem final : public System {
 public:
  explicit PrecomputedSystem(SystemDescriptor descriptor)
      : System(std::move(descriptor)), run_(load_precomputed_run(*this->descriptor().run_path)) {}

 protected:
  std::vector<std::string> do_rank(const Corpus& corpus, const Query& query,
                                   int k) const override {
    return lookup(corpus, query.id, k);
  }
  std::vector<std::string> do_recommend(const Corpus& corpus, const Record& seed,
                                        int k) const override {
    return lookup(corpus, seed.id, k);
  }

 private:
  std::vector<std::string> lookup(const Corpus& corpus, const std::string& key, int k) const {
    auto it = run_.find(key);
    if (it == run_.end()) return {};
    std::vector<std::string> entries(
        it->second.entries.begin(),
        it->second.entries.begin() +
            static_cast<std::ptrdiff_t>(std::min<std::size_t>(it->second.entries.size(), k)));
    validate_entries(corpus, entries, k, descriptor().task);
    return entries;
  }

  std::map<std::string, RankedList> run_;
};

/// Speaks the participant micro-protocol over HTTP.
class RemoteSystem final : public System {
 public:
  explicit RemoteSystem(SystemDescriptor descriptor) : System(std::move(descriptor)) {
    const std::string& address = *this->descriptor().address;
    auto scheme = address.find("://");
    auto path_start = address.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
      origin_ = address;
    } else {
      origin_ = address.substr(0, path_start);
      prefix_ = address.substr(path_start);
      while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
  }

 protected:
  std::vector<std::string> do_rank(const Corpus& corpus, const Query& query,
                                   int k) const override {
    httplib::Params params{{"qid", query.id}, {"query", query.text}, {"k", std::to_string(k)}};
    auto entries = fetch("/ranking", params);
    validate_entries(corpus, entries, k, Task::adhoc_retrieval);
    return entries;
  }

  std::vector<std::string> do_recommend(const Corpus& corpus, const Record& seed,
                                        int k) const override {
    httplib::Params params{{"item", seed.id}, {"k", std::to_string(k)}};
    auto entries = fetch("/recommendation", params);
    validate_entries(corpus, entries, k, Task::dataset_recommendation);
    return entries;
  }

 private:
  std::vector<std::string> fetch(const std::string& endpoint, const httplib::Params& params) const {
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
      httplib::Client client(origin_);
      client.set_connection_timeout(kRemoteTimeout);
      client.set_read_timeout(kRemoteTimeout);
      client.set_write_timeout(kRemoteTimeout);
      auto res = client.Get(prefix_ + endpoint, params, httplib::Headers{});
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      json body;
      try {
        body = json::parse(res->body);
      } catch (const json::exception& e) {
        throw InvalidResponse("system '" + id() + "': body is not JSON: " + e.what());
      }
      if (!body.is_array()) throw InvalidResponse("system '" + id() + "': body is not an array");
      std::vector<std::string> entries;
      for (const auto& item : body) {
        if (!item.is_string()) throw InvalidResponse("system '" + id() + "': non-string id");
        entries.push_back(item.get<std::string>());
      }
      return entries;
    }
    throw SystemUnavailable("system '" + id() + "' unavailable: " + last_error);
  }

  std::string origin_;
  std::string prefix_;
};

}  // namespace

std::shared_ptr<const System> make_system(SystemDescriptor descriptor) {
  descriptor.validate();
  switch (descriptor.mode) {
    case SystemMode::builtin:
      return std::make_shared<BuiltinSystem>(std::move(descriptor));
    case SystemMode::precomputed:
      return std::make_shared<PrecomputedSystem>(std::move(descriptor));
    case SystemMode::remote:
      return std::make_shared<RemoteSystem>(std::move(descriptor));
  }
  throw ValidationError("unknown system mode");
}

std::map<std::string, RankedList> load_precomputed_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open run file " + path.string());

  struct Row {
    long rank;
    std::string record_id;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string col; fields >> col;) cols.push_back(std::move(col));
    if (cols.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 6) throw ValidationError(where + ": expected 6 columns");
    long rank = 0;
    try {
      std::size_t used = 0;
      rank = std::stol(cols[3], &used);
      if (used != cols[3].size()) throw std::invalid_argument("rank");
      (void)std::stod(cols[4]);
    } catch (const std::logic_error&) {
      throw ValidationError(where + ": rank must be an integer and score a number");
    }
    if (!seen.emplace(cols[0], cols[2]).second) {
      throw ValidationError(where + ": duplicate (query, record) pair (" + cols[0] + ", " +
                            cols[2] + ")");
    }
    rows[cols[0]].push_back(Row{rank, cols[2]});
  }

  std::map<std::string, RankedList> run;
  for (auto& [qid, list] : rows) {
    std::sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.rank < b.rank; });
    RankedList ranked{path.stem().string(), qid, {}, 0};
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].rank != static_cast<long>(i) + 1) {
        throw ValidationError("query '" + qid + "': non-consecutive ranks");
      }
      ranked.entries.push_back(std::move(list[i].record_id));
    }
    run.emplace(qid, std::move(ranked));
  }
  return run;
}

void SystemRegistry::add(SystemDescriptor descriptor) { add(make_system(std::move(descriptor))); }

void SystemRegistry::add(std::shared_ptr<const System> system) {
  if (systems_.contains(system->id())) {
    throw ValidationError("system '" + system->id() + "' already registered");
  }
  systems_.emplace(system->id(), std::move(system));
}

bool SystemRegistry::contains(std::string_view system_id) const {
  return systems_.find(system_id) != systems_.end();
}

std::shared_ptr<const System> SystemRegistry::get(std::string_view system_id) const {
  auto it = systems_.find(system_id);
  if (it == systems_.end()) throw NotFound("unknown system '" + std::string(system_id) + "'");
  return it->second;
}

std::vector<SystemDescriptor> SystemRegistry::descriptors() const {
  std::vector<SystemDescriptor> out;
  out.reserve(systems_.size());
  for (const auto& [_, system] : systems_) out.push_back(system->descriptor());
  return out;
}

std::vector<SystemDescriptor> builtin_descriptors() {
  std::vector<SystemDescriptor> out;
  for (const auto& [ranker, name] : kRankerNames) {
    SystemDescriptor d;
    d.system_id = std::string(name);
    d.task = task_of(ranker);
    d.mode = SystemMode::builtin;
    d.ranker = ranker;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace livinglab
