#include "livinglab/clicksim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "livinglab/error.hpp"
#include "livinglab/rng.hpp"

namespace livinglab {

void Qrels::set(const std::string& query_id, const std::string& record_id, int grade) {
  if (grade < 0 || grade > 2) throw ValidationError("grade must be 0, 1 or 2");
  if (grade == 0) {
    if (auto it = grades_.find(query_id); it != grades_.end()) it->second.erase(record_id);
    return;
  }
  grades_[query_id][record_id] = grade;
}

int Qrels::grade(std::string_view query_id, std::string_view record_id) const {
  auto q = grades_.find(std::string(query_id));
  if (q == grades_.end()) return 0;
  auto d = q->second.find(std::string(record_id));
  return d == q->second.end() ? 0 : d->second;
}

std::size_t Qrels::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, docs] : grades_) n += docs.size();
  return n;
}

std::vector<std::tuple<std::string, std::string, int>> Qrels::sorted() const {
  std::vector<std::tuple<std::string, std::string, int>> out;
  out.reserve(size());
  for (const auto& [q, docs] : grades_) {
    for (const auto& [d, g] : docs) out.emplace_back(q, d, g);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void export_qrels(const std::filesystem::path& path, const Qrels& qrels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [q, d, g] : qrels.sorted()) out << q << '\t' << d << '\t' << g << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

Qrels load_qrels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open qrels " + path.string());
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string q, d;
    int g = -1;
    if (!std::getline(fields, q, '\t') || !std::getline(fields, d, '\t') || !(fields >> g)) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected query_id<TAB>record_id<TAB>grade");
    }
    qrels.set(q, d, g);
  }
  return qrels;
}

int grade_adhoc(std::string_view query_text, const Record& record) {
  auto terms = tokenize(query_text);
  if (terms.empty()) return 0;
  const auto title = tokenize(record.title);
  const std::unordered_set<std::string> title_set(title.begin(), title.end());
  if (std::all_of(terms.begin(), terms.end(),
                  [&](const std::string& t) { return title_set.contains(t); })) {
    return 2;
  }
  auto rest = tokenize(record.abstract);
  for (const auto& topic : record.topics) {
    auto more = tokenize(topic);
    rest.insert(rest.end(), more.begin(), more.end());
  }
  const std::unordered_set<std::string> rest_set(rest.begin(), rest.end());
  return std::any_of(terms.begin(), terms.end(),
                     [&](const std::string& t) { return rest_set.contains(t); })
             ? 1
             : 0;
}

int grade_recommendation(const Record& seed, const Record& candidate) {
  if (candidate.kind != RecordKind::research_data || seed.topics.empty()) return 0;
  std::size_t shared = 0;
  for (const auto& t : seed.topics) shared += candidate.topics.count(t);
  if (shared == seed.topics.size()) return 2;
  return shared > 0 ? 1 : 0;
}

Qrels build_qrels(const Corpus& corpus, const HeadQuerySet& queries, Task task) {
  Qrels qrels;
  for (const auto& q : queries.queries()) {
    if (task == Task::adhoc_retrieval) {
      std::set<std::uint32_t> candidates;
      for (const auto& term : tokenize(q.text)) {
        for (const auto& p : corpus.postings(term)) candidates.insert(p.doc);
      }
      for (auto doc : candidates) {
        const Record& record = corpus.at(doc);
        qrels.set(q.query_id, record.id, grade_adhoc(q.text, record));
      }
    } else {
      const Record* seed = corpus.find(q.query_id);
      if (!seed) continue;
      for (const auto& record : corpus.records()) {
        qrels.set(q.query_id, record.id, grade_recommendation(*seed, record));
      }
    }
  }
  return qrels;
}

std::string_view to_string(ClickModel model) { return model == ClickModel::pbm ? "pbm" : "cascade"; }

ClickModel parse_click_model(std::string_view text) {
  if (text == "pbm") return ClickModel::pbm;
  if (text == "cascade") return ClickModel::cascade;
  throw ValidationError("unknown click model '" + std::string(text) + "'");
}

std::vector<double> default_examination(int k) {
  std::vector<double> exam;
  for (int i = 0; i < k; ++i) exam.push_back(1.0 / (i + 1));
  return exam;
}

double ClickModelConfig::attractiveness(std::string_view query_id,
                                        std::string_view record_id) const {
  const int grade = relevance ? relevance->grade(query_id, record_id) : 0;
  return grade_to_attractiveness[static_cast<std::size_t>(grade)];
}

void ClickModelConfig::validate() const {
  auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  for (std::size_t i = 0; i < examination.size(); ++i) {
    if (!is_prob(examination[i])) throw ValidationError("examination probability outside [0, 1]");
    if (i > 0 && examination[i] > examination[i - 1]) {
      throw ValidationError("examination must be non-increasing in rank");
    }
  }
  if (!is_prob(continuation)) throw ValidationError("continuation outside [0, 1]");
  for (double a : grade_to_attractiveness) {
    if (!is_prob(a)) throw ValidationError("attractiveness outside [0, 1]");
  }
}

std::vector<double> zipf_probabilities(std::size_t n, double exponent) {
  std::vector<double> p(n);
  double total = 0.0;
  for (std::size_t r = 1; r <= n; ++r) {
    p[r - 1] = std::pow(static_cast<double>(r), -exponent);
    total += p[r - 1];
  }
  for (auto& x : p) x /= total;
  return p;
}

std::string sample_query(const SimulatedUserPool& pool, const HeadQuerySet& queries,
                         std::uint64_t draw_seed) {
  if (queries.empty()) throw ValidationError("cannot sample from an empty head-query set");
  if (!(pool.zipf_exponent > 0.0)) throw ValidationError("zipf exponent must be > 0");
  const auto probs = zipf_probabilities(queries.size(), pool.zipf_exponent);
  const double u = uniform(derive_seed(pool.rng_seed, draw_seed));
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return queries.queries()[i].query_id;
  }
  return queries.queries().back().query_id;
}

std::set<int> simulate_clicks_pbm(const ClickModelConfig& cfg, std::string_view query_id,
                                  std::span<const std::string> shown, std::uint64_t draw_seed) {
  if (cfg.examination.size() < shown.size()) {
    throw ValidationError("examination vector shorter than the shown list");
  }
  Rng rng(draw_seed);
  std::set<int> clicks;
  for (std::size_t i = 0; i < shown.size(); ++i) {
    const double p = cfg.examination[i] * cfg.attractiveness(query_id, shown[i]);
    if (rng.uniform() < p) clicks.insert(static_cast<int>(i));
  }
  return clicks;
}

std::set<int> simulate_clicks_cascade(const ClickModelConfig& cfg, std::string_view query_id,
                                      std::span<const std::string> shown,
                                      std::uint64_t draw_seed) {
  Rng rng(draw_seed);
  std::set<int> clicks;
  for (std::size_t i = 0; i < shown.size(); ++i) {
    if (rng.uniform() < cfg.attractiveness(query_id, shown[i])) {
      clicks.insert(static_cast<int>(i));
      if (rng.uniform() >= cfg.continuation) break;
    }
  }
  return clicks;
}

std::set<int> simulate_clicks(const ClickModelConfig& cfg, std::string_view query_id,
                              std::span<const std::string> shown, std::uint64_t draw_seed) {
  return cfg.model == ClickModel::pbm ? simulate_clicks_pbm(cfg, query_id, shown, draw_seed)
                                      : simulate_clicks_cascade(cfg, query_id, shown, draw_seed);
}

}  // namespace livinglab
