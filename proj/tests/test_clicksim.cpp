#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "livinglab/clicksim.hpp"
#include "livinglab/error.hpp"
#include "support.hpp"

using namespace livinglab;
using Ids = std::vector<std::string>;
using testing::dataset;
using testing::pub;

namespace {

ClickModelConfig config_with(const std::map<std::string, int>& grades_for_q, ClickModel model) {
  auto qrels = std::make_shared<Qrels>();
  for (const auto& [doc, g] : grades_for_q) qrels->set("q", doc, g);
  ClickModelConfig cfg;
  cfg.model = model;
  cfg.relevance = qrels;
  return cfg;
}

}  // namespace

TEST_CASE("zipf probabilities") {
  auto p = zipf_probabilities(3, 1.0);
  REQUIRE(p.size() == 3);
  CHECK(p[0] == doctest::Approx(6.0 / 11.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(3.0 / 11.0).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(2.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("zipf sampling") {
  HeadQuerySet one(std::vector<std::pair<std::string, std::string>>{{"only", "x"}});
  for (std::uint64_t s = 0; s < 100; ++s) CHECK(sample_query({1.0, 5}, one, s) == "only");

  HeadQuerySet three({{"a", "x"}, {"b", "y"}, {"c", "z"}});
  std::map<std::string, int> counts;
  const SimulatedUserPool pool{1.0, 42};
  for (std::uint64_t s = 0; s < 30000; ++s) ++counts[sample_query(pool, three, s)];
  CHECK(std::abs(counts["a"] / 30000.0 - 6.0 / 11.0) <= 0.01);
  CHECK(std::abs(counts["b"] / 30000.0 - 3.0 / 11.0) <= 0.01);
  CHECK(std::abs(counts["c"] / 30000.0 - 2.0 / 11.0) <= 0.01);
  CHECK(sample_query(pool, three, 7) == sample_query(pool, three, 7));

  CHECK_THROWS_AS(sample_query(pool, HeadQuerySet{}, 1), ValidationError);
  CHECK_THROWS_AS(sample_query({0.0, 1}, three, 1), ValidationError);
}

TEST_CASE("grading rules") {
  auto r = pub("d", "Covid vaccine trial", "heart study", {"cardiology"});
  CHECK(grade_adhoc("covid vaccine", r) == 2);
  CHECK(grade_adhoc("covid heart", r) == 1);
  CHECK(grade_adhoc("cardiology", r) == 1);
  CHECK(grade_adhoc("soil", r) == 0);

  auto seed = pub("p", "t", "", {"a", "b"});
  CHECK(grade_recommendation(seed, dataset("r", "t", {"a", "b", "c"})) == 2);
  CHECK(grade_recommendation(seed, dataset("r", "t", {"b"})) == 1);
  CHECK(grade_recommendation(seed, dataset("r", "t", {"z"})) == 0);
  CHECK(grade_recommendation(seed, pub("x", "t", "", {"a", "b"})) == 0);
}

TEST_CASE("qrels build, export and reload") {
  Corpus corpus("s", {pub("d1", "covid vaccine"), pub("d2", "heart", "covid"), pub("d3", "soil")});
  HeadQuerySet q({{"q1", "covid vaccine"}, {"q2", "soil"}});
  auto qrels = build_qrels(corpus, q, Task::adhoc_retrieval);
  CHECK(qrels.grade("q1", "d1") == 2);
  CHECK(qrels.grade("q1", "d2") == 1);
  CHECK(qrels.grade("q1", "d3") == 0);
  CHECK(qrels.grade("q2", "d3") == 2);
  testing::TempDir dir("qrels");
  export_qrels(dir / "q.tsv", qrels);
  CHECK(testing::slurp(dir / "q.tsv") == "q1\td1\t2\nq1\td2\t1\nq2\td3\t2\n");
  CHECK(load_qrels(dir / "q.tsv").sorted() == qrels.sorted());
}

TEST_CASE("pbm examples") {
  auto cfg = config_with({{"a", 2}, {"b", 2}}, ClickModel::pbm);
  cfg.grade_to_attractiveness = {0.0, 0.0, 0.0};
  for (std::uint64_t s = 0; s < 2000; ++s) CHECK(simulate_clicks(cfg, "q", Ids{"a", "b", "c"}, s).empty());

  auto single = config_with({{"a", 2}}, ClickModel::pbm);
  single.examination = {1.0};
  int clicks = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) clicks += !simulate_clicks(single, "q", Ids{"a"}, s).empty();
  CHECK(std::abs(clicks / 10000.0 - 0.95) <= 0.01);

  auto blind = config_with({{"a", 2}, {"b", 2}}, ClickModel::pbm);
  blind.examination = {1.0, 0.0};
  for (std::uint64_t s = 0; s < 2000; ++s) CHECK(simulate_clicks(blind, "q", Ids{"a", "b"}, s).count(1) == 0);
}

TEST_CASE("pbm rank monotonicity") {
  auto cfg = config_with({}, ClickModel::pbm);
  cfg.grade_to_attractiveness = {0.6, 0.6, 0.6};
  const Ids shown{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  std::vector<int> per_rank(shown.size(), 0);
  for (std::uint64_t s = 0; s < 10000; ++s) {
    for (int p : simulate_clicks(cfg, "q", shown, s)) ++per_rank[p];
  }
  for (std::size_t i = 1; i < shown.size(); ++i) {
    CHECK(per_rank[i] / 10000.0 <= per_rank[i - 1] / 10000.0 + 0.01);
  }
  CHECK(per_rank[0] / 10000.0 == doctest::Approx(0.6).epsilon(0.05));
}

TEST_CASE("cascade examples") {
  auto cfg = config_with({{"a", 2}, {"b", 2}, {"c", 2}}, ClickModel::cascade);
  cfg.continuation = 0.0;
  for (std::uint64_t s = 0; s < 3000; ++s) {
    auto c = simulate_clicks(cfg, "q", Ids{"a", "b", "c"}, s);
    CHECK(c.size() <= 1);
  }
  auto zero = config_with({}, ClickModel::cascade);
  zero.grade_to_attractiveness = {0.0, 0.0, 0.0};
  for (std::uint64_t s = 0; s < 2000; ++s) CHECK(simulate_clicks(zero, "q", Ids{"a", "b"}, s).empty());

  auto half = config_with({}, ClickModel::cascade);
  half.grade_to_attractiveness = {0.5, 0.5, 0.5};
  half.continuation = 1.0;
  int first = 0, second = 0;
  for (std::uint64_t s = 0; s < 20000; ++s) {
    auto c = simulate_clicks(half, "q", Ids{"a", "b"}, s);
    first += c.count(0);
    second += c.count(1);
  }
  CHECK(std::abs(first / 20000.0 - 0.5) <= 0.02);
  CHECK(std::abs(second / 20000.0 - 0.5) <= 0.02);
}

TEST_CASE("cascade with continuation 0 stops at the first success") {
  // With a single attractive document at position 1 behind an unattractive
  // one, the only possible click is at position 1.
  auto cfg = config_with({{"b", 2}}, ClickModel::cascade);
  cfg.grade_to_attractiveness = {0.0, 0.5, 1.0};
  cfg.continuation = 0.0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    CHECK(simulate_clicks(cfg, "q", Ids{"a", "b", "c"}, s) == std::set<int>{1});
  }
}

TEST_CASE("click simulation is deterministic and team blind") {
  auto cfg = config_with({{"a", 2}, {"b", 1}}, ClickModel::pbm);
  InterleavedList l1, l2;
  l1.entries = {{"a", Team::baseline}, {"b", Team::experimental}, {"c", Team::baseline}};
  l2.entries = {{"a", Team::experimental}, {"b", Team::baseline}, {"c", Team::experimental}};
  for (std::uint64_t s = 0; s < 1000; ++s) {
    CHECK(simulate_clicks(cfg, "q", l1, s) == simulate_clicks(cfg, "q", l2, s));
    CHECK(simulate_clicks(cfg, "q", l1, s) == simulate_clicks(cfg, "q", l1, s));
  }
}

TEST_CASE("config validation") {
  ClickModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.examination = {0.5, 0.9};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.examination = {1.2};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  ClickModelConfig c2;
  c2.continuation = -0.1;
  CHECK_THROWS_AS(c2.validate(), ValidationError);
  CHECK(default_examination(3) == std::vector<double>{1.0, 0.5, 1.0 / 3.0});
}
