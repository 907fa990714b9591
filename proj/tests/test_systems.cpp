#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "livinglab/error.hpp"
#include "livinglab/systems.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace livinglab;
using testing::dataset;
using testing::pub;
using testing::TempDir;

namespace {

std::shared_ptr<const System> builtin(BuiltinRanker ranker, std::string id = {}) {
  SystemDescriptor d;
  d.system_id = id.empty() ? std::string(to_string(ranker)) : id;
  d.task = task_of(ranker);
  d.ranker = ranker;
  return make_system(d);
}

}  // namespace

TEST_CASE("bm25 worked value") {
  Corpus corpus("s", {pub("d1", "covid vaccine")});
  const std::vector<std::string> q{"covid"};
  CHECK(score_bm25(corpus, "d1", q) == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
  CHECK(score_bm25(corpus, "d1", q) == doctest::Approx(0.287682).epsilon(1e-6));
  const std::vector<std::string> missing{"influenza"};
  CHECK(score_bm25(corpus, "d1", missing) == 0.0);
  CHECK(score_bm25(corpus, "d1", std::vector<std::string>{}) == 0.0);
  CHECK_THROWS_AS(score_bm25(corpus, "nope", q), UnknownRecord);
}

TEST_CASE("bm25 ranking examples") {
  auto bm25 = builtin(BuiltinRanker::bm25);
  Corpus one("s", {pub("d1", "covid vaccine")});
  CHECK(bm25->rank(one, {"q", "covid"}, 10).entries == std::vector<std::string>{"d1"});

  Corpus three("s", {pub("d1", "heart diet soil"), pub("d2", "covid covid soil"),
                     pub("d3", "covid heart soil")});
  CHECK(bm25->rank(three, {"q", "covid"}, 10).entries == std::vector<std::string>{"d2", "d3"});
  CHECK(bm25->rank(three, {"q", "influenza"}, 10).entries.empty());
  CHECK(bm25->rank(three, {"q", "soil"}, 2).entries.size() == 2);
}

TEST_CASE("bm25 grows with term frequency") {
  // Same length, one extra occurrence of the query term.
  Corpus corpus("s", {pub("a", "covid x y z"), pub("b", "covid covid y z"), pub("c", "w x y z")});
  const std::vector<std::string> q{"covid"};
  CHECK(score_bm25(corpus, "b", q) > score_bm25(corpus, "a", q));
}

TEST_CASE("bm25 matches the brute-force scorer") {
  std::mt19937_64 gen(5);
  const std::vector<std::string> vocab{"covid", "vaccine", "heart", "diet", "soil", "water",
                                       "gene", "trial", "risk", "crop", "plant", "rat"};
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> len(1, 20);
  std::vector<Record> records;
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 120; ++i) {
    std::string title;
    std::vector<std::string> toks;
    for (int j = len(gen); j > 0; --j) {
      toks.push_back(vocab[pick(gen)]);
      title += toks.back() + " ";
    }
    records.push_back(pub("r" + std::to_string(i), title));
    docs.push_back(toks);
  }
  Corpus corpus("s", records);
  for (int qi = 0; qi < 20; ++qi) {
    std::vector<std::string> q{vocab[pick(gen)], vocab[pick(gen)]};
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const double expect = oracle::bm25(docs, d, q);
      CHECK(score_bm25(corpus, records[d].id, q) == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("reversed bm25 orders matches ascending") {
  Corpus corpus("s", {pub("a", "covid x"), pub("b", "covid covid"), pub("c", "x y"),
                      pub("d", "covid y y y")});
  auto fwd = builtin(BuiltinRanker::bm25)->rank(corpus, {"q", "covid"}, 10).entries;
  auto rev = builtin(BuiltinRanker::reversed_bm25)->rank(corpus, {"q", "covid"}, 10).entries;
  std::reverse(fwd.begin(), fwd.end());
  CHECK(rev == fwd);
  CHECK(rev.size() == 3);
}

TEST_CASE("recency ranker damps old records") {
  auto old_rec = pub("old", "covid");
  old_rec.year = 1990;
  auto new_rec = pub("new", "covid");
  new_rec.year = 2020;
  Corpus corpus("s", {old_rec, new_rec, pub("x", "other")});
  auto out = builtin(BuiltinRanker::bm25_recency)->rank(corpus, {"q", "covid"}, 10).entries;
  CHECK(out == std::vector<std::string>{"new", "old"});
  // Plain BM25 ties them and breaks the tie by id.
  CHECK(builtin(BuiltinRanker::bm25)->rank(corpus, {"q", "covid"}, 10).entries ==
        std::vector<std::string>{"new", "old"});
}

TEST_CASE("tfidf cosine prefers focused documents") {
  Corpus corpus("s", {pub("a", "covid"), pub("b", "covid heart diet soil water"), pub("c", "heart")});
  auto out = builtin(BuiltinRanker::tfidf_cosine)->rank(corpus, {"q", "covid"}, 10).entries;
  CHECK(out == std::vector<std::string>{"a", "b"});
}

TEST_CASE("topic jaccard recommendation") {
  auto jac = builtin(BuiltinRanker::topic_jaccard);
  Corpus corpus("s", {pub("p", "seed", "", {"a", "b"}), dataset("r1", "x", {"a", "b"}),
                      dataset("r2", "y", {"b", "c"}), dataset("r3", "z", {"d"}),
                      pub("p2", "other", "", {"a", "b"})});
  CHECK(jaccard({"a", "b"}, {"b", "c"}) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccard({}, {}) == 0.0);
  CHECK(jac->recommend(corpus, "p", 10).entries == std::vector<std::string>{"r1", "r2"});

  Corpus empty_topics("s", {pub("p", "seed"), dataset("r1", "x", {"a"})});
  CHECK(jac->recommend(empty_topics, "p", 10).entries.empty());
  Corpus no_data("s", {pub("p", "seed", "", {"a"}), pub("q", "other", "", {"a"})});
  CHECK(jac->recommend(no_data, "p", 10).entries.empty());

  CHECK_THROWS_AS(jac->recommend(corpus, "missing", 10), UnknownRecord);
  CHECK_THROWS_AS(jac->recommend(corpus, "r1", 10), WrongKind);
}

TEST_CASE("recommenders only return research data") {
  Corpus corpus("s", {pub("p", "seed", "survey of voting", {"a", "b"}),
                      dataset("r1", "x", {"a"}, "voting survey wave"), dataset("r2", "y", {"b"}, "panel"),
                      pub("p2", "z", "voting survey", {"a", "b"})});
  for (auto r : {BuiltinRanker::topic_jaccard, BuiltinRanker::abstract_tfidf_cosine,
                 BuiltinRanker::random_shuffle}) {
    for (const auto& id : builtin(r)->recommend(corpus, "p", 10).entries) {
      CHECK(corpus.find(id)->kind == RecordKind::research_data);
    }
  }
  CHECK(builtin(BuiltinRanker::abstract_tfidf_cosine)->recommend(corpus, "p", 10).entries ==
        std::vector<std::string>{"r1"});
  auto shuffle = builtin(BuiltinRanker::random_shuffle);
  CHECK(shuffle->recommend(corpus, "p", 10).entries == shuffle->recommend(corpus, "p", 10).entries);
  CHECK(shuffle->recommend(corpus, "p", 10).entries.size() == 2);
}

TEST_CASE("task mismatches are rejected") {
  Corpus corpus("s", {pub("p", "seed")});
  CHECK_THROWS_AS(builtin(BuiltinRanker::bm25)->recommend(corpus, "p", 10), ValidationError);
  CHECK_THROWS_AS(builtin(BuiltinRanker::topic_jaccard)->rank(corpus, {"q", "x"}, 10), ValidationError);
  CHECK_THROWS_AS(builtin(BuiltinRanker::bm25)->rank(corpus, {"q", "x"}, 0), ValidationError);
  SystemDescriptor d;
  d.system_id = "bad";
  d.task = Task::dataset_recommendation;
  d.ranker = BuiltinRanker::bm25;
  CHECK_THROWS_AS(make_system(d), ValidationError);
}

TEST_CASE("precomputed runs") {
  TempDir dir("run");
  testing::spit(dir / "ok.run", "q1 Q0 d3 1 2.0 t\nq1 Q0 d1 2 1.0 t\nq2 Q0 d2 1 5 t\n");
  auto run = load_precomputed_run(dir / "ok.run");
  REQUIRE(run.size() == 2);
  CHECK(run.at("q1").entries == std::vector<std::string>{"d3", "d1"});

  testing::spit(dir / "gap.run", "q1 Q0 d3 1 2.0 t\nq1 Q0 d1 3 1.0 t\n");
  try {
    load_precomputed_run(dir / "gap.run");
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("non-consecutive ranks") != std::string::npos);
  }
  testing::spit(dir / "dup.run", "q1 Q0 d3 1 2.0 t\nq1 Q0 d3 2 1.0 t\n");
  CHECK_THROWS_AS(load_precomputed_run(dir / "dup.run"), ValidationError);
  testing::spit(dir / "empty.run", "");
  CHECK(load_precomputed_run(dir / "empty.run").empty());

  SystemDescriptor d;
  d.system_id = "pre";
  d.mode = SystemMode::precomputed;
  d.run_path = dir / "ok.run";
  auto sys = make_system(d);
  Corpus corpus("s", {pub("d1", "a"), pub("d2", "b"), pub("d3", "c")});
  CHECK(sys->rank(corpus, {"q1", "ignored"}, 10).entries == std::vector<std::string>{"d3", "d1"});
  CHECK(sys->rank(corpus, {"q1", "ignored"}, 1).entries == std::vector<std::string>{"d3"});
  CHECK(sys->rank(corpus, {"q9", "abstains"}, 10).entries.empty());

  Corpus missing("s", {pub("d1", "a")});
  CHECK_THROWS_AS(sys->rank(missing, {"q1", "x"}, 10), InvalidResponse);
}

TEST_CASE("validate_entries") {
  Corpus corpus("s", {pub("p", "a"), dataset("r", "b")});
  const std::vector<std::string> dup{"p", "p"};
  CHECK_THROWS_AS(validate_entries(corpus, dup, 10, Task::adhoc_retrieval), InvalidResponse);
  const std::vector<std::string> unknown{"zz"};
  CHECK_THROWS_AS(validate_entries(corpus, unknown, 10, Task::adhoc_retrieval), InvalidResponse);
  const std::vector<std::string> pubs{"p"};
  CHECK_THROWS_AS(validate_entries(corpus, pubs, 10, Task::dataset_recommendation), InvalidResponse);
  const std::vector<std::string> too_long{"p", "r"};
  CHECK_THROWS_AS(validate_entries(corpus, too_long, 1, Task::adhoc_retrieval), InvalidResponse);
  CHECK_NOTHROW(validate_entries(corpus, too_long, 2, Task::adhoc_retrieval));
}

TEST_CASE("registry") {
  SystemRegistry reg;
  for (const auto& d : builtin_descriptors()) reg.add(d);
  CHECK(reg.descriptors().size() == 7);
  CHECK(reg.contains("bm25"));
  CHECK_THROWS_AS(reg.add(builtin_descriptors().front()), ValidationError);
  CHECK_THROWS_AS(reg.get("nope"), NotFound);
  auto json = to_json(reg.get("topic_jaccard")->descriptor());
  CHECK(system_from_json(json).task == Task::dataset_recommendation);
}

TEST_CASE("remote participant") {
  httplib::Server server;
  std::string last_qid;
  server.Get("/p/ranking", [&](const httplib::Request& req, httplib::Response& res) {
    last_qid = req.get_param_value("qid");
    if (req.get_param_value("query") == "broken") {
      res.set_content("not json", "application/json");
    } else if (req.get_param_value("query") == "dups") {
      res.set_content(R"(["d1","d1"])", "application/json");
    } else {
      res.set_content(R"(["d2","d1"])", "application/json");
    }
  });
  server.Get("/p/recommendation", [&](const httplib::Request& req, httplib::Response& res) {
    CHECK(req.get_param_value("item") == "p");
    res.set_content(R"(["r"])", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  SystemDescriptor d;
  d.system_id = "remote";
  d.mode = SystemMode::remote;
  d.address = "http://127.0.0.1:" + std::to_string(port) + "/p";
  auto sys = make_system(d);
  Corpus corpus("s", {pub("d1", "a"), pub("d2", "b"), pub("p", "c"), dataset("r", "d")});
  CHECK(sys->rank(corpus, {"q7", "heart disease"}, 10).entries == std::vector<std::string>{"d2", "d1"});
  CHECK(last_qid == "q7");
  CHECK_THROWS_AS(sys->rank(corpus, {"q7", "broken"}, 10), InvalidResponse);
  CHECK_THROWS_AS(sys->rank(corpus, {"q7", "dups"}, 10), InvalidResponse);

  SystemDescriptor r = d;
  r.system_id = "remote-rec";
  r.task = Task::dataset_recommendation;
  CHECK(make_system(r)->recommend(corpus, "p", 10).entries == std::vector<std::string>{"r"});

  server.stop();
  t.join();
  CHECK_THROWS_AS(sys->rank(corpus, {"q7", "x"}, 10), SystemUnavailable);
}
