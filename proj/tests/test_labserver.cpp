#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "livinglab/error.hpp"
#include "livinglab/labserver.hpp"
#include "livinglab/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace livinglab;
using Ids = std::vector<std::string>;
using testing::dataset;
using testing::pub;
using testing::TempDir;

namespace {

Site life_site() {
  std::vector<Record> records{pub("d1", "covid vaccine trial"), pub("d2", "covid heart risk"),
                              pub("d3", "heart diet"), pub("d4", "soil water crop"),
                              pub("d5", "covid covid vaccine")};
  auto queries = std::make_shared<HeadQuerySet>(
      std::vector<std::pair<std::string, std::string>>{{"q1", "covid"}, {"q2", "heart"}, {"q3", "soil crop"}});
  return Site{"livivo-desk", std::make_shared<Corpus>("livivo-desk", records), queries};
}

Site social_site() {
  std::vector<Record> records{pub("p1", "voting survey", "", {"elections", "survey"}),
                              pub("p2", "migration panel", "", {"migration"}),
                              dataset("r1", "election study", {"elections", "survey"}),
                              dataset("r2", "panel", {"survey"}), dataset("r3", "migration data", {"migration"})};
  auto queries = std::make_shared<HeadQuerySet>(
      std::vector<std::pair<std::string, std::string>>{{"p1", "voting survey"}, {"p2", "migration panel"}});
  return Site{"gesis-desk", std::make_shared<Corpus>("gesis-desk", records), queries};
}

void add_builtins(Lab& lab) {
  for (const auto& d : builtin_descriptors()) lab.add_system(make_system(d));
}

void setup(Lab& lab) {
  lab.add_site(life_site());
  lab.add_site(social_site());
  add_builtins(lab);
}

Experiment adhoc(std::vector<std::string> candidates = {"tfidf_cosine"}) {
  Experiment e;
  e.site_id = "livivo-desk";
  e.task = Task::adhoc_retrieval;
  e.baseline_system = "bm25";
  e.candidate_systems = std::move(candidates);
  e.seed = 77;
  return e;
}

std::shared_ptr<const System> precomputed(const TempDir& dir, const std::string& id,
                                          const std::string& run) {
  testing::spit(dir / (id + ".run"), run);
  SystemDescriptor d;
  d.system_id = id;
  d.mode = SystemMode::precomputed;
  d.run_path = dir / (id + ".run");
  return make_system(d);
}

std::string log_text(const TempDir& dir) { return testing::slurp(dir / kEventLogFile); }

}  // namespace

TEST_CASE("preset experiments are created in draft") {
  Lab lab;
  setup(lab);
  const auto id = lab.create_experiment(adhoc());
  CHECK(id == "exp-1");
  CHECK(lab.experiment(id).state == ExperimentState::draft);

  Experiment rec;
  rec.site_id = "gesis-desk";
  rec.task = Task::dataset_recommendation;
  rec.baseline_system = "topic_jaccard";
  rec.candidate_systems = {"random_shuffle"};
  const auto rid = lab.create_experiment(rec);
  CHECK(rid == "exp-2");
  CHECK(lab.experiment(rid).state == ExperimentState::draft);
}

TEST_CASE("create_experiment validation") {
  Lab lab;
  setup(lab);
  CHECK_THROWS_AS(lab.create_experiment(adhoc({"bm25"})), ValidationError);
  CHECK_THROWS_AS(lab.create_experiment(adhoc({"nope"})), NotFound);
  auto bad_site = adhoc();
  bad_site.site_id = "elsewhere";
  CHECK_THROWS_AS(lab.create_experiment(bad_site), NotFound);
  auto bad_fraction = adhoc();
  bad_fraction.traffic_fraction_experimental = 1.5;
  CHECK_THROWS_AS(lab.create_experiment(bad_fraction), ValidationError);
  CHECK_THROWS_AS(lab.create_experiment(adhoc({"topic_jaccard"})), ValidationError);
  CHECK(lab.experiments().empty());
}

TEST_CASE("lifecycle") {
  Lab lab;
  setup(lab);
  const auto id = lab.create_experiment(adhoc());
  CHECK_THROWS_AS(lab.create_session(id, "q1"), StateError);
  CHECK_THROWS_AS(lab.stop_experiment(id), StateError);
  CHECK(lab.start_experiment(id) == ExperimentState::running);
  CHECK_THROWS_AS(lab.start_experiment(id), StateError);
  lab.create_session(id, "q1");
  CHECK(lab.stop_experiment(id) == ExperimentState::stopped);
  CHECK_THROWS_AS(lab.create_session(id, "q1"), StateError);
  try {
    lab.start_experiment(id);
    FAIL("expected error");
  } catch (const StateError& e) {
    CHECK(std::string(e.what()).find("terminal state") != std::string::npos);
  }
  CHECK_THROWS_AS(lab.start_experiment("exp-99"), NotFound);
}

TEST_CASE("team-draft session serves an interleaving without labels") {
  TempDir dir("td");
  Lab lab;
  lab.add_site(life_site());
  lab.add_system(precomputed(dir, "base", "q1 Q0 d1 1 2 t\nq1 Q0 d2 2 1 t\n"));
  lab.add_system(precomputed(dir, "cand", "q1 Q0 d3 1 2 t\nq1 Q0 d1 2 1 t\n"));
  auto e = adhoc({"cand"});
  e.baseline_system = "base";
  e.k = 4;
  const auto id = lab.create_experiment(e);
  lab.start_experiment(id);
  const auto outcomes = oracle::team_draft_outcomes(Ids{"d1", "d2"}, Ids{"d3", "d1"}, 4);
  std::set<Ids> seen;
  for (int i = 0; i < 60; ++i) {
    const auto resp = lab.create_session(id, "q1");
    const auto s = lab.session(resp.session_id);
    CHECK(resp.docs == s.shown.record_ids());
    CHECK(std::any_of(outcomes.begin(), outcomes.end(), [&](const InterleavedList& o) {
      return o.entries == s.shown.entries;
    }));
    // The draw is the library's own coin sequence for this session's seed.
    Rng rng(session_seed(e.seed, resp.session_id));
    CHECK(oracle::team_draft(Ids{"d1", "d2"}, Ids{"d3", "d1"}, 4, [&] { return rng.coin(); }).entries ==
          s.shown.entries);
    seen.insert(resp.docs);
  }
  CHECK(seen.size() > 1);
}

TEST_CASE("ab with fraction 0 serves the baseline exactly") {
  Lab lab;
  setup(lab);
  auto e = adhoc();
  e.method = ExperimentMethod::ab;
  e.traffic_fraction_experimental = 0.0;
  const auto id = lab.create_experiment(e);
  lab.start_experiment(id);
  auto bm25 = make_system(builtin_descriptors().front());
  REQUIRE(bm25->id() == "bm25");
  for (const char* q : {"q1", "q2", "q3"}) {
    const auto expected = bm25->rank(*life_site().corpus, {q, life_site().queries->find(q)->text}, 10).entries;
    CHECK(lab.create_session(id, q).docs == expected);
  }
}

TEST_CASE("unavailable candidate degrades to the baseline") {
  Lab lab;
  setup(lab);
  SystemDescriptor dead;
  dead.system_id = "dead";
  dead.mode = SystemMode::remote;
  dead.address = "http://127.0.0.1:1";
  lab.add_system(make_system(dead));
  const auto id = lab.create_experiment(adhoc({"dead"}));
  lab.start_experiment(id);
  const auto resp = lab.create_session(id, "q1");
  const auto expected = make_system(builtin_descriptors().front())
                            ->rank(*life_site().corpus, {"q1", "covid"}, 10)
                            .entries;
  CHECK(resp.docs == expected);
  CHECK(lab.session(resp.session_id).degraded);
  lab.record_feedback(resp.session_id, {0});
  const auto report = lab.report(id);
  CHECK(report[0].sessions_total == 0);
  CHECK(report[0].degraded_excluded == 1);
  CHECK(report[0].wins + report[0].losses + report[0].ties == 0);
}

TEST_CASE("feedback") {
  TempDir dir("fb");
  Lab lab(LabOptions{dir.path(), 0});
  setup(lab);
  const auto id = lab.create_experiment(adhoc());
  lab.start_experiment(id);
  const auto s1 = lab.create_session(id, "q1");
  CHECK(lab.record_feedback(s1.session_id, {}) == SessionOutcome{Winner::tie, 0, 0});

  // Draw sessions until the experimental team holds two positions.
  SessionResponse s2;
  std::set<int> exp_positions;
  for (int attempt = 0; attempt < 50 && exp_positions.size() < 2; ++attempt) {
    s2 = lab.create_session(id, "q1");
    const auto shown = lab.session(s2.session_id).shown;
    exp_positions.clear();
    for (int i = 0; i < static_cast<int>(shown.size()); ++i) {
      if (shown.entries[i].team == Team::experimental) exp_positions.insert(i);
    }
  }
  REQUIRE(exp_positions.size() == 2);
  CHECK(lab.record_feedback(s2.session_id, exp_positions).winner == Winner::experimental);

  const auto before = log_text(dir);
  CHECK_THROWS_AS(lab.record_feedback(s2.session_id, exp_positions), StateError);
  CHECK(log_text(dir) == before);
  CHECK_THROWS_AS(lab.record_feedback("s99999999", {}), NotFound);
  const auto s3 = lab.create_session(id, "q2");
  CHECK_THROWS_AS(lab.record_feedback(s3.session_id, {50}), ValidationError);
}

TEST_CASE("reports") {
  Lab lab;
  setup(lab);
  const auto id = lab.create_experiment(adhoc({"tfidf_cosine", "reversed_bm25"}));
  auto zero = lab.report(id);
  REQUIRE(zero.size() == 2);
  CHECK(zero[0].sessions_total == 0);
  CHECK_FALSE(zero[0].outcome.has_value());
  lab.start_experiment(id);
  for (int i = 0; i < 10; ++i) {
    auto s = lab.create_session(id, "q1");
    lab.record_feedback(s.session_id, {0});
  }
  const auto before = lab.report(id);
  lab.stop_experiment(id);
  CHECK(lab.report(id) == before);
  CHECK(before[0].sessions_total == 5);
  CHECK(before[1].sessions_total == 5);
  CHECK_THROWS_AS(lab.report("exp-9"), NotFound);
}

TEST_CASE("round robin over candidates") {
  Lab lab;
  setup(lab);
  const auto id = lab.create_experiment(adhoc({"tfidf_cosine", "reversed_bm25", "bm25_recency"}));
  lab.start_experiment(id);
  std::map<std::string, int> counts;
  std::vector<std::string> order;
  for (int i = 0; i < 300; ++i) {
    auto s = lab.create_session(id, "q1");
    order.push_back(lab.session(s.session_id).candidate_system);
    ++counts[order.back()];
  }
  CHECK(counts.size() == 3);
  for (const auto& [_, n] : counts) CHECK(n == 100);
  CHECK(order[0] == "tfidf_cosine");
  CHECK(order[1] == "reversed_bm25");
  CHECK(order[2] == "bm25_recency");
}

TEST_CASE("session ids and seeds are distinct") {
  Lab lab;
  setup(lab);
  const auto id = lab.create_experiment(adhoc());
  lab.start_experiment(id);
  std::unordered_set<std::string> ids;
  std::unordered_set<std::uint64_t> seeds;
  for (int i = 0; i < 10000; ++i) {
    auto s = lab.create_session(id, i % 2 ? "q1" : "q2");
    ids.insert(s.session_id);
    seeds.insert(session_seed(77, s.session_id));
  }
  CHECK(ids.size() == 10000);
  CHECK(seeds.size() == 10000);
}

TEST_CASE("concurrent sessions keep the log consistent") {
  TempDir dir("conc");
  {
    Lab lab(LabOptions{dir.path(), 50});
    setup(lab);
    const auto id = lab.create_experiment(adhoc({"tfidf_cosine", "reversed_bm25"}));
    lab.start_experiment(id);
    std::vector<std::thread> threads;
    std::atomic<int> errors{0};
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 50; ++i) {
          try {
            auto s = lab.create_session(id, (t + i) % 2 ? "q1" : "q2");
            lab.record_feedback(s.session_id, {i % 2});
          } catch (...) {
            ++errors;
          }
        }
      });
    }
    for (auto& th : threads) th.join();
    CHECK(errors == 0);
    const auto live = lab.report(id);
    CHECK(live[0].sessions_total + live[1].sessions_total == 400);
    CHECK(live[0].sessions_total == 200);
    CHECK(replay_log(dir / kEventLogFile).report(id) == live);
    CHECK(restore_data_dir(dir.path()).report(id) == live);
  }
}

TEST_CASE("replay") {
  TempDir dir("replay");
  std::vector<EvaluationProfile> live;
  std::string id;
  {
    Lab lab(LabOptions{dir.path(), 7});
    setup(lab);
    id = lab.create_experiment(adhoc({"tfidf_cosine", "reversed_bm25"}));
    lab.start_experiment(id);
    for (int i = 0; i < 40; ++i) {
      auto s = lab.create_session(id, i % 3 ? "q1" : "q3");
      if (i % 5) lab.record_feedback(s.session_id, i % 3 ? std::set<int>{0, 2} : std::set<int>{0});
    }
    live = lab.report(id);
  }
  const auto live_json = report_to_json(id, live).dump();
  CHECK(report_to_json(id, replay_log(dir / kEventLogFile).report(id)).dump() == live_json);
  CHECK(report_to_json(id, restore_data_dir(dir.path()).report(id)).dump() == live_json);
  CHECK(std::filesystem::exists(dir / kSnapshotFile));

  // Reopening continues numbering after the restored state.
  {
    Lab lab(LabOptions{dir.path(), 7});
    setup(lab);
    CHECK(lab.report(id) == live);
    auto s = lab.create_session(id, "q1");
    CHECK(s.session_id == "s00000041");
  }
  CHECK(replay_log(dir / kEventLogFile).sessions.size() == 41);
}

TEST_CASE("empty log replays to an empty state") {
  TempDir dir("empty");
  testing::spit(dir / "events.jsonl", "");
  auto state = replay_log(dir / "events.jsonl");
  CHECK(state.experiments.empty());
  CHECK(state.sessions.empty());
  CHECK(state.last_sequence_no == 0);
  CHECK(replay_log(dir / "absent.jsonl").experiments.empty());
}

TEST_CASE("sequence gaps are reported") {
  TempDir dir("gap");
  {
    Lab lab(LabOptions{dir.path(), 0});
    setup(lab);
    lab.start_experiment(lab.create_experiment(adhoc()));
    lab.create_session("exp-1", "q1");
  }
  auto text = log_text(dir);
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 3);
  testing::spit(dir / "gapped.jsonl", lines[0] + "\n" + lines[2] + "\n");
  try {
    replay_log(dir / "gapped.jsonl");
    FAIL("expected gap error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("gap") != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
}

TEST_CASE("torn final line is dropped") {
  TempDir dir("torn");
  {
    Lab lab(LabOptions{dir.path(), 0});
    setup(lab);
    lab.start_experiment(lab.create_experiment(adhoc()));
  }
  {
    std::ofstream out(dir / kEventLogFile, std::ios::app | std::ios::binary);
    out << R"({"kind":"session_created","payl)";
  }
  auto state = replay_log(dir / kEventLogFile);
  CHECK(state.last_sequence_no == 2);
  {
    Lab lab(LabOptions{dir.path(), 0});
    setup(lab);
    auto s = lab.create_session("exp-1", "q1");
    CHECK(s.session_id == "s00000001");
  }
  CHECK(replay_log(dir / kEventLogFile).last_sequence_no == 3);
}

TEST_CASE("api-registered systems survive a restart") {
  TempDir dir("reg");
  SystemDescriptor twin;
  twin.system_id = "bm25-twin";
  twin.ranker = BuiltinRanker::bm25;
  {
    Lab lab(LabOptions{dir.path(), 0});
    setup(lab);
    lab.register_system(twin);
    CHECK_THROWS_AS(lab.register_system(twin), StateError);
  }
  Lab lab(LabOptions{dir.path(), 0});
  setup(lab);
  const auto systems = lab.systems();
  CHECK(std::any_of(systems.begin(), systems.end(),
                    [](const SystemDescriptor& d) { return d.system_id == "bm25-twin"; }));
}

TEST_CASE("recommendation sessions") {
  Lab lab;
  setup(lab);
  Experiment e;
  e.site_id = "gesis-desk";
  e.task = Task::dataset_recommendation;
  e.baseline_system = "topic_jaccard";
  e.candidate_systems = {"random_shuffle"};
  const auto id = lab.create_experiment(e);
  lab.start_experiment(id);
  auto s = lab.create_session(id, "p1");
  CHECK_FALSE(s.docs.empty());
  for (const auto& d : s.docs) CHECK(social_site().corpus->find(d)->kind == RecordKind::research_data);
  CHECK_THROWS_AS(lab.create_session(id, "r1"), WrongKind);
  CHECK_THROWS_AS(lab.create_session(id, "nope"), UnknownRecord);
}
