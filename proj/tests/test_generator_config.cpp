#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "livinglab/clicksim.hpp"
#include "livinglab/config.hpp"
#include "livinglab/error.hpp"
#include "livinglab/generator.hpp"
#include "support.hpp"

using namespace livinglab;
using nlohmann::json;
using testing::TempDir;

#ifndef PRESET_DIR
#define PRESET_DIR "configs"
#endif

TEST_CASE("life science profile") {
  auto site = generate_life_science(2000, 4);
  CHECK(site.records.size() == 2000);
  CHECK(site.queries.size() == kDefaultHeadQueries);
  for (const auto& r : site.records) {
    CHECK(r.kind == RecordKind::publication);
    CHECK_FALSE(r.title.empty());
  }
  Corpus corpus("livivo-desk", site.records);
  auto qrels = build_qrels(corpus, site.queries, Task::adhoc_retrieval);
  for (const auto& q : site.queries.queries()) {
    bool any_relevant = false;
    for (const auto& r : site.records) any_relevant |= qrels.grade(q.query_id, r.id) > 0;
    CHECK(any_relevant);
  }
  CHECK(generate_site(SiteProfile::life_science, 25000, 1).records.size() == 25000);
}

TEST_CASE("social science profile") {
  auto site = generate_site(SiteProfile::social_science, 100, 4);
  std::size_t pubs = 0, data = 0;
  for (const auto& r : site.records) (r.kind == RecordKind::publication ? pubs : data)++;
  CHECK(pubs == 950);
  CHECK(data == 840);
  Corpus corpus("gesis-desk", site.records);
  for (const auto& q : site.queries.queries()) {
    const Record* seed = corpus.find(q.query_id);
    REQUIRE(seed);
    CHECK(seed->kind == RecordKind::publication);
    CHECK(q.text == seed->title);
  }
  CHECK(task_for(SiteProfile::social_science) == Task::dataset_recommendation);
  CHECK_THROWS_AS(generate_site(SiteProfile::social_science, 0, 1), ValidationError);
}

TEST_CASE("generation is deterministic per seed") {
  TempDir a("gen-a"), b("gen-b"), c("gen-c");
  for (const auto* dir : {&a, &b}) {
    auto site = generate_site(SiteProfile::social_science, 200, 21);
    Corpus corpus("gesis-desk", site.records);
    write_desk_site(dir->path(), site, build_qrels(corpus, site.queries, Task::dataset_recommendation));
  }
  auto other = generate_site(SiteProfile::social_science, 200, 22);
  Corpus oc("gesis-desk", other.records);
  write_desk_site(c.path(), other, build_qrels(oc, other.queries, Task::dataset_recommendation));
  for (const char* f : {"corpus.jsonl", "queries.tsv", "qrels.tsv"}) {
    CHECK(testing::slurp(a / f) == testing::slurp(b / f));
    CHECK_FALSE(testing::slurp(a / f).empty());
  }
  CHECK(testing::slurp(a / "corpus.jsonl") != testing::slurp(c / "corpus.jsonl"));

  // The written files load back into the same site.
  auto site = generate_site(SiteProfile::social_science, 200, 21);
  CHECK(read_records(a / "corpus.jsonl") == site.records);
  CHECK(load_head_queries(a / "queries.tsv").size() == site.queries.size());
}

TEST_CASE("bind addresses") {
  CHECK(parse_bind_address("0.0.0.0:9000") == std::pair<std::string, int>{"0.0.0.0", 9000});
  CHECK_THROWS_AS(parse_bind_address(":8081"), ValidationError);
  CHECK_THROWS_AS(parse_bind_address("localhost"), ValidationError);
  CHECK_THROWS_AS(parse_bind_address("h:99999"), ValidationError);
  CHECK_THROWS_AS(parse_bind_address("h:80x"), ValidationError);
}

TEST_CASE("lab config resolves paths against its directory") {
  TempDir dir("cfg");
  const auto body = json::parse(R"({
    "bind": "127.0.0.1:9100",
    "data_dir": "state",
    "sites": [{"site_id": "s", "corpus": "c.jsonl", "queries": "q.tsv"}],
    "systems": [{"system_id": "pre", "mode": "precomputed", "task": "adhoc_retrieval", "run_path": "runs/a.run"}]
  })");
  auto cfg = parse_lab_config(body, dir.path());
  CHECK(cfg.bind_port == 9100);
  CHECK(*cfg.data_dir == dir.path() / "state");
  CHECK(*cfg.sites[0].corpus == dir.path() / "c.jsonl");
  CHECK(*cfg.systems[0].run_path == dir.path() / "runs/a.run");

  testing::spit(dir / "commented.json", "// comment\n{\"sites\": [] /* inline */}\n");
  CHECK(read_json_file(dir / "commented.json").at("sites").empty());
  testing::spit(dir / "broken.json", "{");
  CHECK_THROWS_AS(read_json_file(dir / "broken.json"), ValidationError);
  CHECK_THROWS_AS(read_json_file(dir / "absent.json"), Error);
}

TEST_CASE("file-backed sites") {
  TempDir dir("files");
  auto site = generate_life_science(300, 2, 5);
  Corpus corpus("x", site.records);
  write_desk_site(dir.path(), site, build_qrels(corpus, site.queries, Task::adhoc_retrieval));
  SiteConfig sc;
  sc.site_id = "x";
  sc.corpus = dir / "corpus.jsonl";
  sc.queries = dir / "queries.tsv";
  sc.qrels = dir / "qrels.tsv";
  auto loaded = load_site(sc, Task::adhoc_retrieval);
  CHECK(loaded.site.corpus->size() == 300);
  CHECK(loaded.site.queries->size() == 5);
  CHECK(loaded.qrels->sorted() == build_qrels(corpus, site.queries, Task::adhoc_retrieval).sorted());
}

TEST_CASE("campaign config") {
  const auto base = json::parse(R"({
    "sites": [{"site_id": "livivo-desk", "generate": {"profile": "life_science", "scale": 100}}],
    "experiment": {"site_id": "livivo-desk", "task": "adhoc_retrieval",
                   "baseline_system": "bm25", "candidate_systems": ["reversed_bm25"]},
    "sessions": 10
  })");
  auto cfg = parse_campaign_config(base, ".");
  CHECK(cfg.sessions == 10);
  CHECK_FALSE(cfg.experiment_seed_given);
  CHECK(cfg.experiment_seed() == derive_seed(cfg.master_seed, "experiment"));
  CHECK_NOTHROW(cfg.validate());

  auto zero = base;
  zero["sessions"] = 0;
  CHECK_THROWS_AS(parse_campaign_config(zero, ".").validate(), ValidationError);
  auto wrong_site = base;
  wrong_site["experiment"]["site_id"] = "elsewhere";
  CHECK_THROWS_AS(parse_campaign_config(wrong_site, ".").validate(), ValidationError);
  auto cascade = base;
  cascade["click_model"] = {{"model", "cascade"}, {"continuation", 0.3}};
  CHECK(parse_campaign_config(cascade, ".").click_model.model == ClickModel::cascade);
}

TEST_CASE("shipped presets parse and create draft experiments") {
  const std::filesystem::path presets = PRESET_DIR;
  for (const char* name : {"adhoc-life-science", "dataset-recommendation", "null-self-interleaving",
                           "sensitivity-reversed-bm25"}) {
    CAPTURE(name);
    const auto path = resolve_config_path(name, presets);
    auto cfg = parse_campaign_config(read_json_file(path), path.parent_path());
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.sessions == 1000);
    std::vector<LoadedSite> sites;
    for (const auto& s : cfg.lab.sites) sites.push_back(load_site(s, cfg.experiment.task));
    Lab lab;
    configure_lab(lab, cfg.lab, sites);
    const auto id = lab.create_experiment(cfg.experiment);
    CHECK(lab.experiment(id).state == ExperimentState::draft);
  }
  const auto lab_path = resolve_config_path("lab", presets);
  auto lab_cfg = parse_lab_config(read_json_file(lab_path), lab_path.parent_path());
  CHECK(lab_cfg.sites.size() == 2);
  CHECK_THROWS_AS(resolve_config_path("no-such-preset", presets), NotFound);
}
