#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "livinglab/campaign.hpp"
#include "livinglab/clicksim.hpp"
#include "livinglab/config.hpp"
#include "livinglab/corpus.hpp"
#include "livinglab/error.hpp"
#include "livinglab/evaluation.hpp"
#include "livinglab/generator.hpp"
#include "livinglab/interleave.hpp"
#include "livinglab/labserver.hpp"
#include "livinglab/rng.hpp"
#include "livinglab/systems.hpp"

namespace py = pybind11;
namespace ll = livinglab;

namespace {

py::object to_python(const nlohmann::json& value) {
  return py::module_::import("json").attr("loads")(value.dump());
}

nlohmann::json from_python(const py::object& value) {
  const auto text = py::module_::import("json").attr("dumps")(value).cast<std::string>();
  return nlohmann::json::parse(text);
}

py::dict profile_dict(const ll::EvaluationProfile& profile) {
  return to_python(ll::profile_to_json(profile)).cast<py::dict>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Living-lab evaluation core: corpora, rankers, interleaving, click simulation.";

  py::register_exception<ll::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ll::NotFound>(m, "NotFound", PyExc_LookupError);
  py::register_exception<ll::StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<ll::SystemUnavailable>(m, "SystemUnavailable", PyExc_RuntimeError);

  m.def("tokenize", &ll::tokenize, py::arg("text"));
  m.def("derive_seed",
        py::overload_cast<std::uint64_t, std::string_view>(&ll::derive_seed),
        py::arg("seed"), py::arg("label"));

  py::class_<ll::Corpus, std::shared_ptr<ll::Corpus>>(m, "Corpus")
      .def(py::init([](std::string site_id, const py::list& records) {
             std::vector<ll::Record> parsed;
             for (const auto& r : records) {
               parsed.push_back(ll::validate_record(from_python(py::reinterpret_borrow<py::object>(r))));
             }
             return std::make_shared<ll::Corpus>(std::move(site_id), std::move(parsed));
           }),
           py::arg("site_id"), py::arg("records"))
      .def_static("load", [](const std::filesystem::path& path, std::string site_id) {
        return std::make_shared<ll::Corpus>(ll::load_corpus(path, std::move(site_id)));
      }, py::arg("path"), py::arg("site_id"))
      .def_property_readonly("site_id", &ll::Corpus::site_id)
      .def("__len__", &ll::Corpus::size)
      .def("__contains__", [](const ll::Corpus& c, const std::string& id) { return c.find(id) != nullptr; })
      .def("record", [](const ll::Corpus& c, const std::string& id) {
        const auto* r = c.find(id);
        if (!r) throw ll::NotFound("unknown record '" + id + "'");
        return to_python(ll::record_to_json(*r));
      }, py::arg("record_id"))
      .def("record_ids", [](const ll::Corpus& c) {
        std::vector<std::string> ids;
        for (const auto& r : c.records()) ids.push_back(r.id);
        return ids;
      })
      .def("document_frequency", &ll::Corpus::document_frequency, py::arg("term"))
      .def_property_readonly("avg_doc_length", &ll::Corpus::avg_doc_length);

  m.def("score_bm25", [](const ll::Corpus& corpus, const std::string& record_id,
                         const std::vector<std::string>& terms) {
    return ll::score_bm25(corpus, record_id, terms);
  }, py::arg("corpus"), py::arg("record_id"), py::arg("query_terms"));

  m.def("rank", [](std::shared_ptr<ll::Corpus> corpus, const std::string& ranker,
                   const std::string& query, int k) {
    ll::SystemDescriptor d;
    d.system_id = ranker;
    d.ranker = ll::parse_builtin_ranker(ranker);
    d.task = ll::task_of(*d.ranker);
    const auto system = ll::make_system(d);
    if (d.task == ll::Task::dataset_recommendation) return system->recommend(*corpus, query, k).entries;
    return system->rank(*corpus, ll::Query{"", query}, k).entries;
  }, py::arg("corpus"), py::arg("ranker"), py::arg("query"), py::arg("k") = 10,
     "Top-k record ids from a builtin ranker: query text for ad-hoc rankers, seed record id for recommenders.");

  m.def("team_draft_interleave", [](const std::vector<std::string>& baseline,
                                    const std::vector<std::string>& experimental, int k,
                                    std::uint64_t seed) {
    const auto list = ll::team_draft_interleave(baseline, experimental, k, seed);
    py::list out;
    for (const auto& e : list.entries) out.append(py::make_tuple(e.record_id, std::string(ll::to_string(e.team))));
    return out;
  }, py::arg("baseline"), py::arg("experimental"), py::arg("k"), py::arg("seed"));

  m.def("assign_credit", [](const std::vector<std::pair<std::string, std::string>>& shown,
                            const std::set<int>& clicks) {
    ll::InterleavedList list;
    for (const auto& [id, team] : shown) list.entries.push_back({id, ll::parse_team(team)});
    const auto outcome = ll::assign_credit(list, clicks);
    py::dict d;
    d["winner"] = std::string(ll::to_string(outcome.winner));
    d["clicks_baseline"] = outcome.clicks_baseline;
    d["clicks_experimental"] = outcome.clicks_experimental;
    return d;
  }, py::arg("shown"), py::arg("clicks"));

  m.def("sign_test", &ll::sign_test, py::arg("wins"), py::arg("losses"));

  m.def("simulate_clicks", [](const std::vector<int>& grades, const std::string& model,
                              std::optional<std::vector<double>> examination, double continuation,
                              std::uint64_t seed) {
    auto qrels = std::make_shared<ll::Qrels>();
    std::vector<std::string> shown;
    for (std::size_t i = 0; i < grades.size(); ++i) {
      shown.push_back("d" + std::to_string(i));
      qrels->set("q", shown.back(), grades[i]);
    }
    ll::ClickModelConfig cfg;
    cfg.model = ll::parse_click_model(model);
    cfg.examination = examination ? *examination
                                  : ll::default_examination(std::max<int>(10, static_cast<int>(grades.size())));
    cfg.continuation = continuation;
    cfg.relevance = qrels;
    cfg.validate();
    return ll::simulate_clicks(cfg, "q", shown, seed);
  }, py::arg("grades"), py::arg("model") = "pbm", py::arg("examination") = py::none(),
     py::arg("continuation") = 0.5, py::arg("seed") = 0,
     "Clicked positions for a list whose entries carry the given relevance grades (0..2).");

  m.def("generate_site", [](const std::string& profile, std::size_t scale, std::uint64_t seed) {
    const auto p = ll::parse_site_profile(profile);
    auto desk = ll::generate_site(p, scale, seed);
    py::list queries;
    for (const auto& q : desk.queries.queries()) queries.append(py::make_tuple(q.query_id, q.text));
    auto corpus = std::make_shared<ll::Corpus>(profile, std::move(desk.records));
    py::dict out;
    out["corpus"] = corpus;
    out["queries"] = queries;
    out["task"] = std::string(ll::to_string(ll::task_for(p)));
    return out;
  }, py::arg("profile"), py::arg("scale"), py::arg("seed") = 0);

  m.def("run_campaign", [](const py::object& config, std::optional<std::filesystem::path> data_dir,
                           const std::filesystem::path& base_dir) {
    nlohmann::json body;
    if (py::isinstance<py::str>(config)) {
      body = ll::read_json_file(config.cast<std::string>());
    } else if (py::isinstance(config, py::module_::import("pathlib").attr("PurePath"))) {
      body = ll::read_json_file(config.cast<std::filesystem::path>());
    } else {
      body = from_python(config);
    }
    const auto parsed = ll::parse_campaign_config(body, base_dir);
    ll::CampaignResult result;
    {
      py::gil_scoped_release release;
      result = ll::run_campaign_embedded(parsed, data_dir);
    }
    py::list profiles;
    for (const auto& p : result.profiles) profiles.append(profile_dict(p));
    py::dict out;
    out["experiment_id"] = result.experiment_id;
    out["profiles"] = profiles;
    out["served"] = result.served;
    return out;
  }, py::arg("config"), py::arg("data_dir") = py::none(), py::arg("base_dir") = std::filesystem::path("."),
     "Runs a simulated campaign against an in-process lab. `config` is a path or a dict.");

  m.def("format_report", [](const py::list& profiles, const std::string& format) {
    std::vector<ll::EvaluationProfile> parsed;
    for (const auto& p : profiles) parsed.push_back(ll::profile_from_json(from_python(py::reinterpret_borrow<py::object>(p))));
    return ll::format_report(parsed, ll::parse_report_format(format));
  }, py::arg("profiles"), py::arg("format") = "table");

  m.def("replay_report", [](const std::filesystem::path& data_dir, const std::string& experiment_id) {
    ll::LabOptions options;
    options.data_dir = data_dir;
    ll::Lab lab(options);
    return to_python(ll::report_to_json(experiment_id, lab.report(experiment_id)));
  }, py::arg("data_dir"), py::arg("experiment_id"),
     "Report rebuilt from a persisted lab data directory.");
}
