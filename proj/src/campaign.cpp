#include "livinglab/campaign.hpp"

#include <httplib.h>

#include "livinglab/error.hpp"
#include "livinglab/rng.hpp"

namespace livinglab {

using nlohmann::json;

std::string EmbeddedLabClient::create_experiment(const Experiment& experiment) {
  return lab_.create_experiment(experiment);
}

void EmbeddedLabClient::start_experiment(const std::string& experiment_id) {
  lab_.start_experiment(experiment_id);
}

void EmbeddedLabClient::stop_experiment(const std::string& experiment_id) {
  lab_.stop_experiment(experiment_id);
}

SessionResponse EmbeddedLabClient::create_session(const std::string& experiment_id, Task,
                                                  const std::string& query_or_item) {
  return lab_.create_session(experiment_id, query_or_item);
}

void EmbeddedLabClient::record_feedback(const std::string& session_id,
                                        const std::set<int>& clicks) {
  lab_.record_feedback(session_id, clicks);
}

std::vector<EvaluationProfile> EmbeddedLabClient::report(const std::string& experiment_id) {
  return lab_.report(experiment_id);
}

namespace {

[[noreturn]] void throw_for_status(int status, const std::string& body) {
  std::string message = body;
  try {
    message = json::parse(body).at("error").get<std::string>();
  } catch (const json::exception&) {
  }
  switch (status) {
    case 400:
      throw ValidationError(message);
    case 404:
      throw NotFound(message);
    case 409:
      throw StateError(message);
    case 503:
      throw SystemUnavailable(message);
    default:
      throw Error("HTTP " + std::to_string(status) + ": " + message);
  }
}

}  // namespace

HttpLabClient::HttpLabClient(std::string base_url) : base_url_(std::move(base_url)) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

HttpLabClient::~HttpLabClient() = default;

std::string HttpLabClient::post(const std::string& path, const std::string& body, bool site_role) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(std::chrono::seconds(30));
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    throw SystemUnavailable("lab server " + base_url_ + " unreachable: " +
                            httplib::to_string(res.error()));
  }
  if (site_role && on_site_response) on_site_response(path, res->status, res->body);
  if (res->status / 100 != 2) throw_for_status(res->status, res->body);
  return res->body;
}

std::string HttpLabClient::get(const std::string& path) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(std::chrono::seconds(30));
  auto res = client.Get(path);
  if (!res) {
    throw SystemUnavailable("lab server " + base_url_ + " unreachable: " +
                            httplib::to_string(res.error()));
  }
  if (res->status / 100 != 2) throw_for_status(res->status, res->body);
  return res->body;
}

std::string HttpLabClient::create_experiment(const Experiment& experiment) {
  auto body = post("/api/experiments", to_json(experiment).dump(), false);
  return json::parse(body).at("experiment_id").get<std::string>();
}

void HttpLabClient::start_experiment(const std::string& experiment_id) {
  post("/api/experiments/" + experiment_id + "/start", "{}", false);
}

void HttpLabClient::stop_experiment(const std::string& experiment_id) {
  post("/api/experiments/" + experiment_id + "/stop", "{}", false);
}

SessionResponse HttpLabClient::create_session(const std::string& experiment_id, Task task,
                                              const std::string& query_or_item) {
  json request{{"experiment_id", experiment_id}};
  request[task == Task::adhoc_retrieval ? "query_id" : "seed_record"] = query_or_item;
  const auto body = json::parse(post("/api/sessions", request.dump(), true));
  return SessionResponse{body.at("session_id").get<std::string>(),
                         body.at("docs").get<std::vector<std::string>>()};
}

void HttpLabClient::record_feedback(const std::string& session_id, const std::set<int>& clicks) {
  post("/api/sessions/" + session_id + "/feedback", json{{"clicks", clicks}}.dump(), true);
}

std::string HttpLabClient::report_body(const std::string& experiment_id) {
  return get("/api/experiments/" + experiment_id + "/report");
}

std::vector<EvaluationProfile> HttpLabClient::report(const std::string& experiment_id) {
  const auto body = json::parse(report_body(experiment_id));
  std::vector<EvaluationProfile> profiles;
  for (const auto& p : body.at("profiles")) profiles.push_back(profile_from_json(p));
  return profiles;
}

CampaignResult run_campaign(const CampaignConfig& config, LabClient& client, const Site& site,
                            const Qrels& qrels) {
  config.validate();
  Experiment experiment = config.experiment;
  experiment.seed = config.experiment_seed();

  ClickModelConfig clicks_cfg = config.click_model;
  clicks_cfg.relevance = std::make_shared<const Qrels>(qrels);
  const SimulatedUserPool pool{config.zipf_exponent, derive_seed(config.master_seed, "users")};

  CampaignResult result;
  result.experiment_id = client.create_experiment(experiment);
  client.start_experiment(result.experiment_id);
  for (int i = 0; i < config.sessions; ++i) {
    const std::uint64_t draw = derive_seed(config.master_seed, static_cast<std::uint64_t>(i));
    const auto target = sample_query(pool, *site.queries, draw);
    const auto session = client.create_session(result.experiment_id, experiment.task, target);
    const auto clicked = simulate_clicks(clicks_cfg, target, session.docs, derive_seed(draw, "clicks"));
    client.record_feedback(session.session_id, clicked);
    result.served.push_back(session.docs);
  }
  client.stop_experiment(result.experiment_id);
  result.profiles = client.report(result.experiment_id);
  return result;
}

CampaignResult run_campaign_embedded(const CampaignConfig& config,
                                     const std::optional<std::filesystem::path>& data_dir) {
  config.validate();
  std::vector<LoadedSite> sites;
  const LoadedSite* target = nullptr;
  for (const auto& s : config.lab.sites) {
    const bool used = s.site_id == config.experiment.site_id;
    sites.push_back(load_site(s, used ? std::optional<Task>(config.experiment.task) : std::nullopt));
  }
  for (const auto& s : sites) {
    if (s.site.site_id == config.experiment.site_id) target = &s;
  }
  LabOptions options;
  options.data_dir = data_dir ? data_dir : config.lab.data_dir;
  options.snapshot_every = config.lab.snapshot_every;
  Lab lab(options);
  configure_lab(lab, config.lab, sites);
  EmbeddedLabClient client(lab);
  return run_campaign(config, client, target->site, *target->qrels);
}

}  // namespace livinglab
