#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "livinglab/config.hpp"
#include "livinglab/evaluation.hpp"
#include "livinglab/labserver.hpp"

namespace livinglab {

/// What a simulated site and operator need from the lab. Implemented
/// in-process and over HTTP so both modes run the same campaign code.
class LabClient {
 public:
  virtual ~LabClient() = default;
  virtual std::string create_experiment(const Experiment& experiment) = 0;
  virtual void start_experiment(const std::string& experiment_id) = 0;
  virtual void stop_experiment(const std::string& experiment_id) = 0;
  virtual SessionResponse create_session(const std::string& experiment_id, Task task,
                                         const std::string& query_or_item) = 0;
  virtual void record_feedback(const std::string& session_id, const std::set<int>& clicks) = 0;
  virtual std::vector<EvaluationProfile> report(const std::string& experiment_id) = 0;
};

class EmbeddedLabClient final : public LabClient {
 public:
  explicit EmbeddedLabClient(Lab& lab) : lab_(lab) {}
  std::string create_experiment(const Experiment& experiment) override;
  void start_experiment(const std::string& experiment_id) override;
  void stop_experiment(const std::string& experiment_id) override;
  SessionResponse create_session(const std::string& experiment_id, Task task,
                                 const std::string& query_or_item) override;
  void record_feedback(const std::string& session_id, const std::set<int>& clicks) override;
  std::vector<EvaluationProfile> report(const std::string& experiment_id) override;

 private:
  Lab& lab_;
};

/// Talks to a lab server. Non-2xx answers throw: 404 NotFound, 409
/// StateError, 503 SystemUnavailable, others Error. Connection failures
/// throw SystemUnavailable.
class HttpLabClient final : public LabClient {
 public:
  /// `base_url` like "http://127.0.0.1:8080".
  explicit HttpLabClient(std::string base_url);
  ~HttpLabClient() override;

  /// Called with (path, status, body) for every site-role response.
  std::function<void(std::string_view, int, const std::string&)> on_site_response;

  std::string create_experiment(const Experiment& experiment) override;
  void start_experiment(const std::string& experiment_id) override;
  void stop_experiment(const std::string& experiment_id) override;
  SessionResponse create_session(const std::string& experiment_id, Task task,
                                 const std::string& query_or_item) override;
  void record_feedback(const std::string& session_id, const std::set<int>& clicks) override;
  std::vector<EvaluationProfile> report(const std::string& experiment_id) override;
  /// Raw body of GET /api/experiments/{id}/report.
  std::string report_body(const std::string& experiment_id);

 private:
  std::string post(const std::string& path, const std::string& body, bool site_role);
  std::string get(const std::string& path);

  std::string base_url_;
};

struct CampaignResult {
  std::string experiment_id;
  std::vector<EvaluationProfile> profiles;
  /// Record ids of every list served, in session order.
  std::vector<std::vector<std::string>> served;
};

/// Creates and starts the experiment, then per session: draw a head query
/// (Zipf over rank), request a session, simulate clicks, send feedback.
/// Stops the experiment and returns the report. Sequential, so the result
/// is a pure function of the configuration and seeds.
CampaignResult run_campaign(const CampaignConfig& config, LabClient& client, const Site& site,
                            const Qrels& qrels);

/// In-process campaign: builds a Lab (persisting to `data_dir` when set),
/// loads the configured sites and runs the campaign against it.
CampaignResult run_campaign_embedded(const CampaignConfig& config,
                                     const std::optional<std::filesystem::path>& data_dir = {});

}  // namespace livinglab
