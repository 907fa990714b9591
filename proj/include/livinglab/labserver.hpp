#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "livinglab/corpus.hpp"
#include "livinglab/evaluation.hpp"
#include "livinglab/rng.hpp"
#include "livinglab/session.hpp"
#include "livinglab/systems.hpp"

namespace livinglab {

enum class ExperimentMethod { ab, team_draft };
enum class ExperimentState { draft, running, stopped };

std::string_view to_string(ExperimentMethod method);
std::string_view to_string(ExperimentState state);
ExperimentMethod parse_experiment_method(std::string_view text);
ExperimentState parse_experiment_state(std::string_view text);

struct Experiment {
  std::string experiment_id;  // assigned by the server when empty
  std::string site_id;
  Task task = Task::adhoc_retrieval;
  std::string baseline_system;
  std::vector<std::string> candidate_systems;
  ExperimentMethod method = ExperimentMethod::team_draft;
  double traffic_fraction_experimental = 0.5;
  int k = kDefaultCutoff;
  std::uint64_t seed = 0;
  ExperimentState state = ExperimentState::draft;

  friend bool operator==(const Experiment&, const Experiment&) = default;
};

nlohmann::json to_json(const Experiment& experiment);
/// Missing optional fields take their defaults. Throws ValidationError.
Experiment experiment_from_json(const nlohmann::json& body);

nlohmann::json to_json(const Session& session);
Session session_from_json(const nlohmann::json& body);

/// Seed of one session's interleaving and A/B draw.
inline std::uint64_t session_seed(std::uint64_t experiment_seed, std::string_view session_id) {
  return derive_seed(experiment_seed, session_id);
}

// ---------------------------------------------------------------------------
// Event log

enum class EventKind {
  experiment_created,
  started,
  stopped,
  session_created,
  feedback_recorded,
  system_registered,
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct EventRecord {
  std::uint64_t sequence_no = 0;
  EventKind kind = EventKind::experiment_created;
  nlohmann::json payload;
  Timestamp recorded_at = 0;
};

nlohmann::json to_json(const EventRecord& event);
EventRecord event_from_json(const nlohmann::json& body);

/// Reads a JSON-lines event log. Sequence numbers must continue from
/// `after` without gaps. Throws ValidationError naming the gap.
std::vector<EventRecord> read_event_log(const std::filesystem::path& path,
                                        std::uint64_t after = 0);

/// Append-only writer. Each append is flushed before it returns.
class EventLogWriter {
 public:
  EventLogWriter() = default;  // in-memory: appends are numbered but not stored
  EventLogWriter(std::filesystem::path path, std::uint64_t last_sequence_no);

  EventRecord append(EventKind kind, nlohmann::json payload, Timestamp recorded_at);
  std::uint64_t last_sequence_no() const noexcept { return last_; }

 private:
  std::optional<std::ofstream> out_;
  std::uint64_t last_ = 0;
};

// ---------------------------------------------------------------------------
// State: a pure fold over the event log

struct LabState {
  struct ExperimentEntry {
    Experiment config;
    std::vector<std::string> session_ids;
  };

  std::map<std::string, ExperimentEntry> experiments;
  std::map<std::string, Session> sessions;
  std::vector<SystemDescriptor> registered_systems;  // via the API, not config
  std::uint64_t next_experiment_no = 1;
  std::uint64_t next_session_no = 1;
  std::uint64_t last_sequence_no = 0;

  /// Applies one event. Throws ValidationError when the event does not fit
  /// the state (corrupt log).
  void apply(const EventRecord& event);

  /// Profiles for every candidate of the experiment, in candidate order.
  std::vector<EvaluationProfile> report(const std::string& experiment_id) const;

  nlohmann::json to_json() const;
  static LabState from_json(const nlohmann::json& body);
};

inline constexpr const char* kEventLogFile = "events.jsonl";
inline constexpr const char* kSnapshotFile = "snapshot.json";

/// Folds a log file into a state, starting from an empty state.
LabState replay_log(const std::filesystem::path& log_path);
/// Loads `snapshot.json` when present, then folds the newer events of
/// `events.jsonl`.
LabState restore_data_dir(const std::filesystem::path& data_dir);

nlohmann::json report_to_json(const std::string& experiment_id,
                              std::span<const EvaluationProfile> profiles);

// ---------------------------------------------------------------------------
// Lab server core

struct Site {
  std::string site_id;
  std::shared_ptr<const Corpus> corpus;
  std::shared_ptr<const HeadQuerySet> queries;
};

struct LabOptions {
  std::optional<std::filesystem::path> data_dir;  // nullopt: nothing persisted
  std::uint64_t snapshot_every = 1000;            // events between snapshots; 0 disables
};

struct SessionResponse {
  std::string session_id;
  std::vector<std::string> docs;
};

/// The central API. Thread-safe: appends are serialized by one writer
/// lock, reads see the state as of the last completed append, and the
/// participant calls of a session run outside the lock.
class Lab {
 public:
  /// Restores state from the data directory when it holds a log.
  explicit Lab(LabOptions options = {});
  ~Lab();
  Lab(const Lab&) = delete;
  Lab& operator=(const Lab&) = delete;

  void add_site(Site site);
  /// Config-time registration; not written to the log.
  void add_system(std::shared_ptr<const System> system);
  /// API registration; logged so replay restores it.
  void register_system(const SystemDescriptor& descriptor);
  std::vector<SystemDescriptor> systems() const;
  std::vector<std::string> site_ids() const;
  std::shared_ptr<const Site> site(const std::string& site_id) const;

  std::string create_experiment(Experiment draft);
  ExperimentState start_experiment(const std::string& experiment_id);
  ExperimentState stop_experiment(const std::string& experiment_id);
  Experiment experiment(const std::string& experiment_id) const;
  std::vector<Experiment> experiments() const;

  /// `query_or_item` is a head-query id (ad-hoc) or a publication id
  /// (recommendation). The response never carries team labels or system ids.
  SessionResponse create_session(const std::string& experiment_id,
                                 const std::string& query_or_item);
  SessionOutcome record_feedback(const std::string& session_id, const std::set<int>& clicks);
  Session session(const std::string& session_id) const;

  std::vector<EvaluationProfile> report(const std::string& experiment_id) const;

  /// Writes `snapshot.json` into the data directory (no-op without one).
  void snapshot();
  /// Copy of the folded state.
  LabState state() const;

 private:
  EventRecord commit(EventKind kind, nlohmann::json payload);  // caller holds mutex_ exclusively
  void write_snapshot_locked() const;

  LabOptions options_;
  mutable std::shared_mutex mutex_;
  LabState state_;
  EventLogWriter log_;
  SystemRegistry registry_;
  std::map<std::string, std::shared_ptr<const Site>> sites_;
  std::map<std::string, std::uint64_t> inflight_;  // reserved, uncommitted sessions per experiment
  std::uint64_t next_session_no_ = 1;
  std::uint64_t events_since_snapshot_ = 0;
};

}  // namespace livinglab
