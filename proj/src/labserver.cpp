#include "livinglab/labserver.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <mutex>
#include <sstream>

#include "livinglab/error.hpp"

namespace livinglab {

using nlohmann::json;

std::string_view to_string(ExperimentMethod method) {
  return method == ExperimentMethod::ab ? "ab" : "team_draft";
}

std::string_view to_string(ExperimentState state) {
  switch (state) {
    case ExperimentState::draft:
      return "draft";
    case ExperimentState::running:
      return "running";
    case ExperimentState::stopped:
      return "stopped";
  }
  return "draft";
}

ExperimentMethod parse_experiment_method(std::string_view text) {
  if (text == "ab") return ExperimentMethod::ab;
  if (text == "team_draft") return ExperimentMethod::team_draft;
  throw ValidationError("unknown experiment method '" + std::string(text) + "'");
}

ExperimentState parse_experiment_state(std::string_view text) {
  if (text == "draft") return ExperimentState::draft;
  if (text == "running") return ExperimentState::running;
  if (text == "stopped") return ExperimentState::stopped;
  throw ValidationError("unknown experiment state '" + std::string(text) + "'");
}

json to_json(const Experiment& e) {
  return json{{"experiment_id", e.experiment_id},
              {"site_id", e.site_id},
              {"task", to_string(e.task)},
              {"baseline_system", e.baseline_system},
              {"candidate_systems", e.candidate_systems},
              {"method", to_string(e.method)},
              {"traffic_fraction_experimental", e.traffic_fraction_experimental},
              {"candidate_rotation", "round_robin"},
              {"k", e.k},
              {"seed", e.seed},
              {"state", to_string(e.state)}};
}

Experiment experiment_from_json(const json& body) {
  if (!body.is_object()) throw ValidationError("experiment must be an object");
  try {
    Experiment e;
    e.experiment_id = body.value("experiment_id", "");
    e.site_id = body.at("site_id").get<std::string>();
    e.task = parse_task(body.at("task").get<std::string>());
    e.baseline_system = body.at("baseline_system").get<std::string>();
    e.candidate_systems = body.at("candidate_systems").get<std::vector<std::string>>();
    e.method = parse_experiment_method(body.value("method", "team_draft"));
    e.traffic_fraction_experimental = body.value("traffic_fraction_experimental", 0.5);
    if (body.value("candidate_rotation", "round_robin") != "round_robin") {
      throw ValidationError("candidate_rotation must be round_robin");
    }
    e.k = body.value("k", kDefaultCutoff);
    e.seed = body.value("seed", std::uint64_t{0});
    e.state = parse_experiment_state(body.value("state", "draft"));
    return e;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("bad experiment: ") + ex.what());
  }
}

json to_json(const Session& s) {
  json entries = json::array();
  for (const auto& e : s.shown.entries) {
    entries.push_back({{"record_id", e.record_id}, {"team", to_string(e.team)}});
  }
  json out{{"session_id", s.session_id},
           {"experiment_id", s.experiment_id},
           {"query_or_item", s.query_or_item},
           {"candidate_system", s.candidate_system},
           {"shown",
            {{"method", to_string(s.shown.method)},
             {"rng_seed", s.shown.rng_seed},
             {"entries", std::move(entries)}}},
           {"clicks", s.clicks},
           {"degraded", s.degraded},
           {"created_at", s.created_at}};
  out["outcome"] = s.outcome ? json{{"winner", to_string(s.outcome->winner)},
                                    {"clicks_baseline", s.outcome->clicks_baseline},
                                    {"clicks_experimental", s.outcome->clicks_experimental}}
                             : json(nullptr);
  out["feedback_at"] = s.feedback_at ? json(*s.feedback_at) : json(nullptr);
  return out;
}

namespace {

SessionOutcome outcome_from_json(const json& body) {
  return SessionOutcome{parse_winner(body.at("winner").get<std::string>()),
                        body.at("clicks_baseline").get<int>(),
                        body.at("clicks_experimental").get<int>()};
}

json outcome_to_json(const SessionOutcome& o) {
  return json{{"winner", to_string(o.winner)},
              {"clicks_baseline", o.clicks_baseline},
              {"clicks_experimental", o.clicks_experimental}};
}

std::uint64_t session_number(const std::string& session_id) {
  // Server-assigned ids are "s" followed by the decimal session number.
  if (session_id.size() < 2 || session_id[0] != 's') return 0;
  try {
    return std::stoull(session_id.substr(1));
  } catch (const std::logic_error&) {
    return 0;
  }
}

std::string format_session_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%08llu", static_cast<unsigned long long>(n));
  return buf;
}

}  // namespace

Session session_from_json(const json& body) {
  try {
    Session s;
    s.session_id = body.at("session_id").get<std::string>();
    s.experiment_id = body.at("experiment_id").get<std::string>();
    s.query_or_item = body.at("query_or_item").get<std::string>();
    s.candidate_system = body.at("candidate_system").get<std::string>();
    const auto& shown = body.at("shown");
    s.shown.method = parse_interleave_method(shown.at("method").get<std::string>());
    s.shown.rng_seed = shown.at("rng_seed").get<std::uint64_t>();
    for (const auto& e : shown.at("entries")) {
      s.shown.entries.push_back(
          {e.at("record_id").get<std::string>(), parse_team(e.at("team").get<std::string>())});
    }
    s.clicks = body.value("clicks", std::set<int>{});
    s.degraded = body.at("degraded").get<bool>();
    s.created_at = body.at("created_at").get<Timestamp>();
    if (body.contains("outcome") && !body["outcome"].is_null()) {
      s.outcome = outcome_from_json(body["outcome"]);
    }
    if (body.contains("feedback_at") && !body["feedback_at"].is_null()) {
      s.feedback_at = body["feedback_at"].get<Timestamp>();
    }
    return s;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("bad session: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Event log

namespace {

constexpr std::pair<EventKind, std::string_view> kEventNames[] = {
    {EventKind::experiment_created, "experiment_created"},
    {EventKind::started, "started"},
    {EventKind::stopped, "stopped"},
    {EventKind::session_created, "session_created"},
    {EventKind::feedback_recorded, "feedback_recorded"},
    {EventKind::system_registered, "system_registered"},
};

/// Drops a torn final line left by a crash mid-append.
void truncate_torn_tail(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size == 0) return;
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.back() == '\n') return;
  const auto keep = content.find_last_of('\n');
  std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kEventNames) {
    if (k == kind) return name;
  }
  return "experiment_created";
}

EventKind parse_event_kind(std::string_view text) {
  for (const auto& [k, name] : kEventNames) {
    if (name == text) return k;
  }
  throw ValidationError("unknown event kind '" + std::string(text) + "'");
}

json to_json(const EventRecord& event) {
  return json{{"seq", event.sequence_no},
              {"kind", to_string(event.kind)},
              {"payload", event.payload},
              {"recorded_at", event.recorded_at}};
}

EventRecord event_from_json(const json& body) {
  try {
    return EventRecord{body.at("seq").get<std::uint64_t>(),
                       parse_event_kind(body.at("kind").get<std::string>()), body.at("payload"),
                       body.at("recorded_at").get<Timestamp>()};
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("bad event: ") + ex.what());
  }
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& path, std::uint64_t after) {
  std::vector<EventRecord> events;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) return events;
    throw ValidationError("cannot open event log " + path.string());
  }
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream lines(content);
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t expected = 0;
  bool first = true;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    const bool torn = lines.eof() && !content.empty() && content.back() != '\n';
    EventRecord event;
    try {
      event = event_from_json(json::parse(line));
    } catch (const std::exception& e) {
      if (torn) break;
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (first) {
      // A snapshot may cover a prefix of the log.
      expected = event.sequence_no <= after + 1 ? event.sequence_no : after + 1;
      first = false;
    }
    if (event.sequence_no != expected) {
      throw ValidationError("event log gap: expected sequence_no " + std::to_string(expected) +
                            ", found " + std::to_string(event.sequence_no));
    }
    ++expected;
    if (event.sequence_no > after) events.push_back(std::move(event));
  }
  if (!first && expected - 1 < after) {
    throw ValidationError("event log ends at " + std::to_string(expected - 1) +
                          " before snapshot sequence_no " + std::to_string(after));
  }
  if (first && after == 0) return events;
  if (!events.empty() && events.front().sequence_no != after + 1) {
    throw ValidationError("event log gap: expected sequence_no " + std::to_string(after + 1) +
                          ", found " + std::to_string(events.front().sequence_no));
  }
  return events;
}

EventLogWriter::EventLogWriter(std::filesystem::path path, std::uint64_t last_sequence_no)
    : last_(last_sequence_no) {
  truncate_torn_tail(path);
  out_.emplace(path, std::ios::binary | std::ios::app);
  if (!*out_) throw Error("cannot open event log " + path.string() + " for append");
}

EventRecord EventLogWriter::append(EventKind kind, json payload, Timestamp recorded_at) {
  EventRecord event{last_ + 1, kind, std::move(payload), recorded_at};
  if (out_) {
    *out_ << to_json(event).dump() << '\n';
    out_->flush();
    if (!*out_) throw Error("event log append failed");
  }
  last_ = event.sequence_no;
  return event;
}

// ---------------------------------------------------------------------------
// State

void LabState::apply(const EventRecord& event) {
  if (event.sequence_no != last_sequence_no + 1) {
    throw ValidationError("event out of order: sequence_no " + std::to_string(event.sequence_no) +
                          " after " + std::to_string(last_sequence_no));
  }
  const json& p = event.payload;
  try {
    switch (event.kind) {
      case EventKind::experiment_created: {
        Experiment e = experiment_from_json(p);
        if (experiments.contains(e.experiment_id)) {
          throw ValidationError("experiment '" + e.experiment_id + "' created twice");
        }
        auto id = e.experiment_id;
        experiments.emplace(std::move(id), ExperimentEntry{std::move(e), {}});
        ++next_experiment_no;
        break;
      }
      case EventKind::started:
      case EventKind::stopped: {
        const auto id = p.at("experiment_id").get<std::string>();
        auto it = experiments.find(id);
        if (it == experiments.end()) throw ValidationError("unknown experiment '" + id + "'");
        auto& state = it->second.config.state;
        const bool start = event.kind == EventKind::started;
        if (start ? state != ExperimentState::draft : state != ExperimentState::running) {
          throw ValidationError("illegal transition for '" + id + "'");
        }
        state = start ? ExperimentState::running : ExperimentState::stopped;
        break;
      }
      case EventKind::session_created: {
        Session s = session_from_json(p);
        auto it = experiments.find(s.experiment_id);
        if (it == experiments.end()) {
          throw ValidationError("session for unknown experiment '" + s.experiment_id + "'");
        }
        if (sessions.contains(s.session_id)) {
          throw ValidationError("session '" + s.session_id + "' created twice");
        }
        next_session_no = std::max(next_session_no, session_number(s.session_id) + 1);
        it->second.session_ids.push_back(s.session_id);
        sessions.emplace(s.session_id, std::move(s));
        break;
      }
      case EventKind::feedback_recorded: {
        const auto id = p.at("session_id").get<std::string>();
        auto it = sessions.find(id);
        if (it == sessions.end()) throw ValidationError("feedback for unknown session '" + id + "'");
        if (it->second.outcome) throw ValidationError("feedback for '" + id + "' recorded twice");
        it->second.clicks = p.at("clicks").get<std::set<int>>();
        it->second.outcome = outcome_from_json(p.at("outcome"));
        it->second.feedback_at = p.at("feedback_at").get<Timestamp>();
        break;
      }
      case EventKind::system_registered:
        registered_systems.push_back(system_from_json(p));
        break;
    }
  } catch (const json::exception& ex) {
    throw ValidationError("event " + std::to_string(event.sequence_no) + ": " + ex.what());
  }
  last_sequence_no = event.sequence_no;
}

std::vector<EvaluationProfile> LabState::report(const std::string& experiment_id) const {
  auto it = experiments.find(experiment_id);
  if (it == experiments.end()) throw NotFound("unknown experiment '" + experiment_id + "'");
  std::map<std::string, std::vector<Session>> by_candidate;
  for (const auto& id : it->second.session_ids) {
    const Session& s = sessions.at(id);
    by_candidate[s.candidate_system].push_back(s);
  }
  std::vector<EvaluationProfile> profiles;
  for (const auto& candidate : it->second.config.candidate_systems) {
    profiles.push_back(aggregate(candidate, by_candidate[candidate]));
  }
  return profiles;
}

json LabState::to_json() const {
  json exps = json::array();
  for (const auto& [id, entry] : experiments) {
    exps.push_back({{"experiment", livinglab::to_json(entry.config)},
                    {"session_ids", entry.session_ids}});
  }
  json sess = json::array();
  for (const auto& [id, s] : sessions) sess.push_back(livinglab::to_json(s));
  json systems = json::array();
  for (const auto& d : registered_systems) systems.push_back(livinglab::to_json(d));
  return json{{"experiments", std::move(exps)},
              {"sessions", std::move(sess)},
              {"registered_systems", std::move(systems)},
              {"next_experiment_no", next_experiment_no},
              {"next_session_no", next_session_no},
              {"last_sequence_no", last_sequence_no}};
}

LabState LabState::from_json(const json& body) {
  try {
    LabState state;
    for (const auto& e : body.at("experiments")) {
      Experiment config = experiment_from_json(e.at("experiment"));
      auto id = config.experiment_id;
      state.experiments.emplace(
          id, ExperimentEntry{std::move(config), e.at("session_ids").get<std::vector<std::string>>()});
    }
    for (const auto& s : body.at("sessions")) {
      Session session = session_from_json(s);
      auto id = session.session_id;
      state.sessions.emplace(id, std::move(session));
    }
    for (const auto& d : body.at("registered_systems")) {
      state.registered_systems.push_back(system_from_json(d));
    }
    state.next_experiment_no = body.at("next_experiment_no").get<std::uint64_t>();
    state.next_session_no = body.at("next_session_no").get<std::uint64_t>();
    state.last_sequence_no = body.at("last_sequence_no").get<std::uint64_t>();
    return state;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("bad snapshot: ") + ex.what());
  }
}

LabState replay_log(const std::filesystem::path& log_path) {
  LabState state;
  for (const auto& event : read_event_log(log_path)) state.apply(event);
  return state;
}

LabState restore_data_dir(const std::filesystem::path& data_dir) {
  LabState state;
  const auto snapshot_path = data_dir / kSnapshotFile;
  if (std::filesystem::exists(snapshot_path)) {
    std::ifstream in(snapshot_path);
    try {
      state = LabState::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw ValidationError("bad snapshot " + snapshot_path.string() + ": " + e.what());
    }
  }
  for (const auto& event : read_event_log(data_dir / kEventLogFile, state.last_sequence_no)) {
    state.apply(event);
  }
  return state;
}

json report_to_json(const std::string& experiment_id, std::span<const EvaluationProfile> profiles) {
  json list = json::array();
  for (const auto& p : profiles) list.push_back(profile_to_json(p));
  return json{{"experiment_id", experiment_id}, {"profiles", std::move(list)}};
}

// ---------------------------------------------------------------------------
// Lab

Lab::Lab(LabOptions options) : options_(std::move(options)) {
  if (options_.data_dir) {
    std::filesystem::create_directories(*options_.data_dir);
    state_ = restore_data_dir(*options_.data_dir);
    log_ = EventLogWriter(*options_.data_dir / kEventLogFile, state_.last_sequence_no);
    for (const auto& d : state_.registered_systems) registry_.add(d);
  }
}

Lab::~Lab() = default;

void Lab::add_site(Site site) {
  if (!site.corpus || !site.queries) throw ValidationError("site needs a corpus and head queries");
  std::unique_lock lock(mutex_);
  auto id = site.site_id;
  if (sites_.contains(id)) throw ValidationError("site '" + id + "' already loaded");
  sites_.emplace(std::move(id), std::make_shared<const Site>(std::move(site)));
}

void Lab::add_system(std::shared_ptr<const System> system) {
  std::unique_lock lock(mutex_);
  registry_.add(std::move(system));
}

void Lab::register_system(const SystemDescriptor& descriptor) {
  auto system = make_system(descriptor);
  std::unique_lock lock(mutex_);
  if (registry_.contains(descriptor.system_id)) {
    throw StateError("system '" + descriptor.system_id + "' already registered");
  }
  commit(EventKind::system_registered, to_json(descriptor));
  registry_.add(std::move(system));
}

std::vector<SystemDescriptor> Lab::systems() const {
  std::shared_lock lock(mutex_);
  return registry_.descriptors();
}

std::vector<std::string> Lab::site_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sites_) ids.push_back(id);
  return ids;
}

std::shared_ptr<const Site> Lab::site(const std::string& site_id) const {
  std::shared_lock lock(mutex_);
  auto it = sites_.find(site_id);
  if (it == sites_.end()) throw NotFound("unknown site '" + site_id + "'");
  return it->second;
}

EventRecord Lab::commit(EventKind kind, json payload) {
  EventRecord event = log_.append(kind, std::move(payload), now_ms());
  state_.apply(event);
  if (options_.data_dir && options_.snapshot_every > 0 &&
      ++events_since_snapshot_ >= options_.snapshot_every) {
    write_snapshot_locked();
    events_since_snapshot_ = 0;
  }
  return event;
}

void Lab::write_snapshot_locked() const {
  if (!options_.data_dir) return;
  const auto path = *options_.data_dir / kSnapshotFile;
  const auto tmp = *options_.data_dir / (std::string(kSnapshotFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write snapshot " + tmp.string());
    out << state_.to_json().dump() << '\n';
    out.flush();
    if (!out) throw Error("snapshot write failed");
  }
  std::filesystem::rename(tmp, path);
}

void Lab::snapshot() {
  std::unique_lock lock(mutex_);
  write_snapshot_locked();
  events_since_snapshot_ = 0;
}

LabState Lab::state() const {
  std::shared_lock lock(mutex_);
  return state_;
}

std::string Lab::create_experiment(Experiment draft) {
  if (!(draft.traffic_fraction_experimental >= 0.0 && draft.traffic_fraction_experimental <= 1.0)) {
    throw ValidationError("traffic_fraction_experimental must lie in [0, 1]");
  }
  if (draft.k < 1) throw ValidationError("k must be >= 1");
  if (draft.candidate_systems.empty()) throw ValidationError("at least one candidate system needed");
  if (std::find(draft.candidate_systems.begin(), draft.candidate_systems.end(),
                draft.baseline_system) != draft.candidate_systems.end()) {
    throw ValidationError("baseline system '" + draft.baseline_system + "' listed as a candidate");
  }
  {
    auto sorted = draft.candidate_systems;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("duplicate candidate system");
    }
  }

  std::unique_lock lock(mutex_);
  if (!sites_.contains(draft.site_id)) throw NotFound("unknown site '" + draft.site_id + "'");
  std::vector<std::string> all = draft.candidate_systems;
  all.push_back(draft.baseline_system);
  for (const auto& id : all) {
    auto system = registry_.get(id);
    if (system->descriptor().task != draft.task) {
      throw ValidationError("system '" + id + "' does not serve task " +
                            std::string(to_string(draft.task)));
    }
  }
  if (draft.experiment_id.empty()) {
    std::uint64_t n = state_.next_experiment_no;
    do {
      draft.experiment_id = "exp-" + std::to_string(n++);
    } while (state_.experiments.contains(draft.experiment_id));
  } else if (state_.experiments.contains(draft.experiment_id)) {
    throw StateError("experiment '" + draft.experiment_id + "' already exists");
  }
  draft.state = ExperimentState::draft;
  commit(EventKind::experiment_created, to_json(draft));
  return draft.experiment_id;
}

ExperimentState Lab::start_experiment(const std::string& experiment_id) {
  std::unique_lock lock(mutex_);
  auto it = state_.experiments.find(experiment_id);
  if (it == state_.experiments.end()) throw NotFound("unknown experiment '" + experiment_id + "'");
  switch (it->second.config.state) {
    case ExperimentState::draft:
      break;
    case ExperimentState::running:
      throw StateError("experiment '" + experiment_id + "' is already running");
    case ExperimentState::stopped:
      throw StateError("experiment '" + experiment_id + "' is stopped (terminal state)");
  }
  commit(EventKind::started, json{{"experiment_id", experiment_id}});
  return ExperimentState::running;
}

ExperimentState Lab::stop_experiment(const std::string& experiment_id) {
  std::unique_lock lock(mutex_);
  auto it = state_.experiments.find(experiment_id);
  if (it == state_.experiments.end()) throw NotFound("unknown experiment '" + experiment_id + "'");
  switch (it->second.config.state) {
    case ExperimentState::draft:
      throw StateError("experiment '" + experiment_id + "' was never started");
    case ExperimentState::running:
      break;
    case ExperimentState::stopped:
      throw StateError("experiment '" + experiment_id + "' is stopped (terminal state)");
  }
  commit(EventKind::stopped, json{{"experiment_id", experiment_id}});
  return ExperimentState::stopped;
}

Experiment Lab::experiment(const std::string& experiment_id) const {
  std::shared_lock lock(mutex_);
  auto it = state_.experiments.find(experiment_id);
  if (it == state_.experiments.end()) throw NotFound("unknown experiment '" + experiment_id + "'");
  return it->second.config;
}

std::vector<Experiment> Lab::experiments() const {
  std::shared_lock lock(mutex_);
  std::vector<Experiment> out;
  for (const auto& [_, entry] : state_.experiments) out.push_back(entry.config);
  return out;
}

SessionResponse Lab::create_session(const std::string& experiment_id,
                                    const std::string& query_or_item) {
  // Reserve a session number and a rotation slot under the writer lock.
  Experiment config;
  std::shared_ptr<const Site> site;
  std::shared_ptr<const System> baseline;
  std::shared_ptr<const System> candidate;
  std::string session_id;
  Query query;
  {
    std::unique_lock lock(mutex_);
    auto it = state_.experiments.find(experiment_id);
    if (it == state_.experiments.end()) throw NotFound("unknown experiment '" + experiment_id + "'");
    config = it->second.config;
    if (config.state != ExperimentState::running) {
      throw StateError("experiment '" + experiment_id + "' is not running");
    }
    site = sites_.at(config.site_id);
    if (config.task == Task::adhoc_retrieval) {
      const HeadQuery* q = site->queries->find(query_or_item);
      if (!q) throw NotFound("unknown query '" + query_or_item + "'");
      query = Query{q->query_id, q->text};
    } else {
      const Record* seed = site->corpus->find(query_or_item);
      if (!seed) throw UnknownRecord("unknown seed record '" + query_or_item + "'");
      if (seed->kind != RecordKind::publication) {
        throw WrongKind("seed record '" + query_or_item + "' is not a publication");
      }
    }
    auto& inflight = inflight_[experiment_id];
    const auto slot = it->second.session_ids.size() + inflight;
    ++inflight;
    const auto& candidates = config.candidate_systems;
    baseline = registry_.get(config.baseline_system);
    candidate = registry_.get(candidates[slot % candidates.size()]);
    next_session_no_ = std::max(next_session_no_, state_.next_session_no);
    session_id = format_session_id(next_session_no_++);
  }
  auto release = [&] {
    std::unique_lock lock(mutex_);
    if (--inflight_[experiment_id] == 0) inflight_.erase(experiment_id);
  };

  auto fetch = [&](const System& system) {
    return config.task == Task::adhoc_retrieval
               ? system.rank(*site->corpus, query, config.k).entries
               : system.recommend(*site->corpus, query_or_item, config.k).entries;
  };

  const std::uint64_t seed = session_seed(config.seed, session_id);
  Session session;
  session.session_id = session_id;
  session.experiment_id = experiment_id;
  session.query_or_item = query_or_item;
  session.candidate_system = candidate->id();
  session.created_at = now_ms();
  try {
    const bool remote = baseline->descriptor().mode == SystemMode::remote ||
                        candidate->descriptor().mode == SystemMode::remote;
    std::future<std::vector<std::string>> candidate_future =
        std::async(remote ? std::launch::async : std::launch::deferred,
                   [&] { return fetch(*candidate); });
    const auto baseline_list = fetch(*baseline);
    std::vector<std::string> candidate_list;
    try {
      candidate_list = candidate_future.get();
    } catch (const SystemUnavailable&) {
      session.degraded = true;
    } catch (const InvalidResponse&) {
      session.degraded = true;
    }

    if (session.degraded) {
      session.shown = ab_list(InterleaveMethod::ab_baseline, baseline_list, {}, config.k, seed);
    } else if (config.method == ExperimentMethod::team_draft) {
      session.shown = team_draft_interleave(baseline_list, candidate_list, config.k, seed);
    } else {
      session.shown = ab_list(ab_assign(seed, config.traffic_fraction_experimental),
                              baseline_list, candidate_list, config.k, seed);
    }
  } catch (...) {
    release();
    throw;
  }

  std::unique_lock lock(mutex_);
  if (--inflight_[experiment_id] == 0) inflight_.erase(experiment_id);
  if (state_.experiments.at(experiment_id).config.state != ExperimentState::running) {
    throw StateError("experiment '" + experiment_id + "' stopped during the session");
  }
  commit(EventKind::session_created, to_json(session));
  return SessionResponse{session_id, session.shown.record_ids()};
}

SessionOutcome Lab::record_feedback(const std::string& session_id, const std::set<int>& clicks) {
  std::unique_lock lock(mutex_);
  auto it = state_.sessions.find(session_id);
  if (it == state_.sessions.end()) throw NotFound("unknown session '" + session_id + "'");
  if (it->second.outcome) {
    throw StateError("feedback for session '" + session_id + "' already recorded");
  }
  const SessionOutcome outcome = assign_credit(it->second.shown, clicks);
  commit(EventKind::feedback_recorded, json{{"session_id", session_id},
                                            {"clicks", clicks},
                                            {"outcome", outcome_to_json(outcome)},
                                            {"feedback_at", now_ms()}});
  return outcome;
}

Session Lab::session(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  auto it = state_.sessions.find(session_id);
  if (it == state_.sessions.end()) throw NotFound("unknown session '" + session_id + "'");
  return it->second;
}

std::vector<EvaluationProfile> Lab::report(const std::string& experiment_id) const {
  std::shared_lock lock(mutex_);
  return state_.report(experiment_id);
}

}  // namespace livinglab
