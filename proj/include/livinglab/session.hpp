#pragma once

#include <optional>
#include <set>
#include <string>

#include "livinglab/interleave.hpp"
#include "livinglab/systems.hpp"

namespace livinglab {

/// One user interaction with a running experiment.
struct Session {
  std::string session_id;
  std::string experiment_id;
  std::string query_or_item;  // query id (ad-hoc) or seed record id (recommendation)
  std::string candidate_system;
  InterleavedList shown;
  std::optional<SessionOutcome> outcome;  // present iff feedback was received
  std::set<int> clicks;
  bool degraded = false;
  Timestamp created_at = 0;
  std::optional<Timestamp> feedback_at;

  bool has_feedback() const noexcept { return outcome.has_value(); }
  /// Degraded sessions and sessions without feedback never reach the statistics.
  bool counted() const noexcept { return !degraded && outcome.has_value(); }
};

}  // namespace livinglab
