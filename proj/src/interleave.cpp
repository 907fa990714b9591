#include "livinglab/interleave.hpp"

#include <unordered_set>

#include "livinglab/error.hpp"
#include "livinglab/rng.hpp"

namespace livinglab {

std::string_view to_string(Team team) {
  switch (team) {
    case Team::baseline:
      return "baseline";
    case Team::experimental:
      return "experimental";
    case Team::both:
      return "both";
  }
  return "both";
}

std::string_view to_string(InterleaveMethod method) {
  switch (method) {
    case InterleaveMethod::ab_baseline:
      return "ab_baseline";
    case InterleaveMethod::ab_experimental:
      return "ab_experimental";
    case InterleaveMethod::team_draft:
      return "team_draft";
  }
  return "team_draft";
}

std::string_view to_string(Winner winner) {
  switch (winner) {
    case Winner::baseline:
      return "baseline";
    case Winner::experimental:
      return "experimental";
    case Winner::tie:
      return "tie";
  }
  return "tie";
}

Team parse_team(std::string_view text) {
  if (text == "baseline") return Team::baseline;
  if (text == "experimental") return Team::experimental;
  if (text == "both") return Team::both;
  throw ValidationError("unknown team '" + std::string(text) + "'");
}

InterleaveMethod parse_interleave_method(std::string_view text) {
  if (text == "ab_baseline") return InterleaveMethod::ab_baseline;
  if (text == "ab_experimental") return InterleaveMethod::ab_experimental;
  if (text == "team_draft") return InterleaveMethod::team_draft;
  throw ValidationError("unknown interleave method '" + std::string(text) + "'");
}

Winner parse_winner(std::string_view text) {
  if (text == "baseline") return Winner::baseline;
  if (text == "experimental") return Winner::experimental;
  if (text == "tie") return Winner::tie;
  throw ValidationError("unknown winner '" + std::string(text) + "'");
}

std::vector<std::string> InterleavedList::record_ids() const {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (const auto& e : entries) ids.push_back(e.record_id);
  return ids;
}

InterleaveMethod ab_assign(std::uint64_t session_seed, double traffic_fraction_experimental) {
  if (!(traffic_fraction_experimental >= 0.0 && traffic_fraction_experimental <= 1.0)) {
    throw ValidationError("traffic fraction must lie in [0, 1]");
  }
  return uniform(session_seed) < traffic_fraction_experimental ? InterleaveMethod::ab_experimental
                                                               : InterleaveMethod::ab_baseline;
}

InterleavedList ab_list(InterleaveMethod side, std::span<const std::string> baseline,
                        std::span<const std::string> experimental, int k,
                        std::uint64_t rng_seed) {
  if (side == InterleaveMethod::team_draft) {
    throw ValidationError("ab_list needs an ab_* method");
  }
  if (k < 1) throw ValidationError("k must be >= 1");
  const bool exp = side == InterleaveMethod::ab_experimental;
  const auto source = exp ? experimental : baseline;
  InterleavedList out{{}, side, rng_seed};
  std::unordered_set<std::string_view> seen;
  for (const auto& id : source) {
    if (out.entries.size() == static_cast<std::size_t>(k)) break;
    if (!seen.insert(id).second) continue;
    out.entries.push_back({id, exp ? Team::experimental : Team::baseline});
  }
  return out;
}

InterleavedList team_draft_interleave(std::span<const std::string> baseline,
                                      std::span<const std::string> experimental, int k,
                                      std::uint64_t rng_seed) {
  if (k < 1) throw ValidationError("k must be >= 1");
  InterleavedList out{{}, InterleaveMethod::team_draft, rng_seed};
  Rng rng(rng_seed);
  std::unordered_set<std::string_view> used;
  std::size_t next_base = 0;
  std::size_t next_exp = 0;
  int picks_base = 0;
  int picks_exp = 0;

  auto skip_used = [&](std::span<const std::string> list, std::size_t& pos) {
    while (pos < list.size() && used.contains(list[pos])) ++pos;
    return pos < list.size();
  };

  while (out.entries.size() < static_cast<std::size_t>(k)) {
    const bool base_left = skip_used(baseline, next_base);
    const bool exp_left = skip_used(experimental, next_exp);
    if (!base_left && !exp_left) break;

    bool base_turn;
    if (picks_base < picks_exp) {
      base_turn = true;
    } else if (picks_exp < picks_base) {
      base_turn = false;
    } else {
      base_turn = rng.coin();
    }
    if (base_turn && !base_left) {
      if (picks_exp > picks_base) break;
      base_turn = false;
    } else if (!base_turn && !exp_left) {
      if (picks_base > picks_exp) break;
      base_turn = true;
    }

    const std::string& id = base_turn ? baseline[next_base] : experimental[next_exp];
    used.insert(id);
    out.entries.push_back({id, base_turn ? Team::baseline : Team::experimental});
    ++(base_turn ? picks_base : picks_exp);
  }
  return out;
}

SessionOutcome assign_credit(const InterleavedList& shown, const std::set<int>& clicked_positions) {
  SessionOutcome outcome;
  for (int pos : clicked_positions) {
    if (pos < 0 || static_cast<std::size_t>(pos) >= shown.entries.size()) {
      throw ValidationError("click position " + std::to_string(pos) + " outside list of length " +
                            std::to_string(shown.entries.size()));
    }
  }
  const auto clicks = static_cast<int>(clicked_positions.size());
  switch (shown.method) {
    case InterleaveMethod::ab_baseline:
      outcome.clicks_baseline = clicks;
      return outcome;
    case InterleaveMethod::ab_experimental:
      outcome.clicks_experimental = clicks;
      return outcome;
    case InterleaveMethod::team_draft:
      break;
  }
  for (int pos : clicked_positions) {
    switch (shown.entries[static_cast<std::size_t>(pos)].team) {
      case Team::baseline:
        ++outcome.clicks_baseline;
        break;
      case Team::experimental:
        ++outcome.clicks_experimental;
        break;
      case Team::both:
        break;
    }
  }
  if (outcome.clicks_baseline > outcome.clicks_experimental) {
    outcome.winner = Winner::baseline;
  } else if (outcome.clicks_experimental > outcome.clicks_baseline) {
    outcome.winner = Winner::experimental;
  }
  return outcome;
}

}  // namespace livinglab
