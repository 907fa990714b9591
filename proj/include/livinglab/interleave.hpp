#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace livinglab {

enum class Team { baseline, experimental, both };
enum class InterleaveMethod { ab_baseline, ab_experimental, team_draft };
enum class Winner { baseline, experimental, tie };

std::string_view to_string(Team team);
std::string_view to_string(InterleaveMethod method);
std::string_view to_string(Winner winner);
Team parse_team(std::string_view text);
InterleaveMethod parse_interleave_method(std::string_view text);
Winner parse_winner(std::string_view text);

struct InterleavedEntry {
  std::string record_id;
  Team team = Team::baseline;

  friend bool operator==(const InterleavedEntry&, const InterleavedEntry&) = default;
};

/// The list a user sees, with the team attribution the user never sees.
struct InterleavedList {
  std::vector<InterleavedEntry> entries;
  InterleaveMethod method = InterleaveMethod::team_draft;
  std::uint64_t rng_seed = 0;

  std::vector<std::string> record_ids() const;
  std::size_t size() const noexcept { return entries.size(); }

  friend bool operator==(const InterleavedList&, const InterleavedList&) = default;
};

struct SessionOutcome {
  Winner winner = Winner::tie;
  int clicks_baseline = 0;
  int clicks_experimental = 0;

  friend bool operator==(const SessionOutcome&, const SessionOutcome&) = default;
};

/// Whole-list A/B split: experimental iff uniform(seed) < fraction.
/// Throws ValidationError when fraction is outside [0, 1].
InterleaveMethod ab_assign(std::uint64_t session_seed, double traffic_fraction_experimental);

/// The served side's list truncated to k, every entry labelled with that side.
InterleavedList ab_list(InterleaveMethod side, std::span<const std::string> baseline,
                        std::span<const std::string> experimental, int k,
                        std::uint64_t rng_seed);

/// Team-draft interleaving. `baseline` drafts for Team::baseline and
/// `experimental` for Team::experimental.
///
/// Each step: when both teams hold the same number of picks a fair coin
/// (Rng(rng_seed).coin(), true = baseline) chooses who drafts, otherwise
/// the smaller team drafts. The drafter appends its highest-ranked record
/// not already shown. If the drafter's list is used up the other team may
/// draft in its place only when that keeps the team sizes within one;
/// otherwise interleaving stops. Also stops at k entries.
/// Throws ValidationError when k < 1.
InterleavedList team_draft_interleave(std::span<const std::string> baseline,
                                      std::span<const std::string> experimental, int k,
                                      std::uint64_t rng_seed);

/// Click credit: one point per clicked entry to its team. For team-draft
/// the side with strictly more clicks wins. For A/B lists all clicks go
/// to the served side and the winner is always tie.
/// Throws ValidationError on a position outside the list.
SessionOutcome assign_credit(const InterleavedList& shown, const std::set<int>& clicked_positions);

}  // namespace livinglab
