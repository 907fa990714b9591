#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "livinglab/session.hpp"

namespace livinglab {

/// Per-candidate aggregate of an experiment.
///
/// Wins count sessions the experimental side won. Counts cover
/// non-degraded sessions; `sessions_with_feedback` is the subset the
/// statistics are computed over.
struct EvaluationProfile {
  std::string candidate_system;
  int sessions_total = 0;
  int sessions_with_feedback = 0;
  int degraded_excluded = 0;
  int wins = 0;
  int losses = 0;
  int ties = 0;
  std::optional<double> outcome;
  std::optional<double> ctr_experimental;
  std::optional<double> ctr_baseline;
  std::optional<double> p_value;
  bool significant_at_05 = false;

  friend bool operator==(const EvaluationProfile&, const EvaluationProfile&) = default;
};

inline constexpr const char* kProfileSchemaVersion = "1";

/// Exact two-sided binomial sign test against p = 0.5:
/// p = min(1, 2 * min(P(X <= min), P(X >= max))) over n = wins + losses.
/// Undefined (nullopt) when n = 0.
std::optional<double> sign_test(long wins, long losses);

enum class AbSide { baseline, experimental };

/// Clicks per counted session on the A/B side; nullopt when no session
/// was served from that side.
std::optional<double> ctr(std::span<const Session> sessions, AbSide side);

/// Aggregates the sessions of one candidate. Throws ValidationError when
/// sessions belong to another candidate or mix team-draft with A/B.
EvaluationProfile aggregate(const std::string& candidate_system, std::span<const Session> sessions);

nlohmann::json profile_to_json(const EvaluationProfile& profile);
/// Throws ValidationError on a schema mismatch.
EvaluationProfile profile_from_json(const nlohmann::json& body);

/// Writes the profile as JSON with schema_version "1". Throws Error when
/// the path cannot be written.
void export_profile(const EvaluationProfile& profile, const std::filesystem::path& path);
EvaluationProfile load_profile(const std::filesystem::path& path);

enum class ReportFormat { table, csv };
ReportFormat parse_report_format(std::string_view text);

/// One row per candidate. Reals are printed with six decimals, undefined
/// values as "-" (table) or an empty field (csv).
std::string format_report(std::span<const EvaluationProfile> profiles, ReportFormat format);

}  // namespace livinglab
