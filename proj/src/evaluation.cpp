#include "livinglab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "livinglab/error.hpp"

namespace livinglab {

using nlohmann::json;

namespace {

// Lower tail P(X <= m) for X ~ Binomial(n, 1/2).
double binomial_lower_tail(long n, long m) {
  if (n <= 62) {
    unsigned __int128 coeff = 1;  // C(n, 0)
    unsigned __int128 sum = 0;
    for (long i = 0; i <= m; ++i) {
      sum += coeff;
      coeff = coeff * static_cast<unsigned __int128>(n - i) / static_cast<unsigned __int128>(i + 1);
    }
    return std::ldexp(static_cast<double>(static_cast<long double>(sum)), static_cast<int>(-n));
  }
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
  double sum = 0.0;
  // Largest terms last keeps the accumulation from losing the small ones.
  for (long i = 0; i <= m; ++i) {
    sum += std::exp(log_n_fact - std::lgamma(static_cast<double>(i) + 1.0) -
                    std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n);
  }
  return sum;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& body, const char* key) {
  const auto& v = body.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw ValidationError(std::string(key) + " must be a number or null");
  return v.get<double>();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::optional<double> sign_test(long wins, long losses) {
  if (wins < 0 || losses < 0) throw ValidationError("sign_test needs non-negative counts");
  const long n = wins + losses;
  if (n == 0) return std::nullopt;
  // P(X >= max) equals P(X <= min) by symmetry of Binomial(n, 1/2).
  const double tail = binomial_lower_tail(n, std::min(wins, losses));
  return std::min(1.0, 2.0 * tail);
}

std::optional<double> ctr(std::span<const Session> sessions, AbSide side) {
  const auto method =
      side == AbSide::experimental ? InterleaveMethod::ab_experimental : InterleaveMethod::ab_baseline;
  long clicks = 0;
  long count = 0;
  for (const auto& s : sessions) {
    if (!s.counted() || s.shown.method != method) continue;
    ++count;
    clicks += side == AbSide::experimental ? s.outcome->clicks_experimental
                                           : s.outcome->clicks_baseline;
  }
  if (count == 0) return std::nullopt;
  return static_cast<double>(clicks) / static_cast<double>(count);
}

EvaluationProfile aggregate(const std::string& candidate_system, std::span<const Session> sessions) {
  EvaluationProfile profile;
  profile.candidate_system = candidate_system;

  bool saw_team_draft = false;
  bool saw_ab = false;
  for (const auto& s : sessions) {
    if (s.candidate_system != candidate_system) {
      throw ValidationError("mixed candidates: '" + s.candidate_system + "' in profile of '" +
                            candidate_system + "'");
    }
    // A degraded session is a baseline-only fallback and carries no method of its own.
    if (s.degraded) continue;
    (s.shown.method == InterleaveMethod::team_draft ? saw_team_draft : saw_ab) = true;
  }
  if (saw_team_draft && saw_ab) throw ValidationError("mixed methods: team_draft and ab");

  for (const auto& s : sessions) {
    if (s.degraded) {
      ++profile.degraded_excluded;
      continue;
    }
    ++profile.sessions_total;
    if (!s.outcome) continue;
    ++profile.sessions_with_feedback;
    if (s.shown.method != InterleaveMethod::team_draft) continue;
    switch (s.outcome->winner) {
      case Winner::experimental:
        ++profile.wins;
        break;
      case Winner::baseline:
        ++profile.losses;
        break;
      case Winner::tie:
        ++profile.ties;
        break;
    }
  }

  if (saw_ab) {
    profile.ctr_experimental = ctr(sessions, AbSide::experimental);
    profile.ctr_baseline = ctr(sessions, AbSide::baseline);
  } else {
    const int decided = profile.wins + profile.losses;
    if (decided > 0) profile.outcome = static_cast<double>(profile.wins) / decided;
    profile.p_value = sign_test(profile.wins, profile.losses);
  }
  profile.significant_at_05 = profile.p_value.has_value() && *profile.p_value < 0.05;
  return profile;
}

json profile_to_json(const EvaluationProfile& p) {
  return json{
      {"schema_version", kProfileSchemaVersion},
      {"candidate_system", p.candidate_system},
      {"sessions_total", p.sessions_total},
      {"sessions_with_feedback", p.sessions_with_feedback},
      {"degraded_excluded", p.degraded_excluded},
      {"wins", p.wins},
      {"losses", p.losses},
      {"ties", p.ties},
      {"outcome", optional_number(p.outcome)},
      {"ctr_experimental", optional_number(p.ctr_experimental)},
      {"ctr_baseline", optional_number(p.ctr_baseline)},
      {"p_value", optional_number(p.p_value)},
      {"significant_at_05", p.significant_at_05},
  };
}

EvaluationProfile profile_from_json(const json& body) {
  try {
    if (body.at("schema_version") != kProfileSchemaVersion) {
      throw ValidationError("unsupported profile schema_version " + body["schema_version"].dump());
    }
    EvaluationProfile p;
    p.candidate_system = body.at("candidate_system").get<std::string>();
    p.sessions_total = body.at("sessions_total").get<int>();
    p.sessions_with_feedback = body.at("sessions_with_feedback").get<int>();
    p.degraded_excluded = body.at("degraded_excluded").get<int>();
    p.wins = body.at("wins").get<int>();
    p.losses = body.at("losses").get<int>();
    p.ties = body.at("ties").get<int>();
    p.outcome = read_optional(body, "outcome");
    p.ctr_experimental = read_optional(body, "ctr_experimental");
    p.ctr_baseline = read_optional(body, "ctr_baseline");
    p.p_value = read_optional(body, "p_value");
    p.significant_at_05 = body.at("significant_at_05").get<bool>();
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed profile: ") + e.what());
  }
}

void export_profile(const EvaluationProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write profile " + path.string());
  out << profile_to_json(profile).dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

EvaluationProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open profile " + path.string());
  try {
    return profile_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "table") return ReportFormat::table;
  if (text == "csv") return ReportFormat::csv;
  throw ValidationError("unknown report format '" + std::string(text) + "'");
}

std::string format_report(std::span<const EvaluationProfile> profiles, ReportFormat format) {
  const std::vector<std::string> header{
      "candidate_system", "sessions_total", "sessions_with_feedback", "degraded_excluded",
      "wins",             "losses",         "ties",                   "outcome",
      "p_value",          "significant",    "ctr_experimental",       "ctr_baseline"};
  const bool csv = format == ReportFormat::csv;
  auto opt = [csv](const std::optional<double>& v) {
    return v ? fixed6(*v) : std::string(csv ? "" : "-");
  };

  std::vector<std::vector<std::string>> rows{header};
  for (const auto& p : profiles) {
    rows.push_back({p.candidate_system, std::to_string(p.sessions_total),
                    std::to_string(p.sessions_with_feedback), std::to_string(p.degraded_excluded),
                    std::to_string(p.wins), std::to_string(p.losses), std::to_string(p.ties),
                    opt(p.outcome), opt(p.p_value),
                    csv ? (p.significant_at_05 ? "true" : "false")
                        : (p.significant_at_05 ? "*" : ""),
                    opt(p.ctr_experimental), opt(p.ctr_baseline)});
  }

  std::ostringstream out;
  if (csv) {
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(row[i]);
      out << "\r\n";
    }
    return out.str();
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "  ";
      if (i == 0) {
        out << std::left << std::setw(static_cast<int>(width[i])) << row[i];
      } else {
        out << std::right << std::setw(static_cast<int>(width[i])) << row[i];
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace livinglab
