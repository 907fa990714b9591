#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "livinglab/clicksim.hpp"
#include "livinglab/corpus.hpp"

namespace livinglab {

enum class SiteProfile { life_science, social_science };
std::string_view to_string(SiteProfile profile);
SiteProfile parse_site_profile(std::string_view text);

/// Synthetic records plus head queries for one simulated site.
struct DeskSite {
  std::vector<Record> records;
  HeadQuerySet queries;
};

inline constexpr std::size_t kDefaultHeadQueries = 50;

/// `num_records` publications on medicine, nutrition, environment and
/// agriculture topics, plus head queries of one to three topic terms.
DeskSite generate_life_science(std::size_t num_records, std::uint64_t seed,
                               std::size_t num_queries = kDefaultHeadQueries);

/// 95,000 / scale publications and 84,000 / scale research datasets on
/// social-science topics. Head "queries" are seed publications: the query
/// id is the publication's record id and the text its title.
DeskSite generate_social_science(std::size_t scale, std::uint64_t seed,
                                 std::size_t num_seeds = kDefaultHeadQueries);

/// life_science: `scale` is the number of records. social_science: `scale`
/// divides the full-size collection counts. Throws ValidationError when
/// scale < 1.
DeskSite generate_site(SiteProfile profile, std::size_t scale, std::uint64_t seed);

Task task_for(SiteProfile profile);

struct DeskSiteFiles {
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::filesystem::path qrels;
};

/// Writes corpus.jsonl, queries.tsv and qrels.tsv into `dir`.
DeskSiteFiles write_desk_site(const std::filesystem::path& dir, const DeskSite& site,
                              const Qrels& qrels);

}  // namespace livinglab
