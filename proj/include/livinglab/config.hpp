#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "livinglab/clicksim.hpp"
#include "livinglab/generator.hpp"
#include "livinglab/labserver.hpp"

namespace livinglab {

/// A site is either read from files or generated in memory.
struct SiteConfig {
  std::string site_id;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> queries;
  std::optional<std::filesystem::path> qrels;
  struct Generate {
    SiteProfile profile = SiteProfile::life_science;
    std::size_t scale = 1;
    std::uint64_t seed = 0;
  };
  std::optional<Generate> generate;
};

struct LabConfig {
  std::string bind_host = "127.0.0.1";
  int bind_port = 8080;
  std::optional<std::filesystem::path> data_dir;
  std::uint64_t snapshot_every = 1000;
  bool builtin_systems = true;  // register the builtin suite under its own names
  std::vector<SiteConfig> sites;
  std::vector<SystemDescriptor> systems;
  std::optional<std::filesystem::path> ui_dir;
};

/// Parses "host:port". Throws ValidationError.
std::pair<std::string, int> parse_bind_address(const std::string& text);

/// Relative paths resolve against `base_dir`. Throws ValidationError.
LabConfig parse_lab_config(const nlohmann::json& body, const std::filesystem::path& base_dir);

struct LoadedSite {
  Site site;
  /// Ground truth for the click simulator: the qrels file when given,
  /// otherwise graded from the corpus.
  std::shared_ptr<const Qrels> qrels;
};

/// Loads or generates the site. Qrels are built only when `task` is given
/// and no qrels file is configured.
LoadedSite load_site(const SiteConfig& config, std::optional<Task> task = std::nullopt);

/// Adds sites and systems to a lab.
void configure_lab(Lab& lab, const LabConfig& config, const std::vector<LoadedSite>& sites);

struct CampaignConfig {
  LabConfig lab;
  Experiment experiment;
  bool experiment_seed_given = false;  // else derived from master_seed
  int sessions = 1000;
  ClickModelConfig click_model;
  std::uint64_t master_seed = 0;
  double zipf_exponent = 1.0;

  /// Throws ValidationError (sessions < 1, bad click model, unknown site).
  void validate() const;
  std::uint64_t experiment_seed() const;
};

CampaignConfig parse_campaign_config(const nlohmann::json& body,
                                     const std::filesystem::path& base_dir);

/// Reads a JSON file. Throws ValidationError with the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// `name_or_path` is a file path or the name of a preset shipped in
/// `preset_dir` (`<preset_dir>/<name>.json`). Throws NotFound.
std::filesystem::path resolve_config_path(const std::string& name_or_path,
                                          const std::filesystem::path& preset_dir);

}  // namespace livinglab
