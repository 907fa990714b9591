#include "livinglab/config.hpp"

#include <fstream>

#include "livinglab/error.hpp"

namespace livinglab {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

SiteConfig parse_site(const json& body, const std::filesystem::path& base) {
  SiteConfig site;
  site.site_id = body.at("site_id").get<std::string>();
  if (body.contains("corpus")) site.corpus = resolve(base, body["corpus"].get<std::string>());
  if (body.contains("queries")) site.queries = resolve(base, body["queries"].get<std::string>());
  if (body.contains("qrels")) site.qrels = resolve(base, body["qrels"].get<std::string>());
  if (body.contains("generate")) {
    const auto& g = body["generate"];
    SiteConfig::Generate gen;
    gen.profile = parse_site_profile(g.at("profile").get<std::string>());
    const auto scale = g.at("scale").get<std::int64_t>();
    if (scale < 1) throw ValidationError("site '" + site.site_id + "': scale must be >= 1");
    gen.scale = static_cast<std::size_t>(scale);
    gen.seed = g.value("seed", std::uint64_t{0});
    site.generate = gen;
  }
  if (!site.generate && !(site.corpus && site.queries)) {
    throw ValidationError("site '" + site.site_id + "' needs corpus and queries, or generate");
  }
  return site;
}

ClickModelConfig parse_click_model_config(const json& body, int k) {
  ClickModelConfig cfg;
  cfg.examination = default_examination(k);
  if (body.is_null()) return cfg;
  cfg.model = parse_click_model(body.value("model", "pbm"));
  if (body.contains("examination")) cfg.examination = body["examination"].get<std::vector<double>>();
  cfg.continuation = body.value("continuation", cfg.continuation);
  if (body.contains("grade_to_attractiveness")) {
    const auto a = body["grade_to_attractiveness"].get<std::vector<double>>();
    if (a.size() != 3) throw ValidationError("grade_to_attractiveness needs 3 values");
    std::copy(a.begin(), a.end(), cfg.grade_to_attractiveness.begin());
  }
  return cfg;
}

}  // namespace

std::pair<std::string, int> parse_bind_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ValidationError("bind address must be host:port, got '" + text + "'");
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::logic_error&) {
    throw ValidationError("bad port in '" + text + "'");
  }
  if (port < 0 || port > 65535) throw ValidationError("port out of range in '" + text + "'");
  return {text.substr(0, colon), port};
}

LabConfig parse_lab_config(const json& body, const std::filesystem::path& base_dir) {
  if (!body.is_object()) throw ValidationError("config must be an object");
  try {
    LabConfig config;
    if (body.contains("bind")) {
      std::tie(config.bind_host, config.bind_port) = parse_bind_address(body["bind"].get<std::string>());
    }
    if (body.contains("data_dir")) config.data_dir = resolve(base_dir, body["data_dir"].get<std::string>());
    config.snapshot_every = body.value("snapshot_every", config.snapshot_every);
    config.builtin_systems = body.value("builtin_systems", true);
    for (const auto& s : body.value("sites", json::array())) {
      config.sites.push_back(parse_site(s, base_dir));
    }
    for (auto s : body.value("systems", json::array())) {
      if (s.contains("run_path")) {
        s["run_path"] = resolve(base_dir, s["run_path"].get<std::string>()).string();
      }
      config.systems.push_back(system_from_json(s));
    }
    if (body.contains("ui_dir")) config.ui_dir = resolve(base_dir, body["ui_dir"].get<std::string>());
    return config;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad lab config: ") + e.what());
  }
}

LoadedSite load_site(const SiteConfig& config, std::optional<Task> task) {
  LoadedSite loaded;
  loaded.site.site_id = config.site_id;
  if (config.generate) {
    auto desk = generate_site(config.generate->profile, config.generate->scale, config.generate->seed);
    loaded.site.corpus = std::make_shared<const Corpus>(config.site_id, std::move(desk.records));
    loaded.site.queries = std::make_shared<const HeadQuerySet>(std::move(desk.queries));
  } else {
    loaded.site.corpus = std::make_shared<const Corpus>(load_corpus(*config.corpus, config.site_id));
    loaded.site.queries = std::make_shared<const HeadQuerySet>(load_head_queries(*config.queries));
  }
  if (config.qrels) {
    loaded.qrels = std::make_shared<const Qrels>(load_qrels(*config.qrels));
  } else if (task) {
    loaded.qrels = std::make_shared<const Qrels>(
        build_qrels(*loaded.site.corpus, *loaded.site.queries, *task));
  }
  return loaded;
}

void configure_lab(Lab& lab, const LabConfig& config, const std::vector<LoadedSite>& sites) {
  for (const auto& s : sites) lab.add_site(s.site);
  std::set<std::string> configured;
  for (const auto& d : config.systems) configured.insert(d.system_id);
  const auto already = lab.systems();
  auto registered = [&](const std::string& id) {
    return std::any_of(already.begin(), already.end(),
                       [&](const SystemDescriptor& d) { return d.system_id == id; });
  };
  if (config.builtin_systems) {
    for (auto& d : builtin_descriptors()) {
      if (!configured.contains(d.system_id) && !registered(d.system_id)) lab.add_system(make_system(d));
    }
  }
  for (const auto& d : config.systems) {
    if (!registered(d.system_id)) lab.add_system(make_system(d));
  }
}

void CampaignConfig::validate() const {
  if (sessions < 1) throw ValidationError("sessions must be >= 1");
  if (!(zipf_exponent > 0.0)) throw ValidationError("zipf_exponent must be > 0");
  click_model.validate();
  if (click_model.model == ClickModel::pbm &&
      click_model.examination.size() < static_cast<std::size_t>(experiment.k)) {
    throw ValidationError("examination vector shorter than k");
  }
  const bool site_known = std::any_of(lab.sites.begin(), lab.sites.end(), [&](const SiteConfig& s) {
    return s.site_id == experiment.site_id;
  });
  if (!site_known) throw ValidationError("experiment site '" + experiment.site_id + "' not configured");
}

std::uint64_t CampaignConfig::experiment_seed() const {
  return experiment_seed_given ? experiment.seed : derive_seed(master_seed, "experiment");
}

CampaignConfig parse_campaign_config(const json& body, const std::filesystem::path& base_dir) {
  if (!body.is_object()) throw ValidationError("campaign config must be an object");
  try {
    CampaignConfig config;
    config.lab = parse_lab_config(body, base_dir);
    config.experiment = experiment_from_json(body.at("experiment"));
    config.experiment_seed_given = body["experiment"].contains("seed");
    config.sessions = body.value("sessions", config.sessions);
    config.master_seed = body.value("master_seed", std::uint64_t{0});
    config.zipf_exponent = body.value("zipf_exponent", 1.0);
    config.click_model = parse_click_model_config(body.value("click_model", json()), config.experiment.k);
    return config;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad campaign config: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open config " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::filesystem::path resolve_config_path(const std::string& name_or_path,
                                          const std::filesystem::path& preset_dir) {
  if (std::filesystem::is_regular_file(name_or_path)) return name_or_path;
  const auto preset = preset_dir / (name_or_path + ".json");
  if (std::filesystem::is_regular_file(preset)) return preset;
  throw NotFound("no config file or preset named '" + name_or_path + "'");
}

}  // namespace livinglab
