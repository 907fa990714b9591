// lab: operator entry point for the living-lab server.
//
//   lab serve       --config FILE [--data-dir DIR] [--bind HOST:PORT]
//   lab gen-corpus  --profile {life_science,social_science} --scale N [--seed S] --out DIR
//   lab simulate    --config FILE|PRESET [--seed S] [--sessions N] [--click-model M]
//                   [--format {table,csv}] [--data-dir DIR] [--server URL] [--out DIR]
//   lab report      EXPERIMENT_ID [--data-dir DIR | --server URL] [--format {table,csv}]
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "livinglab/campaign.hpp"
#include "livinglab/config.hpp"
#include "livinglab/error.hpp"
#include "livinglab/generator.hpp"
#include "livinglab/http_api.hpp"

#ifndef LIVINGLAB_PRESET_DIR
#define LIVINGLAB_PRESET_DIR "configs"
#endif

namespace ll = livinglab;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::filesystem::path preset_dir() {
  return env("LAB_PRESET_DIR").value_or(LIVINGLAB_PRESET_DIR);
}

std::optional<std::filesystem::path> data_dir_from(const std::string& flag) {
  if (!flag.empty()) return std::filesystem::path(flag);
  if (auto e = env("LAB_DATA_DIR")) return std::filesystem::path(*e);
  return std::nullopt;
}

/// Loads a config as JSON relative to its own directory. Usage-level
/// failures exit with kExitConfig.
nlohmann::json load_config(const std::string& name_or_path, std::filesystem::path& base_dir) {
  const auto path = ll::resolve_config_path(name_or_path, preset_dir());
  base_dir = std::filesystem::absolute(path).parent_path();
  return ll::read_json_file(path);
}

struct ServeArgs {
  std::string config;
  std::string data_dir;
  std::string bind;
};

int cmd_serve(const ServeArgs& args) {
  ll::LabConfig config;
  std::vector<ll::LoadedSite> sites;
  try {
    std::filesystem::path base;
    config = ll::parse_lab_config(load_config(args.config, base), base);
    if (auto dir = data_dir_from(args.data_dir)) config.data_dir = *dir;
    if (!args.bind.empty()) {
      std::tie(config.bind_host, config.bind_port) = ll::parse_bind_address(args.bind);
    } else if (auto addr = env("LAB_BIND_ADDR")) {
      std::tie(config.bind_host, config.bind_port) = ll::parse_bind_address(*addr);
    }
    for (const auto& s : config.sites) sites.push_back(ll::load_site(s));
  } catch (const ll::Error& e) {
    std::cerr << "lab serve: " << e.what() << '\n';
    return kExitConfig;
  }

  // SIGINT/SIGTERM are handled by a dedicated thread so shutdown runs
  // outside signal context.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    ll::LabOptions options;
    options.data_dir = config.data_dir;
    options.snapshot_every = config.snapshot_every;
    ll::Lab lab(options);
    ll::configure_lab(lab, config, sites);
    ll::HttpApi api(lab, config.ui_dir);

    int port = config.bind_port;
    if (port == 0) {
      port = api.bind_to_any_port(config.bind_host);
      if (port < 0) throw ll::Error("cannot bind " + config.bind_host);
    } else if (!api.bind(config.bind_host, port)) {
      std::cerr << "lab serve: cannot bind " << config.bind_host << ":" << port << '\n';
      return kExitRuntime;
    }
    std::cout << "listening on http://" << config.bind_host << ":" << port << std::endl;

    std::thread waiter([&] {
      int sig = 0;
      sigwait(&signals, &sig);
      api.stop();
    });
    api.listen_after_bind();
    lab.snapshot();
    waiter.join();
    std::cout << "stopped" << std::endl;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "lab serve: " << e.what() << '\n';
    return kExitRuntime;
  }
}

struct GenArgs {
  std::string profile;
  std::size_t scale = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_corpus(const GenArgs& args) {
  try {
    const auto profile = ll::parse_site_profile(args.profile);
    auto site = ll::generate_site(profile, args.scale, args.seed);
    const std::string site_id = profile == ll::SiteProfile::life_science ? "livivo-desk" : "gesis-desk";
    const ll::Corpus corpus(site_id, site.records);
    const auto qrels = ll::build_qrels(corpus, site.queries, ll::task_for(profile));
    const auto files = ll::write_desk_site(args.out, site, qrels);

    std::size_t pubs = 0;
    for (const auto& r : site.records) pubs += r.kind == ll::RecordKind::publication;
    std::cout << "profile " << args.profile << ": " << pubs << " publications, "
              << site.records.size() - pubs << " research_data, " << site.queries.size()
              << " head queries, " << qrels.size() << " graded pairs\n"
              << "wrote " << files.corpus.string() << ", " << files.queries.string() << ", "
              << files.qrels.string() << '\n';
    return 0;
  } catch (const ll::ValidationError& e) {
    std::cerr << "lab gen-corpus: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "lab gen-corpus: " << e.what() << '\n';
    return kExitRuntime;
  }
}

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> sessions;
  std::string click_model;
  std::string format = "table";
  std::string data_dir;
  std::string server;
  std::string out;
};

std::string safe_file_part(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

int cmd_simulate(const SimulateArgs& args) {
  ll::CampaignConfig config;
  ll::ReportFormat format;
  try {
    std::filesystem::path base;
    config = ll::parse_campaign_config(load_config(args.config, base), base);
    if (args.seed) config.master_seed = *args.seed;
    if (args.sessions) config.sessions = *args.sessions;
    if (!args.click_model.empty()) config.click_model.model = ll::parse_click_model(args.click_model);
    format = ll::parse_report_format(args.format);
    config.validate();
  } catch (const ll::Error& e) {
    std::cerr << "lab simulate: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const auto data_dir = data_dir_from(args.data_dir);
    ll::CampaignResult result;
    if (args.server.empty()) {
      result = ll::run_campaign_embedded(config, data_dir);
    } else {
      const ll::SiteConfig* site_cfg = nullptr;
      for (const auto& s : config.lab.sites) {
        if (s.site_id == config.experiment.site_id) site_cfg = &s;
      }
      const auto site = ll::load_site(*site_cfg, config.experiment.task);
      ll::HttpLabClient client(args.server);
      result = ll::run_campaign(config, client, site.site, *site.qrels);
    }

    std::filesystem::path out_dir = !args.out.empty() ? std::filesystem::path(args.out)
                                    : data_dir         ? *data_dir / "profiles"
                                                       : std::filesystem::path("profiles");
    std::filesystem::create_directories(out_dir);
    for (const auto& p : result.profiles) {
      ll::export_profile(p, out_dir / (safe_file_part(result.experiment_id + "-" + p.candidate_system) +
                                       ".profile.json"));
    }
    std::cout << ll::format_report(result.profiles, format);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "lab simulate: " << e.what() << '\n';
    return kExitRuntime;
  }
}

struct ReportArgs {
  std::string experiment_id;
  std::string data_dir;
  std::string server;
  std::string format = "table";
};

int cmd_report(const ReportArgs& args) {
  ll::ReportFormat format;
  try {
    format = ll::parse_report_format(args.format);
  } catch (const ll::Error& e) {
    std::cerr << "lab report: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    std::vector<ll::EvaluationProfile> profiles;
    if (!args.server.empty()) {
      ll::HttpLabClient client(args.server);
      profiles = client.report(args.experiment_id);
    } else {
      const auto dir = data_dir_from(args.data_dir);
      if (!dir) {
        std::cerr << "lab report: --data-dir, LAB_DATA_DIR or --server required\n";
        return kExitConfig;
      }
      profiles = ll::restore_data_dir(*dir).report(args.experiment_id);
    }
    std::cout << ll::format_report(profiles, format);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "lab report: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Living-lab evaluation server for academic search"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the lab server");
  serve_cmd->add_option("--config", serve.config, "Lab config file or preset name")->required();
  serve_cmd->add_option("--data-dir", serve.data_dir, "Event log and snapshot directory");
  serve_cmd->add_option("--bind", serve.bind, "HOST:PORT (default from config or LAB_BIND_ADDR)");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate a desk-scale site");
  gen_cmd->add_option("--profile", gen.profile, "life_science or social_science")->required();
  gen_cmd->add_option("--scale", gen.scale,
                      "life_science: number of records; social_science: divisor of 95k/84k")
      ->required()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulated campaign");
  sim_cmd->add_option("--config", sim.config, "Campaign config file or preset name")->required();
  sim_cmd->add_option("--seed", sim.seed, "Master seed (overrides config)");
  sim_cmd->add_option("--sessions", sim.sessions, "Number of sessions (overrides config)");
  sim_cmd->add_option("--click-model", sim.click_model, "pbm or cascade");
  sim_cmd->add_option("--format", sim.format, "table or csv");
  sim_cmd->add_option("--data-dir", sim.data_dir, "Persist the event log here (embedded mode)");
  sim_cmd->add_option("--server", sim.server, "Lab server URL; embedded when omitted");
  sim_cmd->add_option("--out", sim.out, "Directory for profile files");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Print an experiment's evaluation profiles");
  rep_cmd->add_option("experiment_id", rep.experiment_id, "Experiment id")->required();
  rep_cmd->add_option("--data-dir", rep.data_dir, "Data directory to replay");
  rep_cmd->add_option("--server", rep.server, "Lab server URL");
  rep_cmd->add_option("--format", rep.format, "table or csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*serve_cmd) return cmd_serve(serve);
  if (*gen_cmd) return cmd_gen_corpus(gen);
  if (*sim_cmd) return cmd_simulate(sim);
  if (*rep_cmd) return cmd_report(rep);
  return kExitConfig;
}
