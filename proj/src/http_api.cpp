#include "livinglab/http_api.hpp"

#include <httplib.h>

#include "livinglab/error.hpp"

namespace livinglab {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json error_body(const std::string& message) { return json{{"error", message}}; }

/// Operator endpoints report the full error text.
template <typename Fn>
void operator_call(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFound& e) {
    reply(res, 404, error_body(e.what()));
  } catch (const StateError& e) {
    reply(res, 409, error_body(e.what()));
  } catch (const ValidationError& e) {
    reply(res, 400, error_body(e.what()));
  } catch (const SystemUnavailable& e) {
    reply(res, 503, error_body(e.what()));
  } catch (const json::exception& e) {
    reply(res, 400, error_body(std::string("malformed body: ") + e.what()));
  } catch (const std::exception& e) {
    reply(res, 500, error_body(e.what()));
  }
}

/// Site endpoints answer with fixed texts so no system id can leak.
template <typename Fn>
void site_call(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFound&) {
    reply(res, 404, error_body("not found"));
  } catch (const StateError&) {
    reply(res, 409, error_body("conflict"));
  } catch (const ValidationError&) {
    reply(res, 400, error_body("invalid request"));
  } catch (const json::exception&) {
    reply(res, 400, error_body("invalid request"));
  } catch (const SystemUnavailable&) {
    reply(res, 503, error_body("service unavailable"));
  } catch (const std::exception&) {
    reply(res, 500, error_body("internal error"));
  }
}

json parse_body(const httplib::Request& req) {
  auto body = json::parse(req.body);
  if (!body.is_object()) throw ValidationError("body must be an object");
  return body;
}

}  // namespace

HttpApi::HttpApi(Lab& lab, std::optional<std::filesystem::path> ui_dir)
    : lab_(lab), server_(std::make_unique<httplib::Server>()) {
  // Plain SO_REUSEADDR: a second server on a bound port must fail to bind.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
  if (ui_dir) server_->set_mount_point("/ui", ui_dir->string());
}

HttpApi::~HttpApi() { stop(); }

bool HttpApi::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

int HttpApi::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool HttpApi::listen_after_bind() { return server_->listen_after_bind(); }

void HttpApi::stop() {
  if (server_) server_->stop();
}

void HttpApi::wait_until_ready() const { server_->wait_until_ready(); }

void HttpApi::install_routes() {
  auto& s = *server_;

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, json{{"status", "ok"}});
  });

  // -- operator --------------------------------------------------------------

  s.Get("/api/systems", [this](const httplib::Request&, httplib::Response& res) {
    operator_call(res, [&] {
      json list = json::array();
      for (const auto& d : lab_.systems()) list.push_back(to_json(d));
      reply(res, 200, list);
    });
  });

  s.Post("/api/systems", [this](const httplib::Request& req, httplib::Response& res) {
    operator_call(res, [&] {
      const auto descriptor = system_from_json(parse_body(req));
      lab_.register_system(descriptor);
      reply(res, 201, to_json(descriptor));
    });
  });

  s.Get("/api/sites", [this](const httplib::Request&, httplib::Response& res) {
    operator_call(res, [&] {
      json list = json::array();
      for (const auto& id : lab_.site_ids()) {
        auto site = lab_.site(id);
        list.push_back({{"site_id", id},
                        {"records", site->corpus->size()},
                        {"head_queries", site->queries->size()}});
      }
      reply(res, 200, list);
    });
  });

  s.Post("/api/experiments", [this](const httplib::Request& req, httplib::Response& res) {
    operator_call(res, [&] {
      auto id = lab_.create_experiment(experiment_from_json(parse_body(req)));
      reply(res, 201, json{{"experiment_id", id}});
    });
  });

  s.Get("/api/experiments", [this](const httplib::Request&, httplib::Response& res) {
    operator_call(res, [&] {
      json list = json::array();
      for (const auto& e : lab_.experiments()) list.push_back(to_json(e));
      reply(res, 200, list);
    });
  });

  s.Get(R"(/api/experiments/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    operator_call(res, [&] { reply(res, 200, to_json(lab_.experiment(req.matches[1]))); });
  });

  s.Post(R"(/api/experiments/([^/]+)/(start|stop))",
         [this](const httplib::Request& req, httplib::Response& res) {
           operator_call(res, [&] {
             const std::string id = req.matches[1];
             const auto state =
                 req.matches[2] == "start" ? lab_.start_experiment(id) : lab_.stop_experiment(id);
             reply(res, 200, json{{"experiment_id", id}, {"state", to_string(state)}});
           });
         });

  s.Get(R"(/api/experiments/([^/]+)/report)",
        [this](const httplib::Request& req, httplib::Response& res) {
          operator_call(res, [&] {
            const std::string id = req.matches[1];
            reply(res, 200, report_to_json(id, lab_.report(id)));
          });
        });

  // -- site ------------------------------------------------------------------

  s.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    site_call(res, [&] {
      const auto body = parse_body(req);
      const auto experiment_id = body.at("experiment_id").get<std::string>();
      std::string target;
      if (body.contains("query_id")) {
        target = body["query_id"].get<std::string>();
      } else if (body.contains("seed_record")) {
        target = body["seed_record"].get<std::string>();
      } else {
        throw ValidationError("query_id or seed_record required");
      }
      const auto session = lab_.create_session(experiment_id, target);
      reply(res, 201, json{{"session_id", session.session_id}, {"docs", session.docs}});
    });
  });

  s.Post(R"(/api/sessions/([^/]+)/feedback)",
         [this](const httplib::Request& req, httplib::Response& res) {
           site_call(res, [&] {
             const std::string id = req.matches[1];
             const auto clicks = parse_body(req).at("clicks").get<std::vector<int>>();
             lab_.record_feedback(id, std::set<int>(clicks.begin(), clicks.end()));
             reply(res, 200, json{{"session_id", id}, {"status", "recorded"}});
           });
         });
}

}  // namespace livinglab
