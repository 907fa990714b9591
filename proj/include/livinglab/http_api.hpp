#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "livinglab/labserver.hpp"

namespace httplib {
class Server;
}

namespace livinglab {

/// REST binding of a Lab.
///
/// Site role:     POST /api/sessions, POST /api/sessions/{id}/feedback
/// Operator role: /api/experiments[...], /api/systems, /api/sites
///
/// Site-role responses never name a system or a team, including in errors.
class HttpApi {
 public:
  explicit HttpApi(Lab& lab, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  /// Binds without serving. Returns false when the address is taken.
  bool bind(const std::string& host, int port);
  /// Binds an ephemeral port and returns it, or -1.
  int bind_to_any_port(const std::string& host);
  /// Serves until stop(); call after a successful bind.
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();

  Lab& lab_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace livinglab
