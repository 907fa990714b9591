#pragma once

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <iterator>
#include <set>
#include <filesystem>
#include <string>
#include <vector>

#include "livinglab/corpus.hpp"

namespace testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("livinglab-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline livinglab::Record pub(std::string id, std::string title, std::string abstract = {},
                             std::set<std::string> topics = {}) {
  livinglab::Record r;
  r.id = std::move(id);
  r.kind = livinglab::RecordKind::publication;
  r.title = std::move(title);
  r.abstract = std::move(abstract);
  r.topics = std::move(topics);
  return r;
}

inline livinglab::Record dataset(std::string id, std::string title,
                                 std::set<std::string> topics = {}, std::string abstract = {}) {
  auto r = pub(std::move(id), std::move(title), std::move(abstract), std::move(topics));
  r.kind = livinglab::RecordKind::research_data;
  return r;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace testing
