#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "progviz/config.hpp"

namespace testing {

inline const std::filesystem::path kFixtures = PROGVIZ_FIXTURES;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> n{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("progviz-test-" + std::to_string(rd()) + "-" + std::to_string(n++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Mock configuration with output redirected into `out`.
inline progviz::RunConfig mock_config(const std::filesystem::path& out,
                                      const std::string& file = "mock_config.json") {
  auto cfg = progviz::load_run_config(kFixtures / file);
  cfg.output_dir = out;
  return cfg;
}

}  // namespace testing
