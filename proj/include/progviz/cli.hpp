#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "progviz/corpus.hpp"

namespace progviz::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;
inline constexpr int kConfigError = 2;

/// Prints sentence and chunk counts per document.
int cmd_validate(const std::filesystem::path& corpus, std::size_t chunk_size, std::ostream& out,
                 std::ostream& err);

struct RunOptions {
  std::filesystem::path config;
  bool mock = false;
  bool resume = false;
  bool strict = false;
  std::optional<std::filesystem::path> out_dir;
};

/// 0 when every stage is Ok, 1 when any failed (manifest still written),
/// 2 on configuration or corpus errors.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

/// 2 when the manifest is missing or corrupt.
int cmd_report(const std::filesystem::path& manifest, std::optional<double> correction, std::ostream& out,
               std::ostream& err);

int cmd_prompts_show(std::ostream& out);

struct SiteCommandOptions {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> strings;
  bool allow_incomplete = false;
};

/// 1 with the violated invariant named on stderr.
int cmd_site(const SiteCommandOptions& options, std::ostream& out, std::ostream& err);

int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace progviz::cli
