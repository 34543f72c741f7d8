#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "progviz/manifest.hpp"

namespace progviz {

// locale ("de", "en") -> key -> text
using LocaleStrings = std::map<std::string, std::map<std::string, std::string>>;

inline constexpr const char* kSiteLocales[] = {"de", "en"};

/// Built-in German and English page strings.
const LocaleStrings& default_locale_strings();
/// {"de": {...}, "en": {...}}. Throws Error(InvalidConfig).
LocaleStrings locale_strings_from_json(const nlohmann::json& doc);
LocaleStrings load_locale_strings(const std::filesystem::path& path);

/// Throws Error(LocaleGap) when a locale is missing, the key sets differ, a
/// required key is absent or the disclaimer is blank.
void check_locale_strings(const LocaleStrings& strings);

struct SiteOptions {
  // Emit failed documents as "failed" entries instead of refusing.
  bool allow_incomplete = false;
};

struct SiteBundle {
  std::filesystem::path root;
  std::vector<std::string> pages;   // relative, sorted
  std::vector<std::string> assets;  // relative, sorted
  std::string data_file = "data.json";
  std::vector<std::string> locale_files;
};

/// One entry per (party, source) in canonical order.
nlohmann::json emit_data_file(const RunManifest& manifest, const std::filesystem::path& manifest_dir);

/// Writes the static bundle into out_dir, which must be empty, absent or a
/// previous bundle (it is replaced). Artifacts are read relative to
/// manifest_dir and checked against their hashes.
/// Throws Error(MissingArtifact), Error(LocaleGap), Error(IncompleteManifest).
SiteBundle emit_site(const RunManifest& manifest, const std::filesystem::path& manifest_dir,
                     const LocaleStrings& strings, const std::filesystem::path& out_dir,
                     SiteOptions options = {});

/// sha256 over the sorted (relative path, file hash) pairs under dir.
std::string hash_directory(const std::filesystem::path& dir);

}  // namespace progviz
