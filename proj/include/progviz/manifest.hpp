#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "progviz/corpus.hpp"
#include "progviz/prompts.hpp"
#include "progviz/telemetry.hpp"

namespace progviz {

inline constexpr int kManifestSchemaVersion = 1;

enum class StageStatus { Ok, Failed, Skipped };

std::string_view to_string(StageStatus status);

struct StageRecord {
  StageKind stage = StageKind::TranslateDeEn;
  std::string party_id;
  SourceKind source_kind = SourceKind::Program;
  std::string input_hash;                  // empty when no upstream output exists
  std::optional<std::string> output_hash;  // present iff status == Ok
  int prompt_version = 0;
  std::string backend_name;
  std::string model_id;
  int requests = 0;  // backend calls issued by the stage
  int attempts = 0;  // transport attempts across those calls
  std::string started_at;  // ISO-8601 UTC, millisecond resolution
  std::string finished_at;
  double duration_s = 0.0;
  StageStatus status = StageStatus::Skipped;
  std::string error;
};

enum class ArtifactKind { TranslationEn, Summary, Reasoning, TranslationDe, Image };

std::string_view to_string(ArtifactKind kind);

struct ArtifactEntry {
  std::string party_id;
  SourceKind source_kind = SourceKind::Program;
  ArtifactKind kind = ArtifactKind::TranslationEn;
  std::optional<int> variant;  // images only
  std::string path;            // relative to the manifest's directory
  std::string hash;
  std::optional<std::int64_t> seed;
};

struct DocumentEntry {
  std::string party_id;
  std::string party_name;
  SourceKind source_kind = SourceKind::Program;
  std::string content_hash;
};

struct RunManifest {
  int schema_version = kManifestSchemaVersion;
  std::string run_id;
  std::string corpus_hash;
  std::string config_hash;
  nlohmann::json config;  // canonical settings snapshot, secrets excluded
  std::vector<DocumentEntry> documents;
  std::vector<StageRecord> stage_records;
  std::vector<ArtifactEntry> artifacts;
  EmissionsConfig emissions;
  std::vector<EnergyRecord> energy;  // one aggregate row per stage
  EnergyRecord totals;

  std::vector<const StageRecord*> records_for(std::string_view party_id, SourceKind kind) const;
  std::vector<const ArtifactEntry*> artifacts_for(std::string_view party_id, SourceKind kind,
                                                  ArtifactKind artifact) const;
  std::size_t image_count() const;
  /// True when every record of every document is Ok.
  bool all_ok() const;
};

/// Canonical JSON (sorted keys, sorted records).
nlohmann::json to_json(const RunManifest& manifest);
/// Throws Error(ManifestCorrupt).
RunManifest manifest_from_json(const nlohmann::json& doc);

std::string serialize_manifest(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
/// Throws Error(FileNotFound) or Error(ManifestCorrupt).
RunManifest read_manifest(const std::filesystem::path& path);

/// The manifest with run_id and all time-derived fields (timestamps,
/// durations, energy, totals) removed, for run-to-run comparison.
nlohmann::json strip_volatile(const nlohmann::json& manifest);

/// Sorts records and artifacts into canonical order.
void canonicalize(RunManifest& manifest);

}  // namespace progviz
