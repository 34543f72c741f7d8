#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "progviz/backend.hpp"
#include "progviz/config.hpp"
#include "progviz/corpus.hpp"
#include "progviz/manifest.hpp"
#include "progviz/parse.hpp"
#include "progviz/store.hpp"
#include "progviz/telemetry.hpp"

namespace progviz {

struct StageBackends {
  std::array<std::shared_ptr<Backend>, 5> by_stage;

  Backend& operator[](StageKind stage) const { return *by_stage[static_cast<std::size_t>(stage)]; }
  /// Sum of call_count() over distinct handles.
  std::size_t total_calls() const;
};

/// Builds HTTP (or, with `mock`, scripted mock) handles for every stage.
/// Stages naming the same backend share one concurrency limiter.
StageBackends make_backends(const RunConfig& cfg, bool mock);

/// Live power source; returning nullopt falls back to the configured watts.
using PowerSampler = std::function<std::optional<double>(StageKind stage, double duration_s)>;

// Stored content of the Reason stage.
struct ReasoningArtifact {
  RawReasoningOutput raw;
  DescriptorSet descriptors;
};

// Stored content of the TranslateEnDe stage.
struct GermanTranslation {
  std::vector<std::string> descriptors_en;
  std::vector<std::string> descriptors_de;
  std::string reasoning_de;
};

nlohmann::json to_json(const ReasoningArtifact& artifact);
ReasoningArtifact reasoning_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const GermanTranslation& translation);
GermanTranslation german_translation_from_json(const nlohmann::json& doc);

struct DocumentRun {
  std::vector<StageRecord> records;  // always five, in stage order
  std::vector<ArtifactEntry> artifacts;
};

// Previous results for one document, consulted on resume.
struct DocumentHistory {
  std::vector<StageRecord> records;
  std::vector<ArtifactEntry> artifacts;
};

struct PipelineContext {
  const StageBackends& backends;
  const RunConfig& cfg;
  ContentStore& store;
  EnergyLedger& ledger;
  PowerSampler power_sampler;
};

/// Runs the five stages of one document. Backend and contract failures mark
/// the stage Failed and the rest Skipped; only store failures throw
/// (Error(PipelineAborted)).
DocumentRun run_document(const Document& doc, const PipelineContext& ctx,
                         const DocumentHistory* history = nullptr);

/// Runs every document with at most cfg.max_parallel_documents in flight and
/// writes <output_dir>/manifest.json. Throws Error(DuplicateDocument) before
/// any work when (party_id, source_kind) repeats.
RunManifest run_all(std::span<const Document> corpus, const StageBackends& backends,
                    const RunConfig& cfg, PowerSampler sampler = {});

/// Re-runs only stages that are not Ok with a matching input hash. The store
/// is the manifest's directory. Throws Error(ManifestStale) when the corpus
/// or config no longer match the manifest.
RunManifest resume(const std::filesystem::path& manifest_path, std::span<const Document> corpus,
                   const StageBackends& backends, const RunConfig& cfg, PowerSampler sampler = {});

inline std::filesystem::path manifest_path_for(const RunConfig& cfg) {
  return cfg.output_dir / "manifest.json";
}

std::string make_run_id();

}  // namespace progviz
