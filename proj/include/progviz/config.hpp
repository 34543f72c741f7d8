#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "progviz/backend.hpp"
#include "progviz/corpus.hpp"
#include "progviz/prompts.hpp"
#include "progviz/telemetry.hpp"

namespace progviz {

struct StageBackendConfig {
  BackendConfig backend;
  // Used in --mock mode only.
  std::optional<std::filesystem::path> mock_script;
};

struct RunConfig {
  std::filesystem::path corpus_path;
  std::array<StageBackendConfig, 5> backends;  // indexed by StageKind
  std::size_t chunk_size = kDefaultChunkSize;
  int variant_count = 5;
  std::int64_t base_seed = 0;
  int max_parallel_documents = 2;
  bool strict_mode = false;
  // Extra Reason-stage attempts when the answer breaks the list contract.
  int contract_retries = 1;
  std::string city = "Dortmund";
  std::uint32_t image_width = 1024;
  std::uint32_t image_height = 1024;
  EmissionsConfig emissions;
  std::filesystem::path output_dir = "out";

  StageBackendConfig& stage(StageKind s) { return backends[static_cast<std::size_t>(s)]; }
  const StageBackendConfig& stage(StageKind s) const {
    return backends[static_cast<std::size_t>(s)];
  }

  /// Throws Error(InvalidConfig).
  void validate() const;
};

// Config file (JSON):
//
//   {
//     "corpus": "corpus.ini",
//     "output_dir": "out",
//     "chunk_size": 10, "variant_count": 5, "base_seed": 42,
//     "max_parallel_documents": 2, "strict_mode": false, "contract_retries": 1,
//     "city": "Dortmund", "image": {"width": 1024, "height": 1024},
//     "emissions": {"carbon_intensity_kg_per_kwh": 0.38, "underestimation_correction": 1.0},
//     "backends": {
//       "translate_de_en": {"name": "tower", "base_url": "http://gpu:8000",
//                           "model_id": "Unbabel/TowerInstruct-13B-v0.1",
//                           "timeout_s": 300, "max_retries": 3, "retry_backoff_base_s": 1.0,
//                           "max_concurrent_requests": 1, "temperature": 0.0,
//                           "max_output_tokens": 2048, "avg_power_w": 322.58,
//                           "dedicated_summarizer": false, "supports_seed": false,
//                           "mock_script": "mock/translate_de_en.json"},
//       "summarize": {...}, "reason": {...}, "translate_en_de": {...}, "image_gen": {...}
//     }
//   }
//
// Relative paths resolve against the config file's directory. API keys are
// never read from the file; see api_key_env_var().
RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical form of the settings, secrets and output location excluded.
nlohmann::json to_json(const RunConfig& cfg);
/// Hash over the settings that influence stage outputs (backend identity,
/// sampling, chunking, fan-out, seeds, city, image size, strictness).
std::string config_hash(const RunConfig& cfg);

MockScript mock_script_from_json(const nlohmann::json& doc);
MockScript load_mock_script(const std::filesystem::path& path);

}  // namespace progviz
