#include "progviz/config.hpp"

#include "progviz/error.hpp"
#include "progviz/hash.hpp"
#include "progviz/store.hpp"

namespace progviz {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::chrono::milliseconds millis(double seconds) {
  return std::chrono::milliseconds{static_cast<std::int64_t>(seconds * 1000.0 + 0.5)};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

StageBackendConfig backend_from_json(const json& j, const fs::path& base_dir) {
  StageBackendConfig out;
  auto& b = out.backend;
  b.name = j.at("name").get<std::string>();
  b.base_url = j.value("base_url", std::string{});
  b.model_id = j.value("model_id", std::string{});
  b.timeout = millis(j.value("timeout_s", 120.0));
  b.max_retries = j.value("max_retries", 3);
  b.retry_backoff_base = millis(j.value("retry_backoff_base_s", 1.0));
  b.max_concurrent_requests = j.value("max_concurrent_requests", 1);
  b.temperature = j.value("temperature", 0.0);
  b.max_output_tokens = j.value("max_output_tokens", 2048);
  b.dedicated_summarizer = j.value("dedicated_summarizer", false);
  b.supports_seed = j.value("supports_seed", false);
  b.avg_power_w = j.value("avg_power_w", 0.0);
  b.api_key = api_key_from_env(b.name);
  if (j.contains("api_key")) {
    throw Error(ErrorCode::InvalidConfig,
                "backend '" + b.name + "': api_key must come from " + api_key_env_var(b.name));
  }
  if (j.contains("mock_script")) out.mock_script = resolve(base_dir, j["mock_script"].get<std::string>());
  return out;
}

json backend_to_json(const StageBackendConfig& s) {
  const auto& b = s.backend;
  json j = {
      {"name", b.name},
      {"base_url", b.base_url},
      {"model_id", b.model_id},
      {"timeout_s", std::chrono::duration<double>(b.timeout).count()},
      {"max_retries", b.max_retries},
      {"retry_backoff_base_s", std::chrono::duration<double>(b.retry_backoff_base).count()},
      {"max_concurrent_requests", b.max_concurrent_requests},
      {"temperature", b.temperature},
      {"max_output_tokens", b.max_output_tokens},
      {"dedicated_summarizer", b.dedicated_summarizer},
      {"supports_seed", b.supports_seed},
      {"avg_power_w", b.avg_power_w},
  };
  return j;
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (chunk_size < 1) fail("chunk_size must be >= 1");
  if (variant_count < 1) fail("variant_count must be >= 1");
  if (max_parallel_documents < 1) fail("max_parallel_documents must be >= 1");
  if (contract_retries < 0 || contract_retries > 2) fail("contract_retries must be in [0, 2]");
  if (city.empty()) fail("city must be non-empty");
  if (image_width == 0 || image_height == 0) fail("image size must be positive");
  emissions.validate();
  for (auto stage : kAllStages) {
    const auto& b = this->stage(stage).backend;
    if (b.name.empty()) fail("no backend configured for stage " + std::string(to_string(stage)));
    b.validate();
  }
}

RunConfig run_config_from_json(const json& doc, const fs::path& base_dir) {
  RunConfig cfg;
  try {
    cfg.corpus_path = resolve(base_dir, doc.at("corpus").get<std::string>());
    cfg.output_dir = resolve(base_dir, doc.value("output_dir", std::string("out")));
    cfg.chunk_size = doc.value("chunk_size", kDefaultChunkSize);
    cfg.variant_count = doc.value("variant_count", 5);
    cfg.base_seed = doc.value("base_seed", std::int64_t{0});
    cfg.max_parallel_documents = doc.value("max_parallel_documents", 2);
    cfg.strict_mode = doc.value("strict_mode", false);
    cfg.contract_retries = doc.value("contract_retries", 1);
    cfg.city = doc.value("city", std::string(kDefaultCity));
    if (doc.contains("image")) {
      cfg.image_width = doc["image"].value("width", 1024u);
      cfg.image_height = doc["image"].value("height", 1024u);
    }
    if (doc.contains("emissions")) {
      const auto& e = doc["emissions"];
      cfg.emissions.carbon_intensity_kg_per_kwh = e.value("carbon_intensity_kg_per_kwh", 0.380);
      cfg.emissions.underestimation_correction = e.value("underestimation_correction", 1.0);
    }
    const auto& backends = doc.at("backends");
    for (auto stage : kAllStages) {
      const std::string key(to_string(stage));
      if (!backends.contains(key)) {
        throw Error(ErrorCode::InvalidConfig, "backends." + key + " is missing");
      }
      cfg.stage(stage) = backend_from_json(backends[key], base_dir);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidConfig, "cannot read config " + path.string());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  return run_config_from_json(doc, path.parent_path());
}

json to_json(const RunConfig& cfg) {
  json backends = json::object();
  for (auto stage : kAllStages) backends[std::string(to_string(stage))] = backend_to_json(cfg.stage(stage));
  return {
      {"corpus", cfg.corpus_path.generic_string()},
      {"chunk_size", cfg.chunk_size},
      {"variant_count", cfg.variant_count},
      {"base_seed", cfg.base_seed},
      {"max_parallel_documents", cfg.max_parallel_documents},
      {"strict_mode", cfg.strict_mode},
      {"contract_retries", cfg.contract_retries},
      {"city", cfg.city},
      {"image", {{"width", cfg.image_width}, {"height", cfg.image_height}}},
      {"emissions",
       {{"carbon_intensity_kg_per_kwh", cfg.emissions.carbon_intensity_kg_per_kwh},
        {"underestimation_correction", cfg.emissions.underestimation_correction}}},
      {"backends", backends},
  };
}

std::string config_hash(const RunConfig& cfg) {
  json backends = json::object();
  for (auto stage : kAllStages) {
    const auto& b = cfg.stage(stage).backend;
    backends[std::string(to_string(stage))] = {
        {"name", b.name},
        {"base_url", b.base_url},
        {"model_id", b.model_id},
        {"temperature", b.temperature},
        {"max_output_tokens", b.max_output_tokens},
        {"dedicated_summarizer", b.dedicated_summarizer},
        {"supports_seed", b.supports_seed},
    };
  }
  const json relevant = {
      {"chunk_size", cfg.chunk_size},
      {"variant_count", cfg.variant_count},
      {"base_seed", cfg.base_seed},
      {"strict_mode", cfg.strict_mode},
      {"contract_retries", cfg.contract_retries},
      {"city", cfg.city},
      {"image", {{"width", cfg.image_width}, {"height", cfg.image_height}}},
      {"backends", backends},
  };
  return sha256_hex(relevant.dump());
}

MockScript mock_script_from_json(const json& doc) {
  MockScript script;
  try {
    if (doc.contains("responses")) {
      for (const auto& [key, value] : doc["responses"].items()) {
        script.responses[key] = value.get<std::string>();
      }
    }
    if (doc.contains("failures")) {
      for (const auto& [key, value] : doc["failures"].items()) {
        const auto kind = backend_error_kind_from_string(value.get<std::string>());
        if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown failure kind '" + value.get<std::string>() + "'");
        script.failures[key] = *kind;
      }
    }
    script.delay = std::chrono::milliseconds{doc.value("delay_ms", 0)};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("mock script: ") + e.what());
  }
  return script;
}

MockScript load_mock_script(const fs::path& path) {
  try {
    return mock_script_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FileNotFound) {
      throw Error(ErrorCode::InvalidConfig, "mock script not found: " + path.string());
    }
    throw;
  }
}

}  // namespace progviz
