#include "progviz/manifest.hpp"

#include <algorithm>
#include <tuple>

#include "progviz/error.hpp"
#include "progviz/store.hpp"

namespace progviz {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(StageStatus status) {
  switch (status) {
    case StageStatus::Ok: return "ok";
    case StageStatus::Failed: return "failed";
    case StageStatus::Skipped: return "skipped";
  }
  return "unknown";
}

std::string_view to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::TranslationEn: return "translation_en";
    case ArtifactKind::Summary: return "summary";
    case ArtifactKind::Reasoning: return "reasoning";
    case ArtifactKind::TranslationDe: return "translation_de";
    case ArtifactKind::Image: return "image";
  }
  return "unknown";
}

namespace {

StageStatus status_from_string(std::string_view s) {
  for (auto st : {StageStatus::Ok, StageStatus::Failed, StageStatus::Skipped}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::ManifestCorrupt, "unknown stage status '" + std::string(s) + "'");
}

ArtifactKind artifact_kind_from_string(std::string_view s) {
  for (auto k : {ArtifactKind::TranslationEn, ArtifactKind::Summary, ArtifactKind::Reasoning,
                 ArtifactKind::TranslationDe, ArtifactKind::Image}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::ManifestCorrupt, "unknown artifact kind '" + std::string(s) + "'");
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

json energy_to_json(const EnergyRecord& r) {
  return {
      {"stage", r.stage ? json(std::string(to_string(*r.stage))) : json(nullptr)},
      {"label", r.label},
      {"duration_min", r.duration_min},
      {"avg_power_w", optional_json(r.avg_power_w)},
      {"energy_kwh", r.energy_kwh},
      {"emissions_kg", r.emissions_kg},
  };
}

EnergyRecord energy_from_json(const json& j) {
  EnergyRecord r;
  if (auto s = optional_from<std::string>(j, "stage")) r.stage = stage_from_string(*s);
  r.label = j.at("label").get<std::string>();
  r.duration_min = j.at("duration_min").get<double>();
  r.avg_power_w = optional_from<double>(j, "avg_power_w");
  r.energy_kwh = j.at("energy_kwh").get<double>();
  r.emissions_kg = j.at("emissions_kg").get<double>();
  return r;
}

auto record_key(const StageRecord& r) {
  return std::make_tuple(r.party_id, r.source_kind, r.stage);
}

auto artifact_key(const ArtifactEntry& a) {
  return std::make_tuple(a.party_id, a.source_kind, a.kind, a.variant.value_or(-1));
}

}  // namespace

std::vector<const StageRecord*> RunManifest::records_for(std::string_view party_id,
                                                         SourceKind kind) const {
  std::vector<const StageRecord*> out;
  for (const auto& r : stage_records) {
    if (r.party_id == party_id && r.source_kind == kind) out.push_back(&r);
  }
  return out;
}

std::vector<const ArtifactEntry*> RunManifest::artifacts_for(std::string_view party_id,
                                                             SourceKind kind,
                                                             ArtifactKind artifact) const {
  std::vector<const ArtifactEntry*> out;
  for (const auto& a : artifacts) {
    if (a.party_id == party_id && a.source_kind == kind && a.kind == artifact) out.push_back(&a);
  }
  return out;
}

std::size_t RunManifest::image_count() const {
  return static_cast<std::size_t>(std::count_if(artifacts.begin(), artifacts.end(), [](const auto& a) {
    return a.kind == ArtifactKind::Image;
  }));
}

bool RunManifest::all_ok() const {
  return std::all_of(stage_records.begin(), stage_records.end(),
                     [](const auto& r) { return r.status == StageStatus::Ok; });
}

void canonicalize(RunManifest& manifest) {
  std::sort(manifest.documents.begin(), manifest.documents.end(), [](const auto& a, const auto& b) {
    return std::tie(a.party_id, a.source_kind) < std::tie(b.party_id, b.source_kind);
  });
  std::sort(manifest.stage_records.begin(), manifest.stage_records.end(),
            [](const auto& a, const auto& b) { return record_key(a) < record_key(b); });
  std::sort(manifest.artifacts.begin(), manifest.artifacts.end(),
            [](const auto& a, const auto& b) { return artifact_key(a) < artifact_key(b); });
}

json to_json(const RunManifest& m) {
  json docs = json::array();
  for (const auto& d : m.documents) {
    docs.push_back({{"party_id", d.party_id},
                    {"party_name", d.party_name},
                    {"source_kind", to_string(d.source_kind)},
                    {"content_hash", d.content_hash}});
  }
  json records = json::array();
  for (const auto& r : m.stage_records) {
    records.push_back({
        {"stage", to_string(r.stage)},
        {"party_id", r.party_id},
        {"source_kind", to_string(r.source_kind)},
        {"input_hash", r.input_hash},
        {"output_hash", optional_json(r.output_hash)},
        {"prompt_version", r.prompt_version},
        {"backend_name", r.backend_name},
        {"model_id", r.model_id},
        {"requests", r.requests},
        {"attempts", r.attempts},
        {"started_at", r.started_at},
        {"finished_at", r.finished_at},
        {"duration_s", r.duration_s},
        {"status", to_string(r.status)},
        {"error", r.error},
    });
  }
  json artifacts = json::array();
  for (const auto& a : m.artifacts) {
    artifacts.push_back({
        {"party_id", a.party_id},
        {"source_kind", to_string(a.source_kind)},
        {"kind", to_string(a.kind)},
        {"variant", optional_json(a.variant)},
        {"path", a.path},
        {"hash", a.hash},
        {"seed", optional_json(a.seed)},
    });
  }
  json energy = json::array();
  for (const auto& e : m.energy) energy.push_back(energy_to_json(e));

  return {
      {"schema_version", m.schema_version},
      {"run_id", m.run_id},
      {"corpus_hash", m.corpus_hash},
      {"config_hash", m.config_hash},
      {"config", m.config.is_null() ? json::object() : m.config},
      {"documents", docs},
      {"stage_records", records},
      {"artifacts", artifacts},
      {"emissions_config",
       {{"carbon_intensity_kg_per_kwh", m.emissions.carbon_intensity_kg_per_kwh},
        {"underestimation_correction", m.emissions.underestimation_correction}}},
      {"energy", energy},
      {"totals", energy_to_json(m.totals)},
  };
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) {
      throw Error(ErrorCode::ManifestCorrupt,
                  "unsupported schema_version " + std::to_string(m.schema_version));
    }
    m.run_id = j.at("run_id").get<std::string>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.value("config", json::object());
    for (const auto& d : j.at("documents")) {
      m.documents.push_back({d.at("party_id").get<std::string>(), d.at("party_name").get<std::string>(),
                             source_kind_from_string(d.at("source_kind").get<std::string>()),
                             d.at("content_hash").get<std::string>()});
    }
    for (const auto& r : j.at("stage_records")) {
      StageRecord rec;
      rec.stage = stage_from_string(r.at("stage").get<std::string>());
      rec.party_id = r.at("party_id").get<std::string>();
      rec.source_kind = source_kind_from_string(r.at("source_kind").get<std::string>());
      rec.input_hash = r.at("input_hash").get<std::string>();
      rec.output_hash = optional_from<std::string>(r, "output_hash");
      rec.prompt_version = r.at("prompt_version").get<int>();
      rec.backend_name = r.at("backend_name").get<std::string>();
      rec.model_id = r.at("model_id").get<std::string>();
      rec.requests = r.at("requests").get<int>();
      rec.attempts = r.at("attempts").get<int>();
      rec.started_at = r.at("started_at").get<std::string>();
      rec.finished_at = r.at("finished_at").get<std::string>();
      rec.duration_s = r.at("duration_s").get<double>();
      rec.status = status_from_string(r.at("status").get<std::string>());
      rec.error = r.value("error", std::string{});
      m.stage_records.push_back(std::move(rec));
    }
    for (const auto& a : j.at("artifacts")) {
      ArtifactEntry art;
      art.party_id = a.at("party_id").get<std::string>();
      art.source_kind = source_kind_from_string(a.at("source_kind").get<std::string>());
      art.kind = artifact_kind_from_string(a.at("kind").get<std::string>());
      art.variant = optional_from<int>(a, "variant");
      art.path = a.at("path").get<std::string>();
      art.hash = a.at("hash").get<std::string>();
      art.seed = optional_from<std::int64_t>(a, "seed");
      m.artifacts.push_back(std::move(art));
    }
    const auto& ec = j.at("emissions_config");
    m.emissions.carbon_intensity_kg_per_kwh = ec.at("carbon_intensity_kg_per_kwh").get<double>();
    m.emissions.underestimation_correction = ec.at("underestimation_correction").get<double>();
    for (const auto& e : j.at("energy")) m.energy.push_back(energy_from_json(e));
    m.totals = energy_from_json(j.at("totals"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestCorrupt, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ManifestCorrupt) throw;
    throw Error(ErrorCode::ManifestCorrupt, e.what());
  }
  return m;
}

std::string serialize_manifest(const RunManifest& manifest) {
  RunManifest sorted = manifest;
  canonicalize(sorted);
  return to_json(sorted).dump(2) + "\n";
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
  write_file_atomic(path, serialize_manifest(manifest));
}

RunManifest read_manifest(const fs::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestCorrupt, path.string() + ": " + e.what());
  }
  return manifest_from_json(doc);
}

json strip_volatile(const json& manifest) {
  json out = manifest;
  out.erase("run_id");
  out.erase("energy");
  out.erase("totals");
  if (out.contains("stage_records")) {
    for (auto& r : out["stage_records"]) {
      r.erase("started_at");
      r.erase("finished_at");
      r.erase("duration_s");
    }
  }
  return out;
}

}  // namespace progviz
