#include "progviz/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "progviz/error.hpp"
#include "progviz/hash.hpp"
#include "progviz/png.hpp"

namespace progviz {

namespace fs = std::filesystem;
using json = nlohmann::json;
using SysClock = std::chrono::system_clock;

std::size_t StageBackends::total_calls() const {
  std::set<const Backend*> seen;
  std::size_t total = 0;
  for (const auto& b : by_stage) {
    if (b && seen.insert(b.get()).second) total += b->call_count();
  }
  return total;
}

StageBackends make_backends(const RunConfig& cfg, bool mock) {
  std::map<std::string, std::shared_ptr<ConcurrencyLimiter>> limiters;
  StageBackends out;
  for (auto stage : kAllStages) {
    const auto& sc = cfg.stage(stage);
    auto& limiter = limiters[sc.backend.name];
    if (!limiter) limiter = std::make_shared<ConcurrencyLimiter>(sc.backend.max_concurrent_requests);
    std::shared_ptr<Backend> handle;
    if (mock) {
      MockScript script = sc.mock_script ? load_mock_script(*sc.mock_script) : MockScript{};
      handle = std::make_shared<MockBackend>(sc.backend, std::move(script), limiter);
    } else {
      handle = std::make_shared<HttpBackend>(sc.backend, limiter);
    }
    out.by_stage[static_cast<std::size_t>(stage)] = std::move(handle);
  }
  return out;
}

json to_json(const ReasoningArtifact& a) {
  json violations = json::array();
  for (const auto& v : a.descriptors.violations) {
    violations.push_back({{"kind", to_string(v.kind)},
                          {"item_index", v.item_index ? json(*v.item_index) : json(nullptr)},
                          {"detail", v.detail}});
  }
  return {
      {"full_text", a.raw.full_text},
      {"think_block", a.raw.think_block ? json(*a.raw.think_block) : json(nullptr)},
      {"answer_text", a.raw.answer_text},
      {"descriptors", a.descriptors.descriptors},
      {"violations", violations},
      {"source_party", a.descriptors.source_party},
      {"source_kind", to_string(a.descriptors.source_kind)},
  };
}

ReasoningArtifact reasoning_from_json(const json& j) {
  ReasoningArtifact a;
  a.raw.full_text = j.at("full_text").get<std::string>();
  if (!j.at("think_block").is_null()) a.raw.think_block = j["think_block"].get<std::string>();
  a.raw.answer_text = j.at("answer_text").get<std::string>();
  a.descriptors.descriptors = j.at("descriptors").get<std::vector<std::string>>();
  for (const auto& v : j.at("violations")) {
    Violation viol{violation_kind_from_string(v.at("kind").get<std::string>()), std::nullopt,
                   v.at("detail").get<std::string>()};
    if (!v.at("item_index").is_null()) viol.item_index = v["item_index"].get<std::size_t>();
    a.descriptors.violations.push_back(std::move(viol));
  }
  a.descriptors.source_party = j.at("source_party").get<std::string>();
  a.descriptors.source_kind = source_kind_from_string(j.at("source_kind").get<std::string>());
  return a;
}

json to_json(const GermanTranslation& t) {
  return {{"descriptors_en", t.descriptors_en},
          {"descriptors_de", t.descriptors_de},
          {"reasoning_de", t.reasoning_de}};
}

GermanTranslation german_translation_from_json(const json& j) {
  return {j.at("descriptors_en").get<std::vector<std::string>>(),
          j.at("descriptors_de").get<std::vector<std::string>>(),
          j.at("reasoning_de").get<std::string>()};
}

std::string make_run_id() {
  const auto now = SysClock::to_time_t(SysClock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::random_device rd;
  std::ostringstream id;
  id << "run-" << std::put_time(&tm, "%Y%m%dT%H%M%SZ") << '-' << std::hex << std::setw(8)
     << std::setfill('0') << (rd() & 0xffffffffu);
  return id.str();
}

namespace {

std::string iso_utc(SysClock::time_point tp) {
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(tp);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp - secs).count();
  const std::time_t t = SysClock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms
      << 'Z';
  return out.str();
}

ArtifactKind artifact_kind_for(StageKind stage) {
  switch (stage) {
    case StageKind::TranslateDeEn: return ArtifactKind::TranslationEn;
    case StageKind::Summarize: return ArtifactKind::Summary;
    case StageKind::Reason: return ArtifactKind::Reasoning;
    case StageKind::TranslateEnDe: return ArtifactKind::TranslationDe;
    case StageKind::ImageGen: return ArtifactKind::Image;
  }
  return ArtifactKind::TranslationEn;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

struct StageOutcome {
  std::optional<std::string> output_hash;
  std::vector<ArtifactEntry> artifacts;
  int requests = 0;
  int attempts = 0;
};

class DocumentRunner {
 public:
  DocumentRunner(const Document& doc, const PipelineContext& ctx, const DocumentHistory* history)
      : doc_(doc), ctx_(ctx), history_(history) {}

  DocumentRun run() {
    DocumentRun out;
    std::string input_hash = doc_.content_hash;
    std::optional<StageKind> failed_stage;

    for (auto stage : kAllStages) {
      StageRecord rec;
      rec.stage = stage;
      rec.party_id = doc_.party_id;
      rec.source_kind = doc_.source_kind;
      rec.prompt_version = prompt_template(stage).version;
      rec.backend_name = ctx_.backends[stage].config().name;
      rec.model_id = ctx_.backends[stage].config().model_id;

      if (failed_stage) {
        rec.status = StageStatus::Skipped;
        rec.error = "upstream stage " + std::string(to_string(*failed_stage)) + " failed";
        out.records.push_back(std::move(rec));
        continue;
      }
      rec.input_hash = input_hash;

      if (reuse(stage, rec, out.artifacts)) {
        input_hash = *rec.output_hash;
        record_energy(stage, rec.duration_s);
        out.records.push_back(std::move(rec));
        continue;
      }

      StageOutcome outcome;
      const auto started = SysClock::now();
      try {
        execute(stage, outcome);
        rec.status = StageStatus::Ok;
        rec.output_hash = outcome.output_hash;
      } catch (const BackendError& e) {
        rec.status = StageStatus::Failed;
        rec.error = e.what();
      } catch (const Error& e) {
        if (e.code() == ErrorCode::PipelineAborted) throw;
        rec.status = StageStatus::Failed;
        rec.error = e.what();
      }
      const auto finished = SysClock::now();
      rec.started_at = iso_utc(started);
      rec.finished_at = iso_utc(finished);
      rec.duration_s = std::chrono::duration<double>(finished - started).count();
      rec.requests = outcome.requests;
      rec.attempts = outcome.attempts;
      record_energy(stage, rec.duration_s);

      if (rec.status == StageStatus::Ok) {
        input_hash = *rec.output_hash;
        for (auto& a : outcome.artifacts) out.artifacts.push_back(std::move(a));
      } else {
        failed_stage = stage;
      }
      out.records.push_back(std::move(rec));
    }
    return out;
  }

 private:
  void execute(StageKind stage, StageOutcome& out) {
    switch (stage) {
      case StageKind::TranslateDeEn: return translate_de_en(out);
      case StageKind::Summarize: return summarize(out);
      case StageKind::Reason: return reason(out);
      case StageKind::TranslateEnDe: return translate_en_de(out);
      case StageKind::ImageGen: return generate_images(out);
    }
  }

  void record_energy(StageKind stage, double duration_s) {
    std::optional<double> watts;
    if (ctx_.power_sampler) watts = ctx_.power_sampler(stage, duration_s);
    ctx_.ledger.record_stage(stage, duration_s / 60.0,
                             watts.value_or(ctx_.cfg.stage(stage).backend.avg_power_w),
                             ctx_.cfg.emissions);
  }

  std::string request_id(StageKind stage) {
    return doc_.party_id + "/" + std::string(to_string(doc_.source_kind)) + "/" +
           std::string(to_string(stage)) + "/" + std::to_string(next_request_++);
  }

  std::string chat(StageKind stage, const std::string& prompt, StageOutcome& out) {
    Backend& backend = ctx_.backends[stage];
    ChatRequest req;
    req.model_id = backend.config().model_id;
    req.prompt = prompt;
    req.temperature = backend.config().temperature;
    req.max_output_tokens = backend.config().max_output_tokens;
    req.request_id = request_id(stage);
    ++out.requests;
    try {
      ChatResponse resp = backend.complete_chat(req);
      out.attempts += resp.attempts;
      return std::move(resp.text);
    } catch (const BackendError& e) {
      out.attempts += std::max(1, e.attempts());
      throw;
    }
  }

  ArtifactEntry entry(ArtifactKind kind, const StoredObject& obj) const {
    ArtifactEntry a;
    a.party_id = doc_.party_id;
    a.source_kind = doc_.source_kind;
    a.kind = kind;
    a.path = obj.relative_path;
    a.hash = obj.hash;
    return a;
  }

  void finish_single(ArtifactKind kind, const StoredObject& obj, StageOutcome& out) const {
    out.output_hash = obj.hash;
    out.artifacts.push_back(entry(kind, obj));
  }

  // Chunks `text` by sentences and translates each chunk independently;
  // outputs are joined with single spaces in chunk order.
  std::string translate_chunked(StageKind stage, TranslationDirection direction,
                                std::string_view text, StageOutcome& out) {
    const auto spans = segment_sentences(text);
    const auto chunks = chunk_sentences(spans, ctx_.cfg.chunk_size);
    std::string joined;
    for (const auto& chunk : chunks) {
      const std::string translated = chat(stage, render_translation_prompt(direction, chunk.text), out);
      if (!joined.empty()) joined.push_back(' ');
      joined += translated;
    }
    return joined;
  }

  void translate_de_en(StageOutcome& out) {
    english_ = translate_chunked(StageKind::TranslateDeEn, TranslationDirection::DeEn, doc_.body, out);
    finish_single(ArtifactKind::TranslationEn, ctx_.store.put_text(english_), out);
  }

  void summarize(StageOutcome& out) {
    const bool dedicated = ctx_.backends[StageKind::Summarize].config().dedicated_summarizer;
    summary_ = chat(StageKind::Summarize, render_summarize_input(english_, dedicated), out);
    finish_single(ArtifactKind::Summary, ctx_.store.put_text(summary_), out);
  }

  void reason(StageOutcome& out) {
    const std::string prompt = render_reasoning_prompt(summary_);
    const int tries = 1 + ctx_.cfg.contract_retries;
    for (int t = 0; t < tries; ++t) {
      ReasoningArtifact artifact;
      artifact.raw = extract_think_block(chat(StageKind::Reason, prompt, out));
      std::string problem;
      try {
        artifact.descriptors = parse_descriptor_list(artifact.raw.answer_text, {ctx_.cfg.strict_mode});
        if (!artifact.descriptors.usable()) {
          problem = "answer holds " + std::to_string(artifact.descriptors.descriptors.size()) +
                    " descriptors, expected " + std::to_string(kExpectedDescriptors);
        }
      } catch (const Error& e) {
        problem = e.what();
      }
      if (problem.empty()) {
        artifact.descriptors.source_party = doc_.party_id;
        artifact.descriptors.source_kind = doc_.source_kind;
        finish_single(ArtifactKind::Reasoning, ctx_.store.put_text(to_json(artifact).dump(2), "json"), out);
        reasoning_ = std::move(artifact);
        return;
      }
      if (t + 1 == tries) throw Error(ErrorCode::ContractViolation, problem);
    }
  }

  void translate_en_de(StageOutcome& out) {
    GermanTranslation de;
    de.descriptors_en = reasoning_->descriptors.descriptors;
    const auto& think = reasoning_->raw.think_block;
    if (think && !blank(*think)) {
      de.reasoning_de = translate_chunked(StageKind::TranslateEnDe, TranslationDirection::EnDe, *think, out);
    }
    for (const auto& d : de.descriptors_en) {
      de.descriptors_de.push_back(
          chat(StageKind::TranslateEnDe, render_translation_prompt(TranslationDirection::EnDe, d), out));
    }
    finish_single(ArtifactKind::TranslationDe, ctx_.store.put_text(to_json(de).dump(2), "json"), out);
  }

  void generate_images(StageOutcome& out) {
    Backend& backend = ctx_.backends[StageKind::ImageGen];
    ImageRequest req;
    req.model_id = backend.config().model_id;
    req.prompt = render_image_prompt(reasoning_->descriptors, ctx_.cfg.city);
    req.variant_count = ctx_.cfg.variant_count;
    req.width = ctx_.cfg.image_width;
    req.height = ctx_.cfg.image_height;
    req.seed = ctx_.cfg.base_seed;
    req.request_id = request_id(StageKind::ImageGen);
    ++out.requests;
    ImageResult result;
    try {
      result = backend.generate_images(req);
      out.attempts += result.attempts;
    } catch (const BackendError& e) {
      out.attempts += std::max(1, e.attempts());
      throw;
    }
    if (static_cast<int>(result.images.size()) != req.variant_count) {
      throw BackendError(BackendErrorKind::ResponseMalformed,
                         "expected " + std::to_string(req.variant_count) + " images, got " +
                             std::to_string(result.images.size()));
    }
    std::string joined;
    for (const auto& img : result.images) {
      if (img.format != "png" || !png::looks_valid(img.bytes)) {
        throw BackendError(BackendErrorKind::ImageDecodeError,
                           "variant " + std::to_string(img.variant_index) + " is not a valid PNG");
      }
      const StoredObject obj = ctx_.store.put(img.bytes, "png");
      ArtifactEntry a = entry(ArtifactKind::Image, obj);
      a.variant = img.variant_index;
      a.seed = img.seed;
      out.artifacts.push_back(std::move(a));
      joined += obj.hash + '\n';
    }
    out.output_hash = sha256_hex(joined);
  }

  // A stage is reused when its previous record is Ok for the same input and
  // every stored output still verifies.
  bool reuse(StageKind stage, StageRecord& rec, std::vector<ArtifactEntry>& artifacts) {
    if (!history_) return false;
    const auto prev = std::find_if(history_->records.begin(), history_->records.end(), [&](const auto& r) {
      return r.stage == stage && r.status == StageStatus::Ok && r.output_hash &&
             r.input_hash == rec.input_hash;
    });
    if (prev == history_->records.end()) return false;

    std::vector<ArtifactEntry> found;
    for (const auto& a : history_->artifacts) {
      if (a.kind == artifact_kind_for(stage)) found.push_back(a);
    }
    if (found.empty()) return false;
    for (const auto& a : found) {
      if (!ctx_.store.verify(a.path, a.hash)) return false;
    }
    try {
      switch (stage) {
        case StageKind::TranslateDeEn: english_ = ctx_.store.read(found.front().path); break;
        case StageKind::Summarize: summary_ = ctx_.store.read(found.front().path); break;
        case StageKind::Reason:
          reasoning_ = reasoning_from_json(json::parse(ctx_.store.read(found.front().path)));
          break;
        case StageKind::TranslateEnDe:
        case StageKind::ImageGen: break;
      }
    } catch (const std::exception&) {
      return false;
    }
    rec = *prev;
    for (auto& a : found) artifacts.push_back(std::move(a));
    return true;
  }

  const Document& doc_;
  const PipelineContext& ctx_;
  const DocumentHistory* history_;
  int next_request_ = 0;

  std::string english_;
  std::string summary_;
  std::optional<ReasoningArtifact> reasoning_;
};

std::vector<DocumentRun> execute_documents(std::span<const Document> corpus, const PipelineContext& ctx,
                                           std::span<const DocumentHistory* const> histories) {
  std::vector<DocumentRun> runs(corpus.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next++;
      if (i >= corpus.size()) return;
      try {
        DocumentRunner runner(corpus[i], ctx, histories.empty() ? nullptr : histories[i]);
        runs[i] = runner.run();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(corpus.size(), static_cast<std::size_t>(ctx.cfg.max_parallel_documents));
  std::vector<std::thread> workers;
  for (std::size_t w = 1; w < n_workers; ++w) workers.emplace_back(worker);
  worker();
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return runs;
}

RunManifest assemble(std::string run_id, std::span<const Document> corpus, const RunConfig& cfg,
                     std::vector<DocumentRun>& runs, const EnergyLedger& ledger) {
  RunManifest m;
  m.run_id = std::move(run_id);
  m.corpus_hash = corpus_hash(corpus);
  m.config_hash = config_hash(cfg);
  m.config = to_json(cfg);
  m.emissions = cfg.emissions;
  for (const auto& d : corpus) {
    m.documents.push_back({d.party_id, d.party_name, d.source_kind, d.content_hash});
  }
  for (auto& run : runs) {
    for (auto& r : run.records) m.stage_records.push_back(std::move(r));
    for (auto& a : run.artifacts) m.artifacts.push_back(std::move(a));
  }
  const auto records = ledger.snapshot();
  if (!records.empty()) {
    const EmissionsReport report = build_report(records, cfg.emissions);
    m.energy = report.rows;
    m.totals = report.total;
  }
  canonicalize(m);
  return m;
}

void check_corpus(std::span<const Document> corpus) {
  if (corpus.empty()) throw Error(ErrorCode::CorpusFormat, "corpus is empty");
  check_unique(corpus);
}

}  // namespace

DocumentRun run_document(const Document& doc, const PipelineContext& ctx,
                         const DocumentHistory* history) {
  return DocumentRunner(doc, ctx, history).run();
}

RunManifest run_all(std::span<const Document> corpus, const StageBackends& backends,
                    const RunConfig& cfg, PowerSampler sampler) {
  check_corpus(corpus);
  cfg.validate();
  ContentStore store(cfg.output_dir);
  EnergyLedger ledger;
  const PipelineContext ctx{backends, cfg, store, ledger, std::move(sampler)};
  auto runs = execute_documents(corpus, ctx, {});
  RunManifest m = assemble(make_run_id(), corpus, cfg, runs, ledger);
  write_manifest(m, manifest_path_for(cfg));
  return m;
}

RunManifest resume(const fs::path& manifest_path, std::span<const Document> corpus,
                   const StageBackends& backends, const RunConfig& cfg, PowerSampler sampler) {
  check_corpus(corpus);
  cfg.validate();
  const RunManifest previous = read_manifest(manifest_path);
  if (previous.corpus_hash != corpus_hash(corpus)) {
    throw Error(ErrorCode::ManifestStale, "corpus changed since run " + previous.run_id);
  }
  if (previous.config_hash != config_hash(cfg)) {
    throw Error(ErrorCode::ManifestStale, "configuration changed since run " + previous.run_id);
  }

  std::vector<DocumentHistory> history(corpus.size());
  std::vector<const DocumentHistory*> history_ptrs(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const auto& r : previous.stage_records) {
      if (r.party_id == corpus[i].party_id && r.source_kind == corpus[i].source_kind) {
        history[i].records.push_back(r);
      }
    }
    for (const auto& a : previous.artifacts) {
      if (a.party_id == corpus[i].party_id && a.source_kind == corpus[i].source_kind) {
        history[i].artifacts.push_back(a);
      }
    }
    history_ptrs[i] = &history[i];
  }

  ContentStore store(manifest_path.parent_path());
  EnergyLedger ledger;
  const PipelineContext ctx{backends, cfg, store, ledger, std::move(sampler)};
  auto runs = execute_documents(corpus, ctx, history_ptrs);
  RunManifest m = assemble(previous.run_id, corpus, cfg, runs, ledger);
  write_manifest(m, manifest_path);
  return m;
}

}  // namespace progviz
