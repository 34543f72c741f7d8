#include "progviz/cli.hpp"

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "progviz/config.hpp"
#include "progviz/error.hpp"
#include "progviz/manifest.hpp"
#include "progviz/pipeline.hpp"
#include "progviz/prompts.hpp"
#include "progviz/site.hpp"
#include "progviz/telemetry.hpp"

namespace progviz::cli {

namespace fs = std::filesystem;

int cmd_validate(const fs::path& corpus, std::size_t chunk_size, std::ostream& out, std::ostream& err) {
  if (chunk_size == 0) {
    err << to_string(ErrorCode::InvalidChunkSize) << ": chunk size must be positive\n";
    return kFailed;
  }
  CorpusDescriptor descriptor;
  try {
    descriptor = read_corpus_descriptor(corpus);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kFailed;
  }

  int failures = 0;
  std::map<std::pair<std::string, SourceKind>, int> seen;
  out << "party\tsource\tsentences\tchunks\n";
  for (const auto& party : descriptor.parties) {
    const std::pair<SourceKind, fs::path> sources[] = {{SourceKind::Program, party.program_path},
                                                       {SourceKind::CompassResponses, party.compass_path}};
    for (const auto& [kind, path] : sources) {
      if (path.empty()) continue;
      if (seen[{party.party_id, kind}]++) {
        err << party.party_id << "/" << to_string(kind) << ": " << to_string(ErrorCode::DuplicateDocument) << "\n";
        ++failures;
        continue;
      }
      try {
        const Document doc = load_document(descriptor.base_dir / path, party.party_id, kind, party.name);
        const auto spans = segment_sentences(doc);
        const auto chunks = chunk_sentences(spans, chunk_size);
        out << party.party_id << '\t' << to_string(kind) << '\t' << spans.size() << '\t' << chunks.size()
            << (chunks.size() == 1 ? " chunk" : " chunks") << '\n';
      } catch (const Error& e) {
        err << party.party_id << "/" << to_string(kind) << ": " << e.what() << "\n";
        ++failures;
      }
    }
  }
  if (failures) {
    err << failures << " document(s) failed to load\n";
    return kFailed;
  }
  return kOk;
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::vector<Document> corpus;
  try {
    cfg = load_run_config(options.config);
    if (options.strict) cfg.strict_mode = true;
    if (options.out_dir) cfg.output_dir = *options.out_dir;
    cfg.validate();
    corpus = load_corpus(read_corpus_descriptor(cfg.corpus_path));
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kConfigError;
  }

  RunManifest manifest;
  std::size_t calls = 0;
  try {
    const StageBackends backends = make_backends(cfg, options.mock);
    const fs::path manifest_path = manifest_path_for(cfg);
    bool resumed = false;
    if (options.resume && fs::exists(manifest_path)) {
      try {
        manifest = resume(manifest_path, corpus, backends, cfg);
        resumed = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ManifestStale && e.code() != ErrorCode::ManifestCorrupt) throw;
        err << "warning: " << e.what() << "; starting a fresh run\n";
      }
    }
    if (!resumed) manifest = run_all(corpus, backends, cfg);
    calls = backends.total_calls();
    out << "manifest: " << manifest_path.string() << "\n";
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::DuplicateDocument ||
                   e.code() == ErrorCode::CorpusFormat || e.code() == ErrorCode::FileNotFound
               ? kConfigError
               : kFailed;
  }

  if (!manifest.energy.empty()) out << format_report(build_report(manifest.energy, manifest.emissions));
  out << "images: " << manifest.image_count() << "\n";
  out << "backend calls: " << calls << "\n";

  int failed = 0;
  for (const auto& r : manifest.stage_records) {
    if (r.status != StageStatus::Failed) continue;
    ++failed;
    err << r.party_id << "/" << to_string(r.source_kind) << " " << to_string(r.stage) << ": " << r.error << "\n";
  }
  return failed ? kFailed : kOk;
}

int cmd_report(const fs::path& manifest_path, std::optional<double> correction, std::ostream& out,
               std::ostream& err) {
  try {
    const RunManifest manifest = read_manifest(manifest_path);
    EmissionsConfig cfg = manifest.emissions;
    if (correction) cfg.underestimation_correction = *correction;
    cfg.validate();
    out << format_report(build_report(manifest.energy, cfg));
    return kOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kConfigError;
  }
}

int cmd_prompts_show(std::ostream& out) {
  for (const auto& t : all_prompt_templates()) {
    out << "== " << to_string(t.stage) << " (v" << t.version << ") ==\n" << t.template_text << "\n\n";
  }
  return kOk;
}

int cmd_site(const SiteCommandOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const RunManifest manifest = read_manifest(options.manifest);
    const LocaleStrings strings = options.strings ? load_locale_strings(*options.strings) : default_locale_strings();
    const SiteBundle bundle = emit_site(manifest, options.manifest.parent_path(), strings, options.out_dir,
                                        {options.allow_incomplete});
    out << "site: " << bundle.pages.size() << " pages, " << bundle.assets.size() << " images -> "
        << bundle.root.string() << "\n";
    out << "bundle hash: " << hash_directory(bundle.root) << "\n";
    return kOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kFailed;
  }
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Turns party programs into city image descriptors and images."};
  app.require_subcommand(1);

  fs::path corpus;
  std::size_t chunk_size = kDefaultChunkSize;
  auto* validate = app.add_subcommand("validate", "Load, segment and chunk every document of a corpus");
  validate->add_option("corpus", corpus, "Corpus descriptor (INI)")->required();
  validate->add_option("--chunk-size", chunk_size, "Sentences per chunk");

  RunOptions run_opts;
  fs::path run_out;
  auto* run = app.add_subcommand("run", "Run the pipeline and write a manifest");
  run->add_option("--config", run_opts.config, "Run configuration (JSON)")->required();
  run->add_flag("--mock", run_opts.mock, "Use scripted mock backends, no network");
  run->add_flag("--resume", run_opts.resume, "Reuse finished stages from an existing manifest");
  run->add_flag("--strict", run_opts.strict, "Treat any descriptor violation as a failure");
  auto* run_out_opt = run->add_option("--out", run_out, "Output directory");

  fs::path report_manifest;
  std::optional<double> correction;
  auto* report = app.add_subcommand("report", "Print the energy and emissions table of a manifest");
  report->add_option("--manifest", report_manifest, "Manifest path")->required();
  report->add_option("--correction", correction, "Multiplier applied to emissions (1.0 to 1.3)");

  auto* prompts = app.add_subcommand("prompts", "Prompt templates");
  prompts->require_subcommand(1);
  auto* show = prompts->add_subcommand("show", "Print every prompt template");

  SiteCommandOptions site_opts;
  fs::path strings_path;
  auto* site = app.add_subcommand("site", "Emit the static site bundle");
  site->add_option("--manifest", site_opts.manifest, "Manifest path")->required();
  site->add_option("--out", site_opts.out_dir, "Bundle directory")->required();
  auto* strings_opt = site->add_option("--strings", strings_path, "Locale strings (JSON)");
  site->add_flag("--allow-incomplete", site_opts.allow_incomplete, "Include failed documents as failed entries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  if (*validate) return cmd_validate(corpus, chunk_size, out, err);
  if (*run) {
    if (*run_out_opt) run_opts.out_dir = run_out;
    return cmd_run(run_opts, out, err);
  }
  if (*report) return cmd_report(report_manifest, correction, out, err);
  if (*show) return cmd_prompts_show(out);
  if (*site) {
    if (*strings_opt) site_opts.strings = strings_path;
    return cmd_site(site_opts, out, err);
  }
  return kConfigError;
}

}  // namespace progviz::cli
