#include "progviz/site.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "progviz/error.hpp"
#include "progviz/hash.hpp"
#include "progviz/parse.hpp"
#include "progviz/pipeline.hpp"
#include "progviz/store.hpp"

namespace progviz {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* const kRequiredKeys[] = {
    "site_title", "intro",         "nav_index",      "nav_about",      "nav_tech",
    "about_title", "about_body",   "tech_title",     "tech_body",      "disclaimer",
    "prev",       "next",          "source_program", "source_compass", "descriptors",
    "reasoning",  "violations",    "no_violations",  "status_failed",  "details",
    "stage",      "backend",       "model",          "prompt_version", "images",
};

}  // namespace

const LocaleStrings& default_locale_strings() {
  static const LocaleStrings strings = {
      {"de",
       {
           {"site_title", "Wahlprogramme als Stadtbilder"},
           {"intro", "Für jede Partei wurden Wahlprogramm und Antworten im Wahlkompass automatisch "
                     "zusammengefasst und in fünf visuelle Merkmale einer Stadt übersetzt."},
           {"nav_index", "Übersicht"},
           {"nav_about", "Projekt"},
           {"nav_tech", "Technik"},
           {"about_title", "Über das Projekt"},
           {"about_body", "Die Bilder zeigen, wie eine Stadt aussehen könnte, wenn sie nach den "
                          "Schwerpunkten eines Programms gestaltet würde."},
           {"tech_title", "Technischer Ablauf"},
           {"tech_body", "Übersetzen, Zusammenfassen, Ableiten der Merkmale, Rückübersetzen und "
                         "Bilderzeugung laufen als feste Abfolge über lokale Sprach- und Bildmodelle."},
           {"disclaimer", "Alle Texte und Bilder wurden maschinell erzeugt. Sie sind keine Aussagen "
                          "der Parteien und keine Wahlempfehlung."},
           {"prev", "Zurück"},
           {"next", "Weiter"},
           {"source_program", "Wahlprogramm"},
           {"source_compass", "Antworten im Wahlkompass"},
           {"descriptors", "Visuelle Merkmale"},
           {"reasoning", "Begründung"},
           {"violations", "Formatabweichungen"},
           {"no_violations", "keine"},
           {"status_failed", "Für diese Quelle liegt kein Ergebnis vor."},
           {"details", "Details"},
           {"stage", "Schritt"},
           {"backend", "Dienst"},
           {"model", "Modell"},
           {"prompt_version", "Prompt-Version"},
           {"images", "Bilder"},
       }},
      {"en",
       {
           {"site_title", "Party programs as city views"},
           {"intro", "For every party, the election program and the election compass answers were "
                     "summarized automatically and turned into five visual aspects of a city."},
           {"nav_index", "Overview"},
           {"nav_about", "Project"},
           {"nav_tech", "Technology"},
           {"about_title", "About the project"},
           {"about_body", "The images show how a city might look if it were shaped by the "
                          "priorities of one program."},
           {"tech_title", "How it works"},
           {"tech_body", "Translation, summarization, descriptor reasoning, back-translation and "
                         "image generation run as a fixed sequence over local language and image models."},
           {"disclaimer", "All texts and images were generated automatically. They are not statements "
                          "by the parties and not a voting recommendation."},
           {"prev", "Previous"},
           {"next", "Next"},
           {"source_program", "Election program"},
           {"source_compass", "Election compass answers"},
           {"descriptors", "Visual aspects"},
           {"reasoning", "Reasoning"},
           {"violations", "Format deviations"},
           {"no_violations", "none"},
           {"status_failed", "No result is available for this source."},
           {"details", "Details"},
           {"stage", "Step"},
           {"backend", "Backend"},
           {"model", "Model"},
           {"prompt_version", "Prompt version"},
           {"images", "Images"},
       }},
  };
  return strings;
}

LocaleStrings locale_strings_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "locale strings must be an object");
  LocaleStrings out;
  for (const auto& [locale, table] : doc.items()) {
    if (!table.is_object()) throw Error(ErrorCode::InvalidConfig, "locale '" + locale + "' is not an object");
    for (const auto& [key, text] : table.items()) {
      if (!text.is_string()) {
        throw Error(ErrorCode::InvalidConfig, "locale '" + locale + "' key '" + key + "' is not a string");
      }
      out[locale][key] = text.get<std::string>();
    }
  }
  return out;
}

LocaleStrings load_locale_strings(const fs::path& path) {
  try {
    return locale_strings_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

void check_locale_strings(const LocaleStrings& strings) {
  for (const char* locale : kSiteLocales) {
    if (!strings.count(locale)) throw Error(ErrorCode::LocaleGap, std::string("locale '") + locale + "' missing");
  }
  const auto& de = strings.at("de");
  const auto& en = strings.at("en");
  for (const auto& [key, _] : de) {
    if (!en.count(key)) throw Error(ErrorCode::LocaleGap, "key '" + key + "' missing in locale 'en'");
  }
  for (const auto& [key, _] : en) {
    if (!de.count(key)) throw Error(ErrorCode::LocaleGap, "key '" + key + "' missing in locale 'de'");
  }
  for (const char* key : kRequiredKeys) {
    if (!de.count(key)) throw Error(ErrorCode::LocaleGap, std::string("required key '") + key + "' missing");
  }
  for (const char* locale : kSiteLocales) {
    const auto& text = strings.at(locale).at("disclaimer");
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error(ErrorCode::LocaleGap, std::string("disclaimer is empty in locale '") + locale + "'");
    }
  }
}

namespace {

struct ImageAsset {
  int variant = 0;
  std::string asset;  // bundle-relative
  const ArtifactEntry* source = nullptr;
};

struct Entry {
  const DocumentEntry* doc = nullptr;
  bool ok = false;
  std::vector<std::string> descriptors_en;
  std::vector<std::string> descriptors_de;
  std::string reasoning_en;
  std::string reasoning_de;
  std::vector<Violation> violations;
  std::vector<ImageAsset> images;
};

std::string read_checked(const fs::path& manifest_dir, const ArtifactEntry& a) {
  const fs::path path = manifest_dir / a.path;
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::MissingArtifact, path.string());
  std::string bytes = read_file(path);
  if (sha256_hex(bytes) != a.hash) {
    throw Error(ErrorCode::MissingArtifact, path.string() + " does not match its recorded hash");
  }
  return bytes;
}

const ArtifactEntry& single_artifact(const RunManifest& m, const DocumentEntry& d, ArtifactKind kind) {
  const auto found = m.artifacts_for(d.party_id, d.source_kind, kind);
  if (found.empty()) {
    throw Error(ErrorCode::MissingArtifact, "no " + std::string(to_string(kind)) + " artifact for " +
                                                d.party_id + "/" + std::string(to_string(d.source_kind)));
  }
  return *found.front();
}

std::vector<Entry> collect_entries(const RunManifest& m, const fs::path& manifest_dir) {
  std::vector<Entry> entries;
  for (const auto& d : m.documents) {
    Entry e;
    e.doc = &d;
    const auto records = m.records_for(d.party_id, d.source_kind);
    e.ok = !records.empty() && std::all_of(records.begin(), records.end(), [](const StageRecord* r) {
      return r->status == StageStatus::Ok;
    });
    if (e.ok) {
      const auto reasoning = reasoning_from_json(
          json::parse(read_checked(manifest_dir, single_artifact(m, d, ArtifactKind::Reasoning))));
      const auto german = german_translation_from_json(
          json::parse(read_checked(manifest_dir, single_artifact(m, d, ArtifactKind::TranslationDe))));
      e.descriptors_en = german.descriptors_en;
      e.descriptors_de = german.descriptors_de;
      e.reasoning_de = german.reasoning_de;
      e.reasoning_en = reasoning.raw.think_block.value_or("");
      e.violations = reasoning.descriptors.violations;
      for (const ArtifactEntry* a : m.artifacts_for(d.party_id, d.source_kind, ArtifactKind::Image)) {
        const int v = a->variant.value_or(0);
        e.images.push_back({v,
                            "assets/" + d.party_id + "-" + std::string(to_string(d.source_kind)) + "-" +
                                std::to_string(v) + ".png",
                            a});
      }
      if (e.images.empty()) {
        throw Error(ErrorCode::MissingArtifact,
                    "no image artifacts for " + d.party_id + "/" + std::string(to_string(d.source_kind)));
      }
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

json tally_json(const std::vector<Violation>& violations) {
  json out = json::object();
  for (auto kind : kAllViolationKinds) {
    out[std::string(to_string(kind))] =
        std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
  }
  return out;
}

json data_json(const std::vector<Entry>& entries) {
  json list = json::array();
  for (const auto& e : entries) {
    json images = json::array();
    for (const auto& img : e.images) images.push_back(img.asset);
    list.push_back({
        {"party_id", e.doc->party_id},
        {"party_name", e.doc->party_name},
        {"source_kind", to_string(e.doc->source_kind)},
        {"status", e.ok ? "ok" : "failed"},
        {"descriptors_en", e.descriptors_en},
        {"descriptors_de", e.descriptors_de},
        {"reasoning_de", e.reasoning_de},
        {"violations", tally_json(e.violations)},
        {"images", images},
    });
  }
  return {{"schema_version", 1}, {"entries", list}};
}

std::string esc(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

class PageWriter {
 public:
  explicit PageWriter(const LocaleStrings& s) : s_(s) {}

  const std::string& t(const std::string& locale, const std::string& key) const { return s_.at(locale).at(key); }

  // "<span lang=de>..</span> / <span lang=en>..</span>"
  std::string both(const std::string& key) const {
    return "<span lang=\"de\">" + esc(t("de", key)) + "</span> / <span lang=\"en\">" + esc(t("en", key)) +
           "</span>";
  }

  std::string source_key(SourceKind k) const {
    return k == SourceKind::Program ? "source_program" : "source_compass";
  }

  std::string page(const std::string& root, const std::string& title_key, const std::string& title,
                   const std::string& body) const {
    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html lang=\"de\">\n<head>\n<meta charset=\"utf-8\">\n"
        << "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n"
        << "<title>" << esc(title.empty() ? t("de", title_key) + " / " + t("en", title_key) : title)
        << "</title>\n<link rel=\"stylesheet\" href=\"" << root << "style.css\">\n</head>\n<body>\n"
        << "<header>\n<nav class=\"site\">\n"
        << "<a href=\"" << root << "index.html\">" << both("nav_index") << "</a>\n"
        << "<a href=\"" << root << "about.html\">" << both("nav_about") << "</a>\n"
        << "<a href=\"" << root << "tech.html\">" << both("nav_tech") << "</a>\n"
        << "</nav>\n</header>\n<main>\n"
        << body << "</main>\n"
        << "<aside class=\"disclaimer\" id=\"disclaimer\">\n"
        << "<p lang=\"de\">" << esc(t("de", "disclaimer")) << "</p>\n"
        << "<p lang=\"en\">" << esc(t("en", "disclaimer")) << "</p>\n"
        << "</aside>\n</body>\n</html>\n";
    return out.str();
  }

  std::string violation_text(const std::string& locale, const std::vector<Violation>& violations) const {
    if (violations.empty()) return t(locale, "no_violations");
    std::vector<std::string> parts;
    for (const auto& v : violations) {
      std::string p(to_string(v.kind));
      if (v.item_index) p += " #" + std::to_string(*v.item_index + 1);
      parts.push_back(p);
    }
    return join(parts, ", ");
  }

  std::string figure(const Entry& e, const ImageAsset& img, const std::string& root, bool link_party) const {
    const auto& d = *e.doc;
    std::ostringstream out;
    out << "<figure class=\"variant\" data-party=\"" << esc(d.party_id) << "\" data-source=\""
        << to_string(d.source_kind) << "\" data-variant=\"" << img.variant << "\" data-descriptors-en=\""
        << esc(join(e.descriptors_en, "; ")) << "\" data-descriptors-de=\"" << esc(join(e.descriptors_de, "; "))
        << "\" data-violations=\"" << esc(violation_text("en", e.violations)) << "\">\n";
    if (link_party) out << "<a href=\"" << root << "party/" << esc(d.party_id) << ".html\">";
    out << "<img src=\"" << root << img.asset << "\" alt=\"" << esc(d.party_name) << ", "
        << esc(t("en", source_key(d.source_kind))) << ", " << img.variant + 1 << "\">";
    if (link_party) out << "</a>";
    out << "\n<figcaption>" << esc(d.party_name) << ", " << both(source_key(d.source_kind)) << ", "
        << img.variant + 1 << "\n<details><summary>" << both("details") << "</summary>\n";
    for (const char* locale : kSiteLocales) {
      const auto& list = std::string(locale) == "de" ? e.descriptors_de : e.descriptors_en;
      out << "<div lang=\"" << locale << "\"><ul>";
      for (const auto& item : list) out << "<li>" << esc(item) << "</li>";
      out << "</ul><p>" << esc(t(locale, "violations")) << ": " << esc(violation_text(locale, e.violations))
          << "</p></div>\n";
    }
    out << "</details>\n</figcaption>\n</figure>\n";
    return out.str();
  }

 private:
  const LocaleStrings& s_;
};

void prepare_out_dir(const fs::path& out_dir) {
  std::error_code ec;
  if (fs::exists(out_dir)) {
    if (!fs::is_directory(out_dir)) {
      throw Error(ErrorCode::InvalidConfig, out_dir.string() + " is not a directory");
    }
    const bool empty = fs::is_empty(out_dir);
    const bool previous = fs::exists(out_dir / "index.html") && fs::exists(out_dir / "data.json");
    if (!empty && !previous) {
      throw Error(ErrorCode::InvalidConfig, out_dir.string() + " is not empty and holds no site bundle");
    }
    for (const auto& child : fs::directory_iterator(out_dir)) fs::remove_all(child.path(), ec);
  }
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::PipelineAborted, "cannot create " + out_dir.string());
}

const char* const kStyle =
    "body{font-family:sans-serif;margin:0 auto;max-width:72rem;padding:1rem}\n"
    "nav a{margin-right:1rem}\n"
    ".grid{display:grid;grid-template-columns:repeat(auto-fill,minmax(12rem,1fr));gap:1rem}\n"
    "figure{margin:0}\nfigure img{width:100%;height:auto}\n"
    ".disclaimer{border-top:1px solid #999;margin-top:2rem;padding-top:1rem;font-size:.9rem}\n";

}  // namespace

json emit_data_file(const RunManifest& manifest, const fs::path& manifest_dir) {
  RunManifest sorted = manifest;
  canonicalize(sorted);
  return data_json(collect_entries(sorted, manifest_dir));
}

SiteBundle emit_site(const RunManifest& manifest, const fs::path& manifest_dir, const LocaleStrings& strings,
                     const fs::path& out_dir, SiteOptions options) {
  check_locale_strings(strings);
  RunManifest m = manifest;
  canonicalize(m);

  for (const auto& d : m.documents) {
    const auto records = m.records_for(d.party_id, d.source_kind);
    const bool done = std::any_of(records.begin(), records.end(), [](const StageRecord* r) {
      return r->stage == StageKind::ImageGen && r->status == StageStatus::Ok;
    });
    if (!done && !options.allow_incomplete) {
      throw Error(ErrorCode::IncompleteManifest,
                  d.party_id + "/" + std::string(to_string(d.source_kind)) + " has no finished images");
    }
  }
  const std::vector<Entry> entries = collect_entries(m, manifest_dir);

  // Read every asset before touching out_dir so a failure leaves it intact.
  std::map<std::string, std::string> assets;
  for (const auto& e : entries) {
    for (const auto& img : e.images) assets[img.asset] = read_checked(manifest_dir, *img.source);
  }

  prepare_out_dir(out_dir);
  SiteBundle bundle;
  bundle.root = out_dir;
  auto write = [&](const std::string& rel, std::string_view bytes) { write_file_atomic(out_dir / rel, bytes); };

  for (const auto& [rel, bytes] : assets) {
    write(rel, bytes);
    bundle.assets.push_back(rel);
  }
  write(bundle.data_file, data_json(entries).dump(2) + "\n");
  for (const char* locale : kSiteLocales) {
    json table(strings.at(locale));
    const std::string rel = std::string("locales/") + locale + ".json";
    write(rel, table.dump(2) + "\n");
    bundle.locale_files.push_back(rel);
  }
  write("style.css", kStyle);

  PageWriter pw(strings);
  auto add_page = [&](const std::string& rel, const std::string& html) {
    write(rel, html);
    bundle.pages.push_back(rel);
  };

  // Parties in canonical order; each party page shows both sources.
  std::vector<std::string> parties;
  for (const auto& e : entries) {
    if (parties.empty() || parties.back() != e.doc->party_id) parties.push_back(e.doc->party_id);
  }

  {
    std::ostringstream body;
    body << "<h1>" << pw.both("site_title") << "</h1>\n";
    for (const char* locale : kSiteLocales) {
      body << "<p lang=\"" << locale << "\">" << esc(pw.t(locale, "intro")) << "</p>\n";
    }
    body << "<section class=\"grid\">\n";
    for (const auto& e : entries) {
      for (const auto& img : e.images) body << pw.figure(e, img, "", true);
    }
    body << "</section>\n<nav class=\"parties\"><ul>\n";
    for (const auto& p : parties) {
      const auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) { return e.doc->party_id == p; });
      body << "<li><a href=\"party/" << esc(p) << ".html\">" << esc(it->doc->party_name) << "</a></li>\n";
    }
    body << "</ul></nav>\n";
    add_page("index.html", pw.page("", "site_title", "", body.str()));
  }

  for (std::size_t i = 0; i < parties.size(); ++i) {
    const std::string& p = parties[i];
    std::ostringstream body;
    std::string party_name;
    for (const auto& e : entries) {
      if (e.doc->party_id != p) continue;
      party_name = e.doc->party_name;
    }
    body << "<h1>" << esc(party_name) << "</h1>\n";
    for (const auto& e : entries) {
      if (e.doc->party_id != p) continue;
      body << "<section class=\"source\" id=\"" << to_string(e.doc->source_kind) << "\">\n<h2>"
           << pw.both(pw.source_key(e.doc->source_kind)) << "</h2>\n";
      if (!e.ok) {
        body << "<p class=\"failed\">" << pw.both("status_failed") << "</p>\n</section>\n";
        continue;
      }
      body << "<div class=\"grid\">\n";
      for (const auto& img : e.images) body << pw.figure(e, img, "../", false);
      body << "</div>\n";
      for (const char* locale : kSiteLocales) {
        const bool de = std::string(locale) == "de";
        body << "<div lang=\"" << locale << "\">\n<h3>" << esc(pw.t(locale, "descriptors")) << "</h3>\n<ol>\n";
        for (const auto& item : de ? e.descriptors_de : e.descriptors_en) body << "<li>" << esc(item) << "</li>\n";
        body << "</ol>\n";
        const std::string& reasoning = de ? e.reasoning_de : e.reasoning_en;
        if (!reasoning.empty()) {
          body << "<h3>" << esc(pw.t(locale, "reasoning")) << "</h3>\n<p>" << esc(reasoning) << "</p>\n";
        }
        body << "<p>" << esc(pw.t(locale, "violations")) << ": " << esc(pw.violation_text(locale, e.violations))
             << "</p>\n</div>\n";
      }
      body << "</section>\n";
    }
    body << "<nav class=\"pager\">\n";
    if (i > 0) body << "<a rel=\"prev\" href=\"" << esc(parties[i - 1]) << ".html\">" << pw.both("prev") << "</a>\n";
    if (i + 1 < parties.size()) {
      body << "<a rel=\"next\" href=\"" << esc(parties[i + 1]) << ".html\">" << pw.both("next") << "</a>\n";
    }
    body << "</nav>\n";
    add_page("party/" + p + ".html", pw.page("../", "site_title", party_name, body.str()));
  }

  {
    std::ostringstream body;
    body << "<h1>" << pw.both("about_title") << "</h1>\n";
    for (const char* locale : kSiteLocales) {
      body << "<p lang=\"" << locale << "\">" << esc(pw.t(locale, "about_body")) << "</p>\n";
    }
    add_page("about.html", pw.page("", "about_title", "", body.str()));
  }

  {
    std::ostringstream body;
    body << "<h1>" << pw.both("tech_title") << "</h1>\n";
    for (const char* locale : kSiteLocales) {
      body << "<p lang=\"" << locale << "\">" << esc(pw.t(locale, "tech_body")) << "</p>\n";
    }
    body << "<table>\n<tr><th>" << pw.both("stage") << "</th><th>" << pw.both("backend") << "</th><th>"
         << pw.both("model") << "</th><th>" << pw.both("prompt_version") << "</th></tr>\n";
    for (auto stage : kAllStages) {
      std::set<std::tuple<std::string, std::string, int>> seen;
      for (const auto& r : m.stage_records) {
        if (r.stage == stage) seen.insert({r.backend_name, r.model_id, r.prompt_version});
      }
      for (const auto& [backend, model, version] : seen) {
        body << "<tr><td>" << esc(stage_label(stage)) << "</td><td>" << esc(backend) << "</td><td>" << esc(model)
             << "</td><td>" << version << "</td></tr>\n";
      }
    }
    body << "</table>\n";
    add_page("tech.html", pw.page("", "tech_title", "", body.str()));
  }

  std::sort(bundle.pages.begin(), bundle.pages.end());
  return bundle;
}

std::string hash_directory(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    files.emplace_back(fs::relative(entry.path(), dir).generic_string(), sha256_hex(read_file(entry.path())));
  }
  std::sort(files.begin(), files.end());
  std::string listing;
  for (const auto& [rel, hash] : files) listing += rel + '\t' + hash + '\n';
  return sha256_hex(listing);
}

}  // namespace progviz
