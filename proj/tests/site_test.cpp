#include <doctest.h>

#include <regex>
#include <set>

#include "progviz/error.hpp"
#include "progviz/pipeline.hpp"
#include "progviz/site.hpp"
#include "support.hpp"

using namespace progviz;
using testing::kFixtures;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

// Runs the mock pipeline over the given parties (all when empty).
RunManifest mock_run(const fs::path& out, const std::set<std::string>& parties = {},
                     const std::string& config = "mock_config.json") {
  const auto cfg = testing::mock_config(out, config);
  auto corpus = load_corpus(read_corpus_descriptor(kFixtures / "corpus/corpus.ini"));
  if (!parties.empty()) {
    std::erase_if(corpus, [&](const Document& d) { return !parties.count(d.party_id); });
  }
  return run_all(corpus, make_backends(cfg, true), cfg);
}

std::vector<fs::path> pages_of(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().extension() == ".html") out.push_back(e.path());
  }
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::FileNotFound;
}

}  // namespace

TEST_CASE("two-party bundle structure") {
  TempDir run, site;
  const auto m = mock_run(run.path(), {"cdu", "spd"});
  const auto bundle = emit_site(m, run.path(), default_locale_strings(), site.path());
  CHECK(bundle.assets.size() == 20);
  CHECK(bundle.pages == std::vector<std::string>{"about.html", "index.html", "party/cdu.html", "party/spd.html",
                                                 "tech.html"});
  CHECK(fs::exists(site / "locales/de.json"));
  CHECK(fs::exists(site / "locales/en.json"));
  const auto data = nlohmann::json::parse(read_file(site / "data.json"));
  CHECK(data["entries"].size() == 4);

  const auto cdu = read_file(site / "party/cdu.html");
  CHECK(cdu.find("rel=\"next\" href=\"spd.html\"") != std::string::npos);
  CHECK(cdu.find("rel=\"prev\"") == std::string::npos);
  CHECK(cdu.find("DE Revitalized City Center") != std::string::npos);
  CHECK(cdu.find("WordCountOutOfRange") != std::string::npos);
  const auto index = read_file(site / "index.html");
  CHECK(index.find("data-descriptors-en=\"Revitalized City Center; Lively Public Squares") != std::string::npos);
}

TEST_CASE("bundle invariants: disclaimer, links, locales, determinism") {
  TempDir run, site, again;
  const auto m = mock_run(run.path());
  emit_site(m, run.path(), default_locale_strings(), site.path());

  const std::regex src_re("src=\"([^\"]+)\"");
  std::set<std::string> referenced;
  for (const auto& page : pages_of(site.path())) {
    const auto html = read_file(page);
    CHECK(html.find("id=\"disclaimer\"") != std::string::npos);
    for (std::sregex_iterator it(html.begin(), html.end(), src_re), end; it != end; ++it) {
      const fs::path target = (page.parent_path() / (*it)[1].str()).lexically_normal();
      CHECK(fs::exists(target));
      referenced.insert(fs::relative(target, site.path()).generic_string());
    }
  }
  std::set<std::string> assets;
  for (const auto& e : fs::directory_iterator(site / "assets")) {
    assets.insert(fs::relative(e.path(), site.path()).generic_string());
  }
  CHECK(referenced == assets);
  CHECK(assets.size() == 80);

  const auto de = nlohmann::json::parse(read_file(site / "locales/de.json"));
  const auto en = nlohmann::json::parse(read_file(site / "locales/en.json"));
  std::set<std::string> de_keys, en_keys;
  for (const auto& [k, _] : de.items()) de_keys.insert(k);
  for (const auto& [k, _] : en.items()) en_keys.insert(k);
  CHECK(de_keys == en_keys);

  const auto first = hash_directory(site.path());
  emit_site(m, run.path(), default_locale_strings(), site.path());
  CHECK(hash_directory(site.path()) == first);
  emit_site(read_manifest(run / "manifest.json"), run.path(), default_locale_strings(), again.path());
  CHECK(hash_directory(again.path()) == first);

  const auto data = nlohmann::json::parse(read_file(site / "data.json"));
  CHECK(data["entries"].size() == 16);
}

TEST_CASE("integrity and locale errors") {
  TempDir run, site;
  const auto m = mock_run(run.path(), {"cdu"});

  auto gap = default_locale_strings();
  gap["en"].erase("next");
  CHECK(code_of([&] { emit_site(m, run.path(), gap, site.path()); }) == ErrorCode::LocaleGap);
  auto blank = default_locale_strings();
  blank["de"]["disclaimer"] = "  ";
  CHECK(code_of([&] { emit_site(m, run.path(), blank, site.path()); }) == ErrorCode::LocaleGap);
  auto extra = default_locale_strings();
  extra["de"]["only_german"] = "x";
  CHECK(code_of([&] { emit_site(m, run.path(), extra, site.path()); }) == ErrorCode::LocaleGap);

  const auto image = m.artifacts_for("cdu", SourceKind::Program, ArtifactKind::Image).front();
  fs::remove(run / image->path);
  try {
    emit_site(m, run.path(), default_locale_strings(), site.path());
    FAIL("expected MissingArtifact");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingArtifact);
    CHECK(std::string(e.what()).find(image->path) != std::string::npos);
  }
}

TEST_CASE("failed documents need the incomplete flag") {
  TempDir run, site;
  const auto m = mock_run(run.path(), {"spd"}, "mock_config_failing.json");
  CHECK(code_of([&] { emit_site(m, run.path(), default_locale_strings(), site.path()); }) ==
        ErrorCode::IncompleteManifest);
  const auto bundle = emit_site(m, run.path(), default_locale_strings(), site.path(), {true});
  CHECK(bundle.assets.size() == 5);
  const auto data = emit_data_file(m, run.path());
  REQUIRE(data["entries"].size() == 2);
  const auto& failed = data["entries"][0]["source_kind"] == "compass" ? data["entries"][0] : data["entries"][1];
  CHECK(failed["status"] == "failed");
  CHECK(failed["images"].empty());
  const auto page = read_file(site / "party/spd.html");
  CHECK(page.find("No result is available for this source.") != std::string::npos);
  CHECK(page.find("status_failed") == std::string::npos);
}

TEST_CASE("out_dir guard") {
  TempDir run, site;
  const auto m = mock_run(run.path(), {"cdu"});
  write_file_atomic(site / "precious.txt", "keep me");
  CHECK_THROWS_AS(emit_site(m, run.path(), default_locale_strings(), site.path()), Error);
  CHECK(fs::exists(site / "precious.txt"));
}

TEST_CASE("locale strings from json") {
  const auto s = locale_strings_from_json(nlohmann::json{{"de", {{"a", "x"}}}, {"en", {{"a", "y"}}}});
  CHECK(s.at("en").at("a") == "y");
  CHECK_THROWS_AS(locale_strings_from_json(nlohmann::json{{"de", {{"a", 1}}}}), Error);
  CHECK_NOTHROW(check_locale_strings(default_locale_strings()));
}
