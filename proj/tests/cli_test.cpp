#include <doctest.h>

#include <fstream>
#include <sstream>

#include "progviz/cli.hpp"
#include "progviz/manifest.hpp"
#include "progviz/store.hpp"
#include "support.hpp"

using namespace progviz;
using testing::kFixtures;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "progviz");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, std::string_view text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("validate") {
  TempDir tmp;
  std::string body;
  for (int i = 0; i < 25; ++i) body += "Satz Nummer " + std::to_string(i) + " ist hier. ";
  write(tmp / "a.txt", body);
  write(tmp / "b.txt", "Nur ein Satz.");
  write(tmp / "corpus.ini", "[x]\nprogram = a.txt\ncompass = b.txt\n");
  auto r = run_cli({"validate", (tmp / "corpus.ini").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("x\tprogram\t25\t3 chunks") != std::string::npos);
  CHECK(r.out.find("x\tcompass\t1\t1 chunk") != std::string::npos);

  write(tmp / "broken.ini", "[x]\nprogram = a.txt\ncompass = missing.txt\n");
  r = run_cli({"validate", (tmp / "broken.ini").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("missing.txt") != std::string::npos);

  CHECK(run_cli({"validate", (kFixtures / "corpus/corpus.ini").string()}).code == 0);
}

TEST_CASE("run, resume, report and site") {
  TempDir tmp;
  const auto out = tmp / "out";
  auto r = run_cli({"run", "--config", (kFixtures / "mock_config.json").string(), "--mock", "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("images: 80") != std::string::npos);
  CHECK(r.out.find("Total") != std::string::npos);
  CHECK(fs::exists(out / "manifest.json"));

  r = run_cli({"run", "--config", (kFixtures / "mock_config.json").string(), "--mock", "--resume", "--out",
               out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("backend calls: 0") != std::string::npos);

  r = run_cli({"report", "--manifest", (out / "manifest.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("Generate Images") != std::string::npos);

  const auto site = tmp / "site";
  r = run_cli({"site", "--manifest", (out / "manifest.json").string(), "--out", site.string()});
  CHECK(r.code == 0);
  const auto hash_line = r.out.substr(r.out.find("bundle hash:"));
  r = run_cli({"site", "--manifest", (out / "manifest.json").string(), "--out", site.string()});
  CHECK(r.out.substr(r.out.find("bundle hash:")) == hash_line);

  const auto m = read_manifest(out / "manifest.json");
  fs::remove(out / m.artifacts_for("zukunft", SourceKind::Program, ArtifactKind::Image).back()->path);
  r = run_cli({"site", "--manifest", (out / "manifest.json").string(), "--out", (tmp / "site2").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("MissingArtifact") != std::string::npos);
}

TEST_CASE("run exit codes") {
  TempDir tmp;
  auto r = run_cli({"run", "--config", (kFixtures / "mock_config_failing.json").string(), "--mock", "--out",
                    (tmp / "out").string()});
  CHECK(r.code == 1);
  CHECK(fs::exists(tmp / "out/manifest.json"));
  CHECK(r.err.find("spd/compass reason") != std::string::npos);

  r = run_cli({"run", "--config", (tmp / "nope.json").string(), "--mock"});
  CHECK(r.code == 2);
  write(tmp / "bad.json", "{\"corpus\": \"x.ini\"}");
  CHECK(run_cli({"run", "--config", (tmp / "bad.json").string(), "--mock"}).code == 2);
  CHECK(run_cli({"run", "--mock"}).code == 2);
}

TEST_CASE("report on the reference ledger") {
  TempDir tmp;
  EnergyLedger ledger;
  const std::pair<double, double> pairs[] = {{132.06, 322.58}, {5.04, 238.10}, {360.24, 234.84}, {18.96, 316.46},
                                             {22.45, 320.71}};
  for (std::size_t i = 0; i < 5; ++i) ledger.record_stage(kAllStages[i], pairs[i].first, pairs[i].second, {});
  const auto report = render_report(ledger, {}).report;
  RunManifest m;
  m.run_id = "r";
  m.energy = report.rows;
  m.totals = report.total;
  write_manifest(m, tmp / "manifest.json");

  auto r = run_cli({"report", "--manifest", (tmp / "manifest.json").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("538.75 min") != std::string::npos);
  CHECK(r.out.find("0.90 kg") != std::string::npos);

  r = run_cli({"report", "--manifest", (tmp / "manifest.json").string(), "--correction", "1.25"});
  CHECK(r.code == 0);
  CHECK(r.out.find("1.12 kg") != std::string::npos);

  CHECK(run_cli({"report", "--manifest", (tmp / "manifest.json").string(), "--correction", "2"}).code == 2);
  write(tmp / "corrupt.json", "{");
  CHECK(run_cli({"report", "--manifest", (tmp / "corrupt.json").string()}).code == 2);
  CHECK(run_cli({"report", "--manifest", (tmp / "absent.json").string()}).code == 2);
}

TEST_CASE("prompts show") {
  const auto r = run_cli({"prompts", "show"});
  CHECK(r.code == 0);
  CHECK(r.out.find("Identify five important visual aspects") != std::string::npos);
  CHECK(r.out.find("{city} city, with additional {descriptors}") != std::string::npos);
}
