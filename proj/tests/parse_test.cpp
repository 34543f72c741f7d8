#include <doctest.h>

#include <random>

#include <json.hpp>

#include "progviz/error.hpp"
#include "progviz/parse.hpp"
#include "progviz/store.hpp"
#include "support.hpp"

using namespace progviz;

namespace {

std::vector<std::size_t> word_flags(const DescriptorSet& set) {
  std::vector<std::size_t> out;
  for (const auto& v : set.violations) {
    if (v.kind == ViolationKind::WordCountOutOfRange) out.push_back(*v.item_index);
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

TEST_CASE("extract_think_block") {
  auto r = extract_think_block("<think>plan</think>a, b, c, d, e");
  CHECK(r.think_block == "plan");
  CHECK(r.answer_text == "a, b, c, d, e");

  r = extract_think_block("a, b, c, d, e");
  CHECK(!r.think_block);
  CHECK(r.answer_text == "a, b, c, d, e");

  r = extract_think_block("<think>only thoughts");
  CHECK(r.think_block == "only thoughts");
  CHECK(r.answer_text.empty());
  CHECK(code_of([&] { parse_descriptor_list(r.answer_text); }) == ErrorCode::EmptyAnswer);

  r = extract_think_block("<think>\n  step one\n</think>\n\nx, y");
  CHECK(r.think_block == "step one");
  CHECK(r.answer_text == "x, y");
  CHECK(r.full_text == "<think>\n  step one\n</think>\n\nx, y");
}

TEST_CASE("parse_descriptor_list examples") {
  const auto cdu = parse_descriptor_list(
      "Revitalized City Center, Lively Public Squares, Green Infrastructure, Safe Streets, Expanded Green Spaces");
  CHECK(cdu.descriptors.size() == 5);
  CHECK(!cdu.has(ViolationKind::CountMismatch));
  CHECK(word_flags(cdu) == std::vector<std::size_t>{2, 3});

  const auto clean = parse_descriptor_list("a b c, d e f, g h i, j k l, m n o");
  CHECK(clean.descriptors.size() == 5);
  CHECK(clean.violations.empty());
  CHECK(clean.usable());

  const auto two = parse_descriptor_list("one, two");
  CHECK(two.descriptors.size() == 2);
  CHECK(two.has(ViolationKind::CountMismatch));
  CHECK(!two.usable());

  CHECK(code_of([] { parse_descriptor_list("   "); }) == ErrorCode::EmptyAnswer);
  CHECK(code_of([] { parse_descriptor_list("one, two", {true}); }) == ErrorCode::ContractViolation);
}

TEST_CASE("parse_descriptor_list normalization") {
  const auto s = parse_descriptor_list("  green  spaces (parks,  trees) here ,b c d,e f g, h i j,  k l m.  ");
  REQUIRE(s.descriptors.size() == 5);
  CHECK(s.descriptors[0] == "green spaces (parks, trees) here");
  CHECK(s.descriptors[4] == "k l m");

  const auto empty_item = parse_descriptor_list("a b c, , d e f, g h i, j k l, m n o");
  CHECK(empty_item.has(ViolationKind::EmptyItem));

  const auto mixed = parse_descriptor_list("Public Learning Spaces, safer cycle paths, Bike Parking Spaces, "
                                           "tree lined spaces, Solar Panel Installations");
  CHECK(mixed.has(ViolationKind::CaseInconsistency));
  CHECK(!parse_descriptor_list("Public Learning Spaces, Safer Cycle Paths, Bike Parking Spaces, "
                               "Tree-lined Public Spaces, Solar Panel Installations")
             .has(ViolationKind::CaseInconsistency));
}

TEST_CASE("count_words") {
  CHECK(count_words("Clean and well-maintained school areas") == 5);
  CHECK(count_words("Barrier-free playgrounds") == 2);
  CHECK(count_words("") == 0);
}

TEST_CASE("published rows match the hand-counted oracle") {
  const auto doc = nlohmann::json::parse(read_file(testing::kFixtures / "descriptors/published_rows.json"));
  std::vector<DescriptorSet> sets;
  for (const auto& row : doc["rows"]) {
    CAPTURE(row["party"].get<std::string>());
    const auto set = parse_descriptor_list(row["answer"].get<std::string>());
    REQUIRE(set.descriptors.size() == 5);
    CHECK(!set.has(ViolationKind::CountMismatch));
    const auto counts = row["word_counts"].get<std::vector<std::size_t>>();
    std::vector<std::size_t> expected_flags;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      CHECK(count_words(set.descriptors[i]) == counts[i]);
      if (counts[i] < kMinDescriptorWords || counts[i] > kMaxDescriptorWords) expected_flags.push_back(i);
    }
    CHECK(word_flags(set) == expected_flags);
    sets.push_back(set);
  }
  const auto tally = summarize_violations(sets);
  CHECK(tally[ViolationKind::WordCountOutOfRange] == 3);
  CHECK(tally[ViolationKind::CountMismatch] == 0);
}

TEST_CASE("summarize_violations") {
  CHECK(summarize_violations({}).total() == 0);
  const std::vector<DescriptorSet> one = {parse_descriptor_list("aa bb cc, dd ee ff, gg hh ii, jj kk ll")};
  const auto t = summarize_violations(one);
  CHECK(t[ViolationKind::CountMismatch] == 1);
  CHECK(t.total() == 1);
}

TEST_CASE("parser properties on random answers") {
  std::mt19937 rng(99);
  const std::vector<std::string> words = {"Green", "urban", "Streets", "bike", "lanes", "(parks,", "trees)",
                                          "well-kept", "Plaza", "solar", "etc.", "roofs"};
  std::uniform_int_distribution<int> items_dist(1, 8), words_dist(0, 8), pick(0, static_cast<int>(words.size()) - 1),
      space(1, 3);
  for (int iter = 0; iter < 500; ++iter) {
    std::string answer;
    const int items = items_dist(rng);
    for (int i = 0; i < items; ++i) {
      if (i) answer += std::string(static_cast<std::size_t>(space(rng)), ' ') + ",";
      const int n = words_dist(rng);
      for (int w = 0; w < n; ++w) answer += std::string(static_cast<std::size_t>(space(rng)), ' ') + words[pick(rng)];
    }
    if (answer.find_first_not_of(" ,") == std::string::npos) answer += "x";
    CAPTURE(answer);

    DescriptorSet set;
    REQUIRE_NOTHROW(set = parse_descriptor_list(answer));
    for (std::size_t i = 0; i < set.descriptors.size(); ++i) {
      const auto n = count_words(set.descriptors[i]);
      const bool flagged = std::any_of(set.violations.begin(), set.violations.end(), [&](const Violation& v) {
        return v.kind == ViolationKind::WordCountOutOfRange && v.item_index == i;
      });
      if (!set.descriptors[i].empty()) CHECK(flagged == (n < kMinDescriptorWords || n > kMaxDescriptorWords));
      CHECK(set.descriptors[i].find("  ") == std::string::npos);
    }

    std::string joined;
    for (std::size_t i = 0; i < set.descriptors.size(); ++i) joined += (i ? ", " : "") + set.descriptors[i];
    if (joined.find_first_not_of(" ,") == std::string::npos) continue;
    const auto again = parse_descriptor_list(joined);
    CHECK(again.descriptors == set.descriptors);
    CHECK(word_flags(again) == word_flags(set));
  }
}
