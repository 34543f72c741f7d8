#include "progviz/parse.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>

#include "progviz/error.hpp"

namespace progviz {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool gap = false;
  for (char c : trim(s)) {
    if (is_ws(c)) {
      gap = true;
      continue;
    }
    if (gap) out.push_back(' ');
    gap = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string_view> split_top_level(std::string_view text) {
  std::vector<std::string_view> items;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      depth = std::max(0, depth - 1);
    } else if (c == ',' && depth == 0) {
      items.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  items.push_back(text.substr(start));
  return items;
}

enum class CaseStyle { Neutral, Title, Lower };

CaseStyle case_style(std::string_view item) {
  int upper = 0;
  int lower = 0;
  std::size_t pos = 0;
  while (pos < item.size()) {
    const std::size_t end = std::min(item.find(' ', pos), item.size());
    if (end > pos) {
      int32_t i = static_cast<int32_t>(pos);
      UChar32 cp = 0;
      U8_NEXT(reinterpret_cast<const uint8_t*>(item.data()), i, static_cast<int32_t>(item.size()), cp);
      if (cp >= 0 && (u_isupper(cp) || u_istitle(cp))) ++upper;
      else if (cp >= 0 && u_islower(cp)) ++lower;
    }
    pos = end + 1;
  }
  if (upper > lower) return CaseStyle::Title;
  if (lower > upper) return CaseStyle::Lower;
  return CaseStyle::Neutral;
}

}  // namespace

RawReasoningOutput extract_think_block(std::string_view full_text) {
  RawReasoningOutput out;
  out.full_text = std::string(full_text);
  const std::size_t open = full_text.find(kThinkOpen);
  if (open == std::string_view::npos) {
    out.answer_text = std::string(full_text);
    return out;
  }
  const std::size_t body = open + kThinkOpen.size();
  const std::size_t close = full_text.find(kThinkClose, body);
  if (close == std::string_view::npos) {
    out.think_block = std::string(trim(full_text.substr(body)));
    return out;
  }
  out.think_block = std::string(trim(full_text.substr(body, close - body)));
  std::string rest(full_text.substr(0, open));
  rest += full_text.substr(close + kThinkClose.size());
  out.answer_text = std::string(trim(rest));
  return out;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::CountMismatch: return "CountMismatch";
    case ViolationKind::WordCountOutOfRange: return "WordCountOutOfRange";
    case ViolationKind::CaseInconsistency: return "CaseInconsistency";
    case ViolationKind::EmptyItem: return "EmptyItem";
  }
  return "Unknown";
}

ViolationKind violation_kind_from_string(std::string_view text) {
  for (auto kind : kAllViolationKinds) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(ErrorCode::ManifestCorrupt, "unknown violation kind '" + std::string(text) + "'");
}

bool DescriptorSet::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

bool DescriptorSet::usable() const {
  return descriptors.size() == kExpectedDescriptors &&
         std::none_of(descriptors.begin(), descriptors.end(),
                      [](const std::string& d) { return d.empty(); });
}

std::size_t count_words(std::string_view descriptor) {
  std::size_t words = 0;
  std::size_t pos = 0;
  while (pos <= descriptor.size()) {
    const std::size_t end = std::min(descriptor.find(' ', pos), descriptor.size());
    if (end > pos) ++words;
    pos = end + 1;
  }
  return words;
}

DescriptorSet parse_descriptor_list(std::string_view answer_text, ParseOptions options) {
  if (trim(answer_text).empty()) throw Error(ErrorCode::EmptyAnswer, "reasoning answer is blank");

  std::vector<std::string> items;
  for (auto raw : split_top_level(answer_text)) items.push_back(collapse_ws(raw));

  // The list usually ends with a sentence period; strip it from the last
  // item that still has text afterwards.
  for (auto it = items.rbegin(); it != items.rend(); ++it) {
    if (it->empty()) continue;
    while (!it->empty() && it->back() == '.') it->pop_back();
    *it = std::string(trim(*it));
    if (!it->empty()) break;
  }

  DescriptorSet set;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].empty()) {
      set.violations.push_back({ViolationKind::EmptyItem, i, "item " + std::to_string(i) + " is empty"});
      continue;
    }
    set.descriptors.push_back(std::move(items[i]));
  }

  if (set.descriptors.size() != kExpectedDescriptors) {
    set.violations.push_back({ViolationKind::CountMismatch, std::nullopt,
                              "expected " + std::to_string(kExpectedDescriptors) + " items, got " +
                                  std::to_string(set.descriptors.size())});
  }

  bool title = false;
  bool lower = false;
  for (std::size_t i = 0; i < set.descriptors.size(); ++i) {
    const std::size_t words = count_words(set.descriptors[i]);
    if (words < kMinDescriptorWords || words > kMaxDescriptorWords) {
      set.violations.push_back({ViolationKind::WordCountOutOfRange, i,
                                std::to_string(words) + " words in \"" + set.descriptors[i] + "\""});
    }
    const CaseStyle style = case_style(set.descriptors[i]);
    title = title || style == CaseStyle::Title;
    lower = lower || style == CaseStyle::Lower;
  }
  if (title && lower) {
    set.violations.push_back({ViolationKind::CaseInconsistency, std::nullopt,
                              "items mix Title Case and lower case"});
  }

  if (options.strict && !set.violations.empty()) {
    std::string detail;
    for (const auto& v : set.violations) {
      if (!detail.empty()) detail += "; ";
      detail += std::string(to_string(v.kind)) + " (" + v.detail + ")";
    }
    throw Error(ErrorCode::ContractViolation, detail);
  }
  return set;
}

std::size_t ViolationTally::total() const {
  std::size_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

ViolationTally summarize_violations(std::span<const DescriptorSet> sets) {
  ViolationTally tally;
  for (const auto& set : sets) {
    for (const auto& v : set.violations) ++tally.counts[static_cast<std::size_t>(v.kind)];
  }
  return tally;
}

}  // namespace progviz
