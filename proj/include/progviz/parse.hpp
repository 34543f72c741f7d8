#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "progviz/corpus.hpp"

namespace progviz {

inline constexpr std::size_t kExpectedDescriptors = 5;
inline constexpr std::size_t kMinDescriptorWords = 3;
inline constexpr std::size_t kMaxDescriptorWords = 6;

struct RawReasoningOutput {
  std::string full_text;
  std::optional<std::string> think_block;
  std::string answer_text;
};

/// Splits a "<think>...</think>" wrapper off the model output. An unclosed
/// opener makes the rest of the text the think block and leaves no answer.
RawReasoningOutput extract_think_block(std::string_view full_text);

enum class ViolationKind { CountMismatch, WordCountOutOfRange, CaseInconsistency, EmptyItem };

inline constexpr std::array<ViolationKind, 4> kAllViolationKinds = {
    ViolationKind::CountMismatch, ViolationKind::WordCountOutOfRange,
    ViolationKind::CaseInconsistency, ViolationKind::EmptyItem};

std::string_view to_string(ViolationKind kind);
ViolationKind violation_kind_from_string(std::string_view text);

struct Violation {
  ViolationKind kind;
  std::optional<std::size_t> item_index;  // absent for set-level kinds
  std::string detail;

  bool operator==(const Violation&) const = default;
};

struct DescriptorSet {
  std::vector<std::string> descriptors;
  std::vector<Violation> violations;
  std::string source_party;
  SourceKind source_kind = SourceKind::Program;

  bool has(ViolationKind kind) const;
  /// Exactly five non-empty descriptors: good enough to render an image prompt.
  bool usable() const;
};

struct ParseOptions {
  // Any violation becomes Error(ContractViolation).
  bool strict = false;
};

/// Words are the pieces between single spaces; hyphenated compounds count once.
std::size_t count_words(std::string_view descriptor);

/// Throws Error(EmptyAnswer) on blank input, Error(ContractViolation) in strict mode.
DescriptorSet parse_descriptor_list(std::string_view answer_text, ParseOptions options = {});

struct ViolationTally {
  std::array<std::size_t, kAllViolationKinds.size()> counts{};

  std::size_t operator[](ViolationKind kind) const { return counts[static_cast<std::size_t>(kind)]; }
  std::size_t total() const;
};

ViolationTally summarize_violations(std::span<const DescriptorSet> sets);

}  // namespace progviz
