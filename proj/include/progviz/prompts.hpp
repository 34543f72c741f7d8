#pragma once

#include <initializer_list>
#include <span>
#include <utility>
#include <string>
#include <string_view>

namespace progviz {

enum class StageKind { TranslateDeEn, Summarize, Reason, TranslateEnDe, ImageGen };

inline constexpr StageKind kAllStages[] = {StageKind::TranslateDeEn, StageKind::Summarize,
                                           StageKind::Reason, StageKind::TranslateEnDe,
                                           StageKind::ImageGen};

std::string_view to_string(StageKind stage);
StageKind stage_from_string(std::string_view text);
/// Human-readable label used in reports, e.g. "Translate (DE -> EN)".
std::string_view stage_label(StageKind stage);

struct DescriptorSet;

struct PromptTemplate {
  StageKind stage;
  std::string_view template_text;  // slots are written {name}
  int version;
};

/// The pinned template for a stage.
const PromptTemplate& prompt_template(StageKind stage);
std::span<const PromptTemplate> all_prompt_templates();

/// Substitutes every {slot} of `tmpl` in a single pass; inserted values are
/// never rescanned. Throws Error(MissingSlot) for an unfilled slot.
std::string render_template(std::string_view tmpl,
                            std::initializer_list<std::pair<std::string_view, std::string_view>> slots);

enum class TranslationDirection { DeEn, EnDe };

inline constexpr std::string_view kDefaultCity = "Dortmund";
inline constexpr std::string_view kSummarizeInstruction =
    "Summarize the following political program concisely:";

std::string render_translation_prompt(TranslationDirection direction, std::string_view sentences);
std::string render_reasoning_prompt(std::string_view program_summary);
/// Requires exactly five non-empty descriptors; throws Error(ContractViolation) otherwise.
std::string render_image_prompt(const DescriptorSet& descriptors,
                                std::string_view city = kDefaultCity);
std::string render_summarize_input(std::string_view translated_text, bool dedicated_summarizer);

}  // namespace progviz
