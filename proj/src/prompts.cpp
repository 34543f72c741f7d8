#include "progviz/prompts.hpp"

#include <array>

#include "progviz/error.hpp"
#include "progviz/parse.hpp"

namespace progviz {

namespace {

constexpr std::array<PromptTemplate, 5> kTemplates = {{
    {StageKind::TranslateDeEn,
     "Translate the following sentences from German into English: {sentences}", 1},
    {StageKind::Summarize, "Summarize the following political program concisely:\n{text}", 1},
    {StageKind::Reason,
     "Identify five important visual aspects of a city appearance that would be affected or "
     "impacted by this political program. Describe each aspect in an informative and concise "
     "way, with 3 to 6 words. Return these five visual descriptions as a comma-separated "
     "list.\n{summary}",
     1},
    {StageKind::TranslateEnDe,
     "Translate the following sentences from English into German: {sentences}", 1},
    {StageKind::ImageGen, "{city} city, with additional {descriptors}", 1},
}};

void require_text(std::string_view text, std::string_view what) {
  if (text.find_first_not_of(" \t\n\r") == std::string_view::npos) {
    throw Error(ErrorCode::EmptyInput, std::string(what) + " is empty");
  }
}

}  // namespace

std::string_view to_string(StageKind stage) {
  switch (stage) {
    case StageKind::TranslateDeEn: return "translate_de_en";
    case StageKind::Summarize: return "summarize";
    case StageKind::Reason: return "reason";
    case StageKind::TranslateEnDe: return "translate_en_de";
    case StageKind::ImageGen: return "image_gen";
  }
  return "unknown";
}

StageKind stage_from_string(std::string_view text) {
  for (auto stage : kAllStages) {
    if (to_string(stage) == text) return stage;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown stage '" + std::string(text) + "'");
}

std::string_view stage_label(StageKind stage) {
  switch (stage) {
    case StageKind::TranslateDeEn: return "Translate (DE -> EN)";
    case StageKind::Summarize: return "Summarize";
    case StageKind::Reason: return "Reason";
    case StageKind::TranslateEnDe: return "Translate (EN -> DE)";
    case StageKind::ImageGen: return "Generate Images";
  }
  return "?";
}

const PromptTemplate& prompt_template(StageKind stage) {
  return kTemplates[static_cast<std::size_t>(stage)];
}

std::span<const PromptTemplate> all_prompt_templates() { return kTemplates; }

std::string render_template(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const std::size_t close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::string_view name = tmpl.substr(open + 1, close - open - 1);
    const auto* slot = std::find_if(slots.begin(), slots.end(),
                                    [&](const auto& s) { return s.first == name; });
    if (slot == slots.end()) {
      throw Error(ErrorCode::MissingSlot, "slot {" + std::string(name) + "} was not provided");
    }
    out.append(slot->second);
    pos = close + 1;
  }
  return out;
}

std::string render_translation_prompt(TranslationDirection direction, std::string_view sentences) {
  require_text(sentences, "sentences");
  const auto stage = direction == TranslationDirection::DeEn ? StageKind::TranslateDeEn
                                                             : StageKind::TranslateEnDe;
  return render_template(prompt_template(stage).template_text, {{"sentences", sentences}});
}

std::string render_reasoning_prompt(std::string_view program_summary) {
  require_text(program_summary, "program summary");
  return render_template(prompt_template(StageKind::Reason).template_text,
                         {{"summary", program_summary}});
}

std::string render_image_prompt(const DescriptorSet& descriptors, std::string_view city) {
  if (!descriptors.usable()) {
    throw Error(ErrorCode::ContractViolation,
                "image prompt needs exactly five descriptors, got " +
                    std::to_string(descriptors.descriptors.size()));
  }
  require_text(city, "city");
  std::string joined;
  for (const auto& d : descriptors.descriptors) {
    if (!joined.empty()) joined += ", ";
    joined += d;
  }
  return render_template(prompt_template(StageKind::ImageGen).template_text,
                         {{"city", city}, {"descriptors", joined}});
}

std::string render_summarize_input(std::string_view translated_text, bool dedicated_summarizer) {
  require_text(translated_text, "translated text");
  if (dedicated_summarizer) return std::string(translated_text);
  return render_template(prompt_template(StageKind::Summarize).template_text,
                         {{"text", translated_text}});
}

}  // namespace progviz
