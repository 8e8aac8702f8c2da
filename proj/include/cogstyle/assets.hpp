#pragma once

// Versioned protocol text: writing prompts and bounds, questionnaire items,
// weight questions, distraction task and offer paragraphs. Nothing here is
// hard-coded in the engine; everything is read from the asset file.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cogstyle/scoring.hpp"

namespace cogstyle {

struct WritingPrompt {
  std::string stage;  // "writing_1" / "writing_2"
  std::string prompt;
  int min_words = 0;
  int max_words = 0;
};

enum class Pole { plus, minus };

/// One questionnaire item. Scored items map to an (attribute, pole); filler
/// items have neither and never enter a score.
struct QuestionItem {
  std::string id;
  std::optional<Attribute> attribute;
  std::optional<Pole> pole;
  std::string pre_text;
  std::optional<std::string> post_text;

  bool scored() const { return attribute.has_value(); }
};

struct WeightQuestion {
  Attribute attribute;
  std::string text;
};

struct OfferAssets {
  std::map<Offer, std::string> companies;
  std::string favorable_location;
  std::string unfavorable_location;
  std::vector<Attribute> attribute_order;
  /// attribute -> (plus paragraph, minus paragraph)
  std::map<Attribute, std::pair<std::string, std::string>> attribute_paragraphs;
};

struct ProtocolAssets {
  std::string version;
  std::array<WritingPrompt, 2> writing;
  std::string questionnaire_background;
  std::vector<QuestionItem> items;
  std::vector<std::string> post_item_order;
  std::string post_background;
  std::vector<WeightQuestion> weights;
  std::string distraction_title;
  std::string distraction_instructions;
  int distraction_max_score = 0;
  std::string offer_background;
  std::string decision_prompt;
  OfferAssets offers;
  /// FNV-1a hash of the asset file bytes, recorded in manifests.
  std::string fingerprint;

  /// Throws a configuration error naming the file on any missing or malformed field.
  static ProtocolAssets load(const std::filesystem::path& path);
  static ProtocolAssets parse(const std::string& json_text, const std::string& source_name);

  const QuestionItem* find_item(const std::string& id) const;
  /// Item id carrying the given attribute pole.
  const QuestionItem& scored_item(Attribute a, Pole p) const;
  std::vector<const QuestionItem*> filler_items() const;

  /// Substitutes {company_a}, {company_b}, {company_plus:<attr>} and
  /// {company_minus:<attr>} placeholders.
  std::string expand(const std::string& text) const;
  std::string offer_text(Offer offer, bool favorable_location) const;
};

/// Default asset path baked in at build time.
std::filesystem::path default_asset_dir();

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a(const std::string& bytes);

}  // namespace cogstyle
