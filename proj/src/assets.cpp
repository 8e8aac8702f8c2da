#include "cogstyle/assets.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cogstyle/errors.hpp"

#ifndef COGSTYLE_ASSET_DIR
#define COGSTYLE_ASSET_DIR "assets"
#endif

namespace cogstyle {

using nlohmann::json;

std::filesystem::path default_asset_dir() { return COGSTYLE_ASSET_DIR; }

std::string fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
}

}  // namespace

ProtocolAssets ProtocolAssets::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::configuration, "cannot open protocol asset file " + path.string(), path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

ProtocolAssets ProtocolAssets::parse(const std::string& text, const std::string& source) {
  ProtocolAssets a;
  try {
    const json j = json::parse(text);
    a.version = j.at("version").get<std::string>();
    const auto& writing = j.at("writing");
    if (writing.size() != 2) fail(ErrorKind::configuration, "expected exactly two writing prompts");
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& w = writing[i];
      a.writing[i] = WritingPrompt{w.at("stage").get<std::string>(), w.at("prompt").get<std::string>(),
                                   w.at("min_words").get<int>(), w.at("max_words").get<int>()};
      if (a.writing[i].min_words < 0 || a.writing[i].max_words < a.writing[i].min_words)
        fail(ErrorKind::configuration, "invalid word bounds for " + a.writing[i].stage);
    }
    if (a.writing[0].stage != "writing_1" || a.writing[1].stage != "writing_2")
      fail(ErrorKind::configuration, "writing prompts must be writing_1 then writing_2");
    a.questionnaire_background = j.at("questionnaire_background").get<std::string>();

    for (const auto& it : j.at("items")) {
      QuestionItem q;
      q.id = it.at("id").get<std::string>();
      if (!it.at("attribute").is_null()) {
        q.attribute = attribute_from_string(it.at("attribute").get<std::string>());
        const auto pole = it.at("pole").get<std::string>();
        if (pole != "plus" && pole != "minus") fail(ErrorKind::configuration, "bad pole for item " + q.id);
        q.pole = pole == "plus" ? Pole::plus : Pole::minus;
      }
      q.pre_text = it.at("pre_text").get<std::string>();
      if (!it.at("post_text").is_null()) q.post_text = it.at("post_text").get<std::string>();
      a.items.push_back(std::move(q));
    }
    a.post_item_order = j.at("post_item_order").get<std::vector<std::string>>();
    a.post_background = j.at("post_background").get<std::string>();
    for (const auto& w : j.at("weights"))
      a.weights.push_back({attribute_from_string(w.at("attribute").get<std::string>()),
                           w.at("text").get<std::string>()});
    const auto& d = j.at("distraction");
    a.distraction_title = d.at("title").get<std::string>();
    a.distraction_instructions = d.at("instructions").get<std::string>();
    a.distraction_max_score = d.at("max_score").get<int>();
    a.offer_background = j.at("offer_background").get<std::string>();
    a.decision_prompt = j.at("decision_prompt").get<std::string>();

    const auto& o = j.at("offers");
    a.offers.companies[Offer::A] = o.at("companies").at("A").get<std::string>();
    a.offers.companies[Offer::B] = o.at("companies").at("B").get<std::string>();
    a.offers.favorable_location = o.at("location").at("favorable").get<std::string>();
    a.offers.unfavorable_location = o.at("location").at("unfavorable").get<std::string>();
    for (const auto& name : o.at("attribute_order"))
      a.offers.attribute_order.push_back(attribute_from_string(name.get<std::string>()));
    for (auto attr : kAttributes) {
      const auto& p = o.at("attributes").at(std::string(to_string(attr)));
      a.offers.attribute_paragraphs[attr] = {p.at("plus").get<std::string>(), p.at("minus").get<std::string>()};
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::configuration, "protocol asset file " + source + ": " + e.what(), source);
  } catch (const Error& e) {
    fail(ErrorKind::configuration, "protocol asset file " + source + ": " + e.what(), source);
  }

  // Structural checks: every attribute pole covered exactly once, ids unique,
  // post order lists exactly the scored items, one weight per attribute.
  std::set<std::string> ids;
  std::set<std::pair<int, int>> poles;
  for (const auto& q : a.items) {
    if (!ids.insert(q.id).second) fail(ErrorKind::configuration, source + ": duplicate item id " + q.id, source);
    if (q.scored()) {
      if (!poles.insert({static_cast<int>(*q.attribute), static_cast<int>(*q.pole)}).second)
        fail(ErrorKind::configuration, source + ": duplicate attribute pole at " + q.id, source);
      if (!q.post_text) fail(ErrorKind::configuration, source + ": scored item without post text " + q.id, source);
    }
  }
  if (poles.size() != 2 * kAttributeCount)
    fail(ErrorKind::configuration, source + ": every attribute needs a plus and a minus item", source);
  std::set<std::string> post_ids(a.post_item_order.begin(), a.post_item_order.end());
  for (const auto& id : a.post_item_order) {
    const auto* q = a.find_item(id);
    if (!q || !q->scored()) fail(ErrorKind::configuration, source + ": post item " + id + " is not scored", source);
  }
  if (post_ids.size() != 2 * kAttributeCount || a.post_item_order.size() != post_ids.size())
    fail(ErrorKind::configuration, source + ": post_item_order must list each scored item once", source);
  std::set<int> weight_attrs;
  for (const auto& w : a.weights) weight_attrs.insert(static_cast<int>(w.attribute));
  if (weight_attrs.size() != kAttributeCount || a.weights.size() != kAttributeCount)
    fail(ErrorKind::configuration, source + ": need exactly one weight question per attribute", source);
  if (a.offers.attribute_order.size() != kAttributeCount)
    fail(ErrorKind::configuration, source + ": attribute_order must list all four attributes", source);

  a.fingerprint = fnv1a(text);
  return a;
}

const QuestionItem* ProtocolAssets::find_item(const std::string& id) const {
  for (const auto& q : items)
    if (q.id == id) return &q;
  return nullptr;
}

const QuestionItem& ProtocolAssets::scored_item(Attribute attr, Pole p) const {
  for (const auto& q : items)
    if (q.attribute == attr && q.pole == p) return q;
  fail(ErrorKind::configuration, "no item for attribute " + std::string(to_string(attr)));
}

std::vector<const QuestionItem*> ProtocolAssets::filler_items() const {
  std::vector<const QuestionItem*> out;
  for (const auto& q : items)
    if (!q.scored()) out.push_back(&q);
  return out;
}

std::string ProtocolAssets::expand(const std::string& text) const {
  std::string s = text;
  replace_all(s, "{company_a}", offers.companies.at(Offer::A));
  replace_all(s, "{company_b}", offers.companies.at(Offer::B));
  for (auto attr : kAttributes) {
    const std::string name(to_string(attr));
    const Offer plus_offer = OfferConfiguration::offer_a_signs().sign(attr) > 0 ? Offer::A : Offer::B;
    replace_all(s, "{company_plus:" + name + "}", offers.companies.at(plus_offer));
    replace_all(s, "{company_minus:" + name + "}", offers.companies.at(other(plus_offer)));
  }
  return s;
}

std::string ProtocolAssets::offer_text(Offer offer, bool favorable_location) const {
  const auto& signs = OfferConfiguration::signs_for(offer);
  std::string text = favorable_location ? offers.favorable_location : offers.unfavorable_location;
  for (auto attr : offers.attribute_order) {
    const auto& [plus, minus] = offers.attribute_paragraphs.at(attr);
    text += ' ';
    text += signs.sign(attr) > 0 ? plus : minus;
  }
  replace_all(text, "{company}", offers.companies.at(offer));
  return text;
}

}  // namespace cogstyle
