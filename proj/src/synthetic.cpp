#include "cogstyle/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "cogstyle/errors.hpp"
#include "cogstyle/rng.hpp"

namespace cogstyle {

using nlohmann::json;
using nlohmann::ordered_json;

std::map<std::string, CognitiveStyle> SyntheticData::label_map() const {
  std::map<std::string, CognitiveStyle> m;
  for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], labels[i]);
  return m;
}

SyntheticSpec SyntheticSpec::null_spec(std::size_t n_features) {
  SyntheticSpec s;
  for (std::size_t i = 0; i < n_features; ++i) s.features.push_back({"f" + std::to_string(i), {}});
  return s;
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  try {
    if (j.contains("priors")) {
      const auto& p = j.at("priors");
      if (p.is_array()) {
        if (p.size() != kStyleCount) fail(ErrorKind::configuration, "priors must list four values", "priors");
        for (std::size_t c = 0; c < kStyleCount; ++c) s.priors[c] = p[c].get<double>();
      } else {
        s.priors.fill(0.0);
        for (const auto& [name, v] : p.items()) s.priors[index_of(style_from_string(name))] = v.get<double>();
      }
    }
    for (const auto& f : j.at("features")) {
      SyntheticFeature feat;
      feat.name = f.at("name").get<std::string>();
      if (f.contains("shifts"))
        for (const auto& [name, v] : f.at("shifts").items()) feat.shift[index_of(style_from_string(name))] = v.get<double>();
      s.features.push_back(std::move(feat));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::configuration, std::string("synthetic spec: ") + e.what(), "spec");
  } catch (const Error& e) {
    fail(ErrorKind::configuration, std::string("synthetic spec: ") + e.what(), e.field());
  }
  return s;
}

ordered_json SyntheticSpec::to_json() const {
  ordered_json j;
  ordered_json p;
  for (auto c : kStyles) p[std::string(to_string(c))] = priors[index_of(c)];
  j["priors"] = p;
  ordered_json fs = ordered_json::array();
  for (const auto& f : features) {
    ordered_json sh;
    for (auto c : kStyles) sh[std::string(to_string(c))] = f.shift[index_of(c)];
    fs.push_back({{"name", f.name}, {"shifts", sh}});
  }
  j["features"] = fs;
  return j;
}

SyntheticData generate_synthetic(std::size_t n, std::uint64_t seed, const SyntheticSpec& spec) {
  double total = 0.0;
  for (double p : spec.priors) {
    if (!(p >= 0.0)) fail(ErrorKind::configuration, "class priors must be non-negative", "priors");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::configuration, "class priors must sum to 1", "priors");

  Rng rng(seed);
  SyntheticData out;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.features.size()));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    std::size_t c = 0;
    double acc = spec.priors[0];
    while (c + 1 < kStyleCount && u >= acc) acc += spec.priors[++c];
    char id[24];
    std::snprintf(id, sizeof id, "S%06zu", i);
    out.ids.emplace_back(id);
    out.labels.push_back(kStyles[c]);
    for (std::size_t j = 0; j < spec.features.size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal() + spec.features[j].shift[c];
  }
  std::vector<FeatureColumn> cols;
  for (const auto& f : spec.features) cols.push_back({f.name, "synthetic"});
  out.features = FeatureTable(std::move(cols), out.ids, std::move(values),
                              {{"extractor", "synthetic"}, {"seed", std::to_string(seed)}});
  return out;
}

namespace {

constexpr std::array<int, 6> kScale{-5, -3, -1, 1, 3, 5};
constexpr std::array<const char*, 24> kWords{
    "decision", "choice",  "option", "because", "family", "career", "school",  "money",
    "friends",  "weighed", "future", "moving",  "offer",  "stayed", "changed", "worried",
    "thought",  "about",   "the",    "and",     "I",      "felt",   "finally", "chose"};

PreferenceSnapshot random_snapshot(Rng& rng, Phase phase, bool fillers) {
  std::map<Attribute, std::pair<int, int>> ratings;
  std::map<Attribute, int> weights;
  for (auto a : kAttributes) {
    ratings[a] = {kScale[rng.uniform_index(6)], kScale[rng.uniform_index(6)]};
    weights[a] = 1 + static_cast<int>(rng.uniform_index(8));
  }
  std::map<std::string, int> filler;
  if (fillers)
    for (const char* id : {"training_center", "promotion", "mobility"}) filler[id] = kScale[rng.uniform_index(6)];
  return PreferenceSnapshot::from_maps(phase, ratings, weights, filler);
}

std::string filler_text(Rng& rng, int words) {
  std::string s;
  for (int i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += kWords[rng.uniform_index(kWords.size())];
  }
  return s;
}

}  // namespace

std::vector<ParticipantRecord> synthesize_records(const std::vector<std::string>& ids,
                                                  const std::vector<CognitiveStyle>& labels, std::uint64_t seed) {
  if (ids.size() != labels.size()) fail(ErrorKind::validation, "ids and labels differ in length", "labels");
  Rng rng(seed);
  std::vector<ParticipantRecord> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto style = labels[i];
    const bool want_up = style == CognitiveStyle::UpCisUpInf || style == CognitiveStyle::UpCisDownInf;
    const bool want_inf = style == CognitiveStyle::UpCisUpInf || style == CognitiveStyle::DownCisUpInf;
    const Offer choice = rng.uniform_index(2) ? Offer::B : Offer::A;
    const OfferConfiguration config{want_inf ? choice : other(choice)};
    // Pre and post are exchangeable, so each redraw matches the wanted CIS
    // sign with probability at least one half.
    auto pre = random_snapshot(rng, Phase::pre, true);
    auto post = random_snapshot(rng, Phase::post, false);
    for (int attempt = 0; attempt < 256 && (compute_cis(pre, post, choice, config) >= 0) != want_up; ++attempt) {
      pre = random_snapshot(rng, Phase::pre, true);
      post = random_snapshot(rng, Phase::post, false);
    }

    const int w1 = 20 + static_cast<int>(rng.uniform_index(81));
    const int w2 = 100 + static_cast<int>(rng.uniform_index(201));
    std::string t1 = filler_text(rng, w1), t2 = filler_text(rng, w2);
    ParticipantRecord r{ids[i],
                        {WritingResponse{1, t1, w1}, WritingResponse{2, t2, w2}},
                        pre,
                        post,
                        config,
                        choice,
                        compute_outcome(pre, post, choice, config),
                        static_cast<int>(rng.uniform_index(21))};
    if (r.outcome.style != style) fail(ErrorKind::runtime, "synthetic record generation failed for " + ids[i]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cogstyle
