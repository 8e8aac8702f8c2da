#include "cogstyle/scoring.hpp"

#include <cmath>
#include <string>

#include "cogstyle/errors.hpp"

namespace cogstyle {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::state: return "state";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::runtime: return "runtime";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::parse: return "parse";
    case ErrorKind::undefined_metric: return "undefined_metric";
  }
  return "unknown";
}

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::commute: return "commute";
    case Attribute::vacation: return "vacation";
    case Attribute::office: return "office";
    case Attribute::salary: return "salary";
  }
  return "?";
}

std::string_view to_string(Offer o) { return o == Offer::A ? "A" : "B"; }
std::string_view to_string(Phase p) { return p == Phase::pre ? "pre" : "post"; }

std::string_view to_string(CognitiveStyle s) {
  switch (s) {
    case CognitiveStyle::DownCisDownInf: return "DownCisDownInf";
    case CognitiveStyle::DownCisUpInf: return "DownCisUpInf";
    case CognitiveStyle::UpCisDownInf: return "UpCisDownInf";
    case CognitiveStyle::UpCisUpInf: return "UpCisUpInf";
  }
  return "?";
}

Attribute attribute_from_string(std::string_view s) {
  for (auto a : kAttributes)
    if (to_string(a) == s) return a;
  fail(ErrorKind::validation, "unknown attribute '" + std::string(s) + "'", std::string(s));
}

Offer offer_from_string(std::string_view s) {
  if (s == "A") return Offer::A;
  if (s == "B") return Offer::B;
  fail(ErrorKind::validation, "offer must be A or B, got '" + std::string(s) + "'", "offer");
}

Phase phase_from_string(std::string_view s) {
  if (s == "pre") return Phase::pre;
  if (s == "post") return Phase::post;
  fail(ErrorKind::validation, "phase must be pre or post, got '" + std::string(s) + "'", "phase");
}

CognitiveStyle style_from_string(std::string_view s) {
  for (auto c : kStyles)
    if (to_string(c) == s) return c;
  fail(ErrorKind::validation, "unknown cognitive style '" + std::string(s) + "'", "class");
}

bool PreferenceValue::valid(int v) noexcept {
  return v >= -5 && v <= 5 && (v % 2 != 0);
}

PreferenceValue::PreferenceValue(int value, std::string_view field) : value_(value) {
  if (!valid(value))
    fail(ErrorKind::validation,
         std::string(field) + ": " + std::to_string(value) + " is not one of -5,-3,-1,1,3,5",
         std::string(field));
}

bool AttributeWeight::valid(int v) noexcept { return v >= 1 && v <= 8; }

AttributeWeight::AttributeWeight(int value, std::string_view field) : value_(value) {
  if (!valid(value))
    fail(ErrorKind::validation, std::string(field) + ": weight " + std::to_string(value) + " outside 1..8",
         std::string(field));
}

namespace {

template <class F>
auto per_attribute(F&& f) {
  return std::array{f(Attribute::commute), f(Attribute::vacation), f(Attribute::office),
                    f(Attribute::salary)};
}

}  // namespace

PreferenceSnapshot PreferenceSnapshot::from_maps(Phase phase,
                                                 const std::map<Attribute, std::pair<int, int>>& ratings,
                                                 const std::map<Attribute, int>& weights,
                                                 const std::map<std::string, int>& fillers) {
  auto ratings_arr = per_attribute([&](Attribute a) {
    auto it = ratings.find(a);
    const std::string name(to_string(a));
    if (it == ratings.end()) fail(ErrorKind::validation, "missing ratings for " + name, name);
    return BoundRatings{PreferenceValue(it->second.first, name + ".plus"),
                        PreferenceValue(it->second.second, name + ".minus")};
  });
  auto weights_arr = per_attribute([&](Attribute a) {
    auto it = weights.find(a);
    const std::string name = "weight." + std::string(to_string(a));
    if (it == weights.end()) fail(ErrorKind::validation, "missing " + name, name);
    return AttributeWeight(it->second, name);
  });
  std::map<std::string, PreferenceValue> filler_values;
  for (const auto& [id, v] : fillers) filler_values.emplace(id, PreferenceValue(v, id));
  return PreferenceSnapshot{phase, ratings_arr, weights_arr, std::move(filler_values)};
}

SignPattern::SignPattern(std::array<int, kAttributeCount> signs) : signs_(signs) {
  for (auto a : kAttributes) {
    int s = signs_[index_of(a)];
    if (s != 1 && s != -1)
      fail(ErrorKind::validation, "sign for " + std::string(to_string(a)) + " must be +1 or -1",
           std::string(to_string(a)));
  }
}

SignPattern SignPattern::from_map(const std::map<Attribute, int>& signs) {
  return SignPattern(per_attribute([&](Attribute a) {
    auto it = signs.find(a);
    if (it == signs.end())
      fail(ErrorKind::validation, "missing sign for " + std::string(to_string(a)),
           std::string(to_string(a)));
    return it->second;
  }));
}

SignPattern SignPattern::negated() const {
  auto s = signs_;
  for (auto& v : s) v = -v;
  return SignPattern(s);
}

const SignPattern& OfferConfiguration::offer_a_signs() {
  static const SignPattern a({+1, +1, -1, -1});
  return a;
}

const SignPattern& OfferConfiguration::offer_b_signs() {
  static const SignPattern b = offer_a_signs().negated();
  return b;
}

int compute_rho(PreferenceValue plus, PreferenceValue minus, AttributeWeight weight) {
  return (plus.value() - minus.value()) * weight.value();
}

int compute_rho(int plus, int minus, int weight) {
  return compute_rho(PreferenceValue(plus, "plus"), PreferenceValue(minus, "minus"),
                     AttributeWeight(weight, "weight"));
}

int compute_rho(const PreferenceSnapshot& snapshot, Attribute a) {
  const auto& r = snapshot.rating(a);
  return compute_rho(r.plus, r.minus, snapshot.weight(a));
}

int compute_psi(const PreferenceSnapshot& snapshot, const SignPattern& signs) {
  int psi = 0;
  for (auto a : kAttributes) psi += signs.sign(a) * compute_rho(snapshot, a);
  return psi;
}

int compute_psi(const PreferenceSnapshot& snapshot, Offer offer) {
  return compute_psi(snapshot, OfferConfiguration::signs_for(offer));
}

int compute_cis(const PreferenceSnapshot& pre, const PreferenceSnapshot& post, Offer choice,
                const OfferConfiguration&) {
  if (pre.phase != Phase::pre) fail(ErrorKind::validation, "first snapshot is not a pre-phase snapshot", "pre");
  if (post.phase != Phase::post)
    fail(ErrorKind::validation, "second snapshot is not a post-phase snapshot", "post");
  return compute_psi(post, choice) - compute_psi(pre, choice);
}

bool compute_inf(Offer choice, const OfferConfiguration& config) { return choice == config.loc_plus; }

CognitiveStyle classify_style(int cis, bool inf) {
  const bool up = cis >= 0;
  if (up) return inf ? CognitiveStyle::UpCisUpInf : CognitiveStyle::UpCisDownInf;
  return inf ? CognitiveStyle::DownCisUpInf : CognitiveStyle::DownCisDownInf;
}

DecisionOutcome compute_outcome(const PreferenceSnapshot& pre, const PreferenceSnapshot& post, Offer choice,
                                const OfferConfiguration& config) {
  DecisionOutcome out;
  out.choice = choice;
  out.cis = compute_cis(pre, post, choice, config);
  out.psi_pre = compute_psi(pre, choice);
  out.psi_post = compute_psi(post, choice);
  out.inf = compute_inf(choice, config);
  out.style = classify_style(out.cis, out.inf);
  return out;
}

double scale_cis(int cis, double factor) {
  if (!std::isfinite(factor) || factor <= 0.0)
    fail(ErrorKind::configuration, "CIS scaling factor must be finite and positive", "cis_scale");
  return static_cast<double>(cis) * factor;
}

}  // namespace cogstyle
