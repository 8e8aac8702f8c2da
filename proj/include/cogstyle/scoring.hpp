#pragma once

// Preference scores, decision outcomes and cognitive-style classes.
//
// A participant rates a favorable ("plus") and an unfavorable ("minus") level
// of each of four job attributes on {-5,-3,-1,1,3,5} and weights each
// attribute on 1..8. Per-attribute preference is (plus - minus) * weight, an
// offer's composite preference is the signed sum over its attribute pattern,
// and the choice-induced shift (CIS) is the change of the chosen offer's
// composite from the pre- to the post-decision questionnaire.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace cogstyle {

enum class Attribute { commute = 0, vacation = 1, office = 2, salary = 3 };
inline constexpr std::size_t kAttributeCount = 4;
inline constexpr std::array<Attribute, kAttributeCount> kAttributes{
    Attribute::commute, Attribute::vacation, Attribute::office, Attribute::salary};

enum class Offer { A, B };
enum class Phase { pre, post };

/// Ordered as the class index used throughout evaluation (0..3).
enum class CognitiveStyle { DownCisDownInf = 0, DownCisUpInf = 1, UpCisDownInf = 2, UpCisUpInf = 3 };
inline constexpr std::size_t kStyleCount = 4;
inline constexpr std::array<CognitiveStyle, kStyleCount> kStyles{
    CognitiveStyle::DownCisDownInf, CognitiveStyle::DownCisUpInf, CognitiveStyle::UpCisDownInf,
    CognitiveStyle::UpCisUpInf};

std::string_view to_string(Attribute a);
std::string_view to_string(Offer o);
std::string_view to_string(Phase p);
std::string_view to_string(CognitiveStyle s);
Attribute attribute_from_string(std::string_view s);
Offer offer_from_string(std::string_view s);
Phase phase_from_string(std::string_view s);
CognitiveStyle style_from_string(std::string_view s);

inline std::size_t index_of(Attribute a) { return static_cast<std::size_t>(a); }
inline std::size_t index_of(CognitiveStyle s) { return static_cast<std::size_t>(s); }
inline Offer other(Offer o) { return o == Offer::A ? Offer::B : Offer::A; }

/// A rating on the six-point desirability scale.
class PreferenceValue {
 public:
  /// Throws a validation error naming `field` unless value is in {-5,-3,-1,1,3,5}.
  explicit PreferenceValue(int value, std::string_view field = "preference");
  int value() const noexcept { return value_; }
  static bool valid(int value) noexcept;
  friend bool operator==(PreferenceValue, PreferenceValue) = default;

 private:
  int value_;
};

/// Relative importance of an attribute, 1..8.
class AttributeWeight {
 public:
  explicit AttributeWeight(int value, std::string_view field = "weight");
  int value() const noexcept { return value_; }
  static bool valid(int value) noexcept;
  friend bool operator==(AttributeWeight, AttributeWeight) = default;

 private:
  int value_;
};

struct BoundRatings {
  PreferenceValue plus;
  PreferenceValue minus;
  friend bool operator==(const BoundRatings&, const BoundRatings&) = default;
};

/// The scored responses and weights from one questionnaire administration.
/// Filler items are carried verbatim and never enter any score.
struct PreferenceSnapshot {
  Phase phase;
  std::array<BoundRatings, kAttributeCount> ratings;
  std::array<AttributeWeight, kAttributeCount> weights;
  std::map<std::string, PreferenceValue> filler_responses;

  const BoundRatings& rating(Attribute a) const { return ratings[index_of(a)]; }
  AttributeWeight weight(Attribute a) const { return weights[index_of(a)]; }

  /// Builds a snapshot from keyed maps; any missing attribute is a validation
  /// error naming it.
  static PreferenceSnapshot from_maps(Phase phase,
                                      const std::map<Attribute, std::pair<int, int>>& ratings,
                                      const std::map<Attribute, int>& weights,
                                      const std::map<std::string, int>& fillers = {});

  friend bool operator==(const PreferenceSnapshot&, const PreferenceSnapshot&) = default;
};

/// Per-attribute sign of an offer: +1 favorable level, -1 unfavorable.
class SignPattern {
 public:
  /// Throws unless every entry is +1 or -1.
  explicit SignPattern(std::array<int, kAttributeCount> signs);
  static SignPattern from_map(const std::map<Attribute, int>& signs);

  int sign(Attribute a) const { return signs_[index_of(a)]; }
  const std::array<int, kAttributeCount>& signs() const { return signs_; }
  SignPattern negated() const;
  friend bool operator==(const SignPattern&, const SignPattern&) = default;

 private:
  std::array<int, kAttributeCount> signs_;
};

/// Offer A is commute+, vacation+, office-, salary-; offer B is its mirror.
/// `loc_plus` names the offer presented with the favorable location.
struct OfferConfiguration {
  Offer loc_plus = Offer::A;

  static const SignPattern& offer_a_signs();
  static const SignPattern& offer_b_signs();
  static const SignPattern& signs_for(Offer o) { return o == Offer::A ? offer_a_signs() : offer_b_signs(); }
  friend bool operator==(const OfferConfiguration&, const OfferConfiguration&) = default;
};

struct DecisionOutcome {
  Offer choice = Offer::A;
  int psi_pre = 0;   // composite of the chosen offer, pre-decision
  int psi_post = 0;  // composite of the chosen offer, post-decision
  int cis = 0;
  bool inf = false;
  CognitiveStyle style = CognitiveStyle::UpCisUpInf;
  friend bool operator==(const DecisionOutcome&, const DecisionOutcome&) = default;
};

inline constexpr int kRhoBound = 80;
inline constexpr int kPsiBound = 320;
inline constexpr int kCisBound = 640;

int compute_rho(PreferenceValue plus, PreferenceValue minus, AttributeWeight weight);
/// Raw-integer entry point; validation errors name "plus", "minus" or "weight".
int compute_rho(int plus, int minus, int weight);
int compute_rho(const PreferenceSnapshot& snapshot, Attribute a);

int compute_psi(const PreferenceSnapshot& snapshot, const SignPattern& signs);
int compute_psi(const PreferenceSnapshot& snapshot, Offer offer);

/// psi(post, chosen) - psi(pre, chosen). Phase mismatch is a validation error.
int compute_cis(const PreferenceSnapshot& pre, const PreferenceSnapshot& post, Offer choice,
                const OfferConfiguration& config);

bool compute_inf(Offer choice, const OfferConfiguration& config);

/// CIS of exactly zero counts as an upward shift.
CognitiveStyle classify_style(int cis, bool inf);

DecisionOutcome compute_outcome(const PreferenceSnapshot& pre, const PreferenceSnapshot& post,
                                Offer choice, const OfferConfiguration& config);

/// Linear rescaling hook for reporting CIS; factor must be finite and > 0.
double scale_cis(int cis, double factor);

}  // namespace cogstyle
