#pragma once

// Seeded synthetic participants for end-to-end checks: class labels drawn
// from priors, Gaussian features with per-class mean shifts expressed in
// Cohen's-d units, and full participant records consistent with the labels.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cogstyle/features.hpp"
#include "cogstyle/record.hpp"

namespace cogstyle {

struct SyntheticFeature {
  std::string name;
  std::array<double, kStyleCount> shift{};  // class-index order, in SD units
};

struct SyntheticSpec {
  std::array<double, kStyleCount> priors{0.06, 0.17, 0.11, 0.66};
  std::vector<SyntheticFeature> features;

  /// Eight null features under the default priors.
  static SyntheticSpec null_spec(std::size_t n_features = 8);
  /// {"priors": {class: p, ...} | [p0..p3], "features": [{"name", "shifts": {class: d}}]}
  static SyntheticSpec from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct SyntheticData {
  FeatureTable features;
  std::vector<std::string> ids;
  std::vector<CognitiveStyle> labels;  // aligned with ids
  std::map<std::string, CognitiveStyle> label_map() const;
};

/// Ids are "S000000".. in draw order. Priors must be non-negative and sum to 1.
SyntheticData generate_synthetic(std::size_t n, std::uint64_t seed, const SyntheticSpec& spec);

/// Full records whose recomputed outcome lands in the given class: pre/post
/// snapshots are redrawn until the CIS sign matches, loc_plus is set from the
/// desired Inf, and the essays are filler words within the default bounds.
std::vector<ParticipantRecord> synthesize_records(const std::vector<std::string>& ids,
                                                  const std::vector<CognitiveStyle>& labels, std::uint64_t seed);

}  // namespace cogstyle
