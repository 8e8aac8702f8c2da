#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "cogstyle/errors.hpp"
#include "cogstyle/evaluation.hpp"
#include "cogstyle/outcomes.hpp"
#include "cogstyle/protocol.hpp"
#include "cogstyle/synthetic.hpp"

using namespace cogstyle;

TEST_CASE("class frequencies follow the priors") {
  const auto data = generate_synthetic(10000, 77, SyntheticSpec::null_spec(1));
  std::array<int, kStyleCount> counts{};
  for (auto c : data.labels) ++counts[index_of(c)];
  const SyntheticSpec spec;
  for (std::size_t c = 0; c < kStyleCount; ++c) CHECK(std::abs(counts[c] / 10000.0 - spec.priors[c]) <= 0.02);
  CHECK(data.ids.front() == "S000000");
  CHECK(data.features.rows() == 10000);
}

TEST_CASE("planted shifts are recovered as class-vs-rest effect sizes") {
  SyntheticSpec spec;
  spec.features = {{"signal", {0, 0, 0, 0.8}}, {"other", {-0.5, 0, 0, 0}}, {"noise", {}}};
  const auto data = generate_synthetic(10000, 3, spec);
  const auto t = effect_size_table(data.features, data.label_map());
  CHECK(std::abs(*t.at("signal", CognitiveStyle::UpCisUpInf) - 0.8) <= 0.05);
  CHECK(std::abs(*t.at("other", CognitiveStyle::DownCisDownInf) + 0.5) <= 0.08);
  for (auto c : kStyles) CHECK(std::abs(*t.at("noise", c)) < 0.1);
}

TEST_CASE("generation is deterministic in the seed") {
  const auto spec = SyntheticSpec::null_spec(3);
  const auto a = generate_synthetic(200, 5, spec);
  const auto b = generate_synthetic(200, 5, spec);
  const auto c = generate_synthetic(200, 6, spec);
  CHECK(a.labels == b.labels);
  CHECK(a.features.values() == b.features.values());
  CHECK(a.features.values() != c.features.values());
  CHECK(generate_synthetic(0, 1, spec).features.rows() == 0);
}

TEST_CASE("bad priors are configuration errors") {
  SyntheticSpec spec = SyntheticSpec::null_spec(1);
  spec.priors = {0.5, 0.5, 0.5, -0.5};
  CHECK_THROWS_AS(generate_synthetic(10, 1, spec), Error);
  spec.priors = {0.2, 0.2, 0.2, 0.2};
  try {
    generate_synthetic(10, 1, spec);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
  }
}

TEST_CASE("spec JSON round trips and accepts both prior forms") {
  SyntheticSpec spec;
  spec.features = {{"a", {0.1, 0.2, 0.3, 0.4}}};
  const auto back = SyntheticSpec::from_json(nlohmann::json::parse(spec.to_json().dump()));
  CHECK(back.priors == spec.priors);
  CHECK(back.features.front().shift == spec.features.front().shift);
  const auto arr = SyntheticSpec::from_json(nlohmann::json::parse(
      R"({"priors":[0.25,0.25,0.25,0.25],"features":[{"name":"x","shifts":{"UpCisUpInf":1.5}}]})"));
  CHECK(arr.priors[2] == 0.25);
  CHECK(arr.features[0].shift[index_of(CognitiveStyle::UpCisUpInf)] == 1.5);
  CHECK_THROWS_AS(SyntheticSpec::from_json(nlohmann::json::parse(R"({"priors":[1],"features":[]})")), Error);
  CHECK_THROWS_AS(SyntheticSpec::from_json(nlohmann::json::parse(R"({"features":[{"name":"x","shifts":{"Up":1}}]})")),
                  Error);
}

TEST_CASE("synthesized records land in their labelled class") {
  const auto data = generate_synthetic(300, 12, SyntheticSpec::null_spec(1));
  const auto recs = synthesize_records(data.ids, data.labels, 99);
  REQUIRE(recs.size() == 300);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(recs[i].participant_id == data.ids[i]);
    CHECK(recs[i].outcome.style == data.labels[i]);
    CHECK_NOTHROW(audit_record(recs[i]));
    CHECK(validate_record_json(record_to_json(recs[i])).empty());
  }
  const auto again = synthesize_records(data.ids, data.labels, 99);
  CHECK(again == recs);
}

TEST_CASE("scoring an export reproduces the labels and isolates bad rows") {
  const auto data = generate_synthetic(50, 21, SyntheticSpec::null_spec(1));
  const auto recs = synthesize_records(data.ids, data.labels, 1);
  std::string text = records_to_ndjson(recs);
  const auto clean = score_records_ndjson(text);
  CHECK(clean.errors.empty());
  REQUIRE(clean.rows.size() == 50);
  for (const auto& row : clean.rows) CHECK(row.style == data.label_map().at(row.participant_id));

  auto tampered = nlohmann::json::parse(record_to_line(recs[3]));
  tampered["outcome"]["cis"] = tampered["outcome"]["cis"].get<int>() + 2;
  text += "this is not json\n" + tampered.dump() + "\n" + record_to_line(recs[5]) + "\n";
  const auto mixed = score_records_ndjson(text);
  CHECK(mixed.rows.size() == 50);
  REQUIRE(mixed.errors.size() == 3);
  CHECK(mixed.errors[0].line == 51);
  CHECK(mixed.errors[0].participant_id.empty());
  CHECK(mixed.errors[1].participant_id == recs[3].participant_id);
  CHECK(mixed.errors[2].message.find("duplicate") != std::string::npos);
}

TEST_CASE("outcomes CSV round trips the labels") {
  const auto data = generate_synthetic(40, 8, SyntheticSpec::null_spec(1));
  const auto recs = synthesize_records(data.ids, data.labels, 2);
  const auto scored = score_records_ndjson(records_to_ndjson(recs));
  const auto csv = format_outcomes_csv(scored.rows);
  CHECK(csv.rfind("participant_id,choice,loc_plus,psi_pre,psi_post,cis,inf,class\n", 0) == 0);
  CHECK(parse_outcomes_csv(csv) == data.label_map());
  CHECK(format_outcomes_csv({}) == "participant_id,choice,loc_plus,psi_pre,psi_post,cis,inf,class\n");

  const auto scaled = format_outcomes_csv(scored.rows, 0.5);
  CHECK(parse_outcomes_csv(scaled) == data.label_map());

  CHECK_THROWS_AS(parse_outcomes_csv("participant_id,cis\nP1,3\n"), Error);
  CHECK_THROWS_AS(parse_outcomes_csv("participant_id,class\nP1,UpCisUpInf\nP1,UpCisUpInf\n"), Error);
  CHECK_THROWS_AS(parse_outcomes_csv("participant_id,class\nP1,Sideways\n"), Error);
  CHECK(format_row_errors_csv({{4, "P9", "bad, really"}}) == "line,participant_id,error\n4,P9,\"bad, really\"\n");
}
