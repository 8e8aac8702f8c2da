#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cogstyle/assets.hpp"
#include "cogstyle/errors.hpp"
#include "cogstyle/record.hpp"
#include "cogstyle/synthetic.hpp"

using namespace cogstyle;
using nlohmann::json;

namespace {

const ProtocolAssets& assets() {
  static const ProtocolAssets a = ProtocolAssets::load(default_asset_dir() / "protocol_v1.json");
  return a;
}

ParticipantRecord sample_record(CognitiveStyle style = CognitiveStyle::UpCisUpInf, std::uint64_t seed = 1) {
  return synthesize_records({"P1"}, {style}, seed).front();
}

}  // namespace

TEST_CASE("protocol assets load with the expected structure") {
  const auto& a = assets();
  CHECK(a.writing[0].min_words == 20);
  CHECK(a.writing[0].max_words == 100);
  CHECK(a.writing[1].min_words == 100);
  CHECK(a.writing[1].max_words == 300);
  CHECK(a.items.size() == 11);
  CHECK(a.filler_items().size() == 3);
  CHECK(a.post_item_order.size() == 8);
  CHECK(a.weights.size() == 4);
  CHECK(a.fingerprint.size() == 16);
  for (auto attr : kAttributes)
    for (auto pole : {Pole::plus, Pole::minus}) CHECK(a.scored_item(attr, pole).attribute == attr);
  for (const auto* f : a.filler_items()) CHECK_FALSE(f->scored());
  CHECK(a.find_item("no_such_item") == nullptr);
}

TEST_CASE("fnv1a reference vectors") {
  CHECK(fnv1a("") == "cbf29ce484222325");
  CHECK(fnv1a("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a("foobar") == "85944171f73967e8");
}

TEST_CASE("bad asset file is a configuration error naming the file") {
  const auto dir = std::filesystem::temp_directory_path() / "cogstyle_assets_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "broken_protocol.json";
  {
    std::ofstream(path) << "{\"version\": \"x\"";
  }
  try {
    ProtocolAssets::load(path);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
    CHECK(std::string(e.what()).find("broken_protocol.json") != std::string::npos);
  }
  try {
    ProtocolAssets::load(dir / "missing.json");
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::configuration);
    CHECK(std::string(e.what()).find("missing.json") != std::string::npos);
  }
  // Structurally valid JSON that lacks scored items.
  auto j = json::parse(std::ifstream(default_asset_dir() / "protocol_v1.json"));
  j["items"].erase(1);
  CHECK_THROWS_AS(ProtocolAssets::parse(j.dump(), "trimmed.json"), Error);
}

TEST_CASE("offer texts follow the sign pattern and location") {
  const auto& a = assets();
  const auto fav_a = a.offer_text(Offer::A, true);
  const auto unfav_b = a.offer_text(Offer::B, false);
  const std::string company_a = a.offers.companies.at(Offer::A);
  const std::string company_b = a.offers.companies.at(Offer::B);
  CHECK(fav_a.rfind(company_a, 0) == 0);
  CHECK(unfav_b.rfind(company_b, 0) == 0);
  CHECK(fav_a.find("{company}") == std::string::npos);
  // A carries the minus salary paragraph, B the plus one.
  CHECK(fav_a.find("$59,100") != std::string::npos);
  CHECK(unfav_b.find("$61,200") != std::string::npos);
  CHECK(fav_a.find("fun part of town") != std::string::npos);
  CHECK(unfav_b.find("industrial area") != std::string::npos);
  // Same offer, other location paragraph.
  const auto unfav_a = a.offer_text(Offer::A, false);
  CHECK(unfav_a != fav_a);
}

TEST_CASE("post item placeholders expand to company names") {
  const auto& a = assets();
  for (const auto& id : a.post_item_order) {
    const auto* item = a.find_item(id);
    REQUIRE(item);
    REQUIRE(item->post_text);
    const auto text = a.expand(*item->post_text);
    CHECK(text.find('{') == std::string::npos);
  }
}

TEST_CASE("word count conformance vectors") {
  std::ifstream in(TEST_DATA_DIR "/word_count_vectors.json");
  REQUIRE(in);
  const auto doc = json::parse(in);
  for (const auto& v : doc["vectors"]) {
    const auto text = v["text"].get<std::string>();
    CAPTURE(text);
    const int n = count_words(text);
    CHECK(n == v["words"].get<int>());
    CHECK((n >= 20 && n <= 100) == v["accept_writing_1"].get<bool>());
    CHECK((n >= 100 && n <= 300) == v["accept_writing_2"].get<bool>());
  }
}

TEST_CASE("record JSON round trip preserves every field and order") {
  const auto r = sample_record();
  const auto j = record_to_json(r);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"participant_id", "writings", "pre", "post", "config", "choice", "outcome",
                                         "distraction_score"});
  CHECK(validate_record_json(json::parse(j.dump())).empty());
  const auto back = record_from_json(json::parse(j.dump()));
  CHECK(back == r);
  CHECK(record_to_line(back) == record_to_line(r));
  CHECK(r.essay() == r.writings[0].text + "\n\n" + r.writings[1].text);
}

TEST_CASE("record validation reports schema violations") {
  auto j = json::parse(record_to_json(sample_record()).dump());
  SUBCASE("unknown top-level field") {
    j["email"] = "someone@example.org";
    CHECK_FALSE(validate_record_json(j).empty());
  }
  SUBCASE("missing field") {
    j.erase("config");
    CHECK_FALSE(validate_record_json(j).empty());
  }
  SUBCASE("rating outside the scale") {
    j["pre"]["responses"]["commute"]["plus"] = 2;
    CHECK_FALSE(validate_record_json(j).empty());
  }
  SUBCASE("weight outside 1..8") {
    j["post"]["weights"]["salary"] = 9;
    CHECK_FALSE(validate_record_json(j).empty());
  }
  SUBCASE("bad participant id") {
    j["participant_id"] = "has space";
    CHECK_FALSE(validate_record_json(j).empty());
  }
  SUBCASE("wrong sign pattern") {
    j["config"]["offer_a_signs"]["office"] = 1;
    CHECK_FALSE(validate_record_json(j).empty());
  }
  SUBCASE("not an object") {
    j = json::array();
    CHECK_FALSE(validate_record_json(j).empty());
  }
  CHECK_THROWS_AS(record_from_json(j), Error);
}

TEST_CASE("audit detects a stored outcome that disagrees with recomputation") {
  auto r = sample_record();
  CHECK_NOTHROW(audit_record(r));
  r.outcome.cis += 2;
  try {
    audit_record(r);
    FAIL("expected integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::integrity);
  }
  auto r2 = sample_record();
  r2.outcome.style = CognitiveStyle::DownCisDownInf;
  CHECK_THROWS_AS(audit_record(r2), Error);
}

TEST_CASE("word counts stored in a record must match the text") {
  auto j = json::parse(record_to_json(sample_record()).dump());
  j["writings"][0]["word_count"] = j["writings"][0]["word_count"].get<int>() + 1;
  CHECK_FALSE(validate_record_json(j).empty());
}
