#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cogstyle/errors.hpp"
#include "cogstyle/protocol.hpp"
#include "cogstyle/rng.hpp"

using namespace cogstyle;
namespace fs = std::filesystem;

namespace {

ProtocolAssets load_assets() { return ProtocolAssets::load(default_asset_dir() / "protocol_v1.json"); }

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

std::map<std::string, int> pre_responses() {
  return {{"training_center", 3}, {"commute_18_min", 5},        {"salary_above_average", 3}, {"cubicle", -3},
          {"promotion", 1},       {"minimum_vacation", -5},     {"commute_40_min", -3},      {"private_office", 5},
          {"salary_below_average", -1}, {"san_diego_retreat", 3}, {"mobility", -1}};
}

std::map<std::string, int> post_responses() {
  auto r = pre_responses();
  r.erase("training_center");
  r.erase("promotion");
  r.erase("mobility");
  r["commute_18_min"] = 3;
  return r;
}

const std::map<std::string, int> kWeights{{"commute", 4}, {"vacation", 2}, {"office", 7}, {"salary", 8}};

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::runtime;
}

ParticipantRecord run_session(ProtocolEngine& eng, std::optional<std::uint64_t> seed, const std::string& choice) {
  const auto s = eng.create_session(seed);
  eng.submit_writing(s.session_id, 1, words(25));
  eng.submit_writing(s.session_id, 2, words(150));
  eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), kWeights);
  eng.submit_distraction(s.session_id, 12);
  eng.render_offers(s.session_id);
  eng.submit_choice(s.session_id, choice);
  eng.submit_preferences(s.session_id, Phase::post, post_responses(), kWeights);
  return eng.finalize_session(s.session_id);
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("cogstyle_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("a full session produces an audited record") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  const auto s = eng.create_session(42);
  CHECK(s.stage == Stage::writing_1);
  CHECK_FALSE(s.session_id.empty());
  CHECK(s.participant_id != s.session_id);

  CHECK(eng.submit_writing(s.session_id, 1, words(25)).stage == Stage::writing_2);
  CHECK(eng.submit_writing(s.session_id, 2, words(150)).stage == Stage::pre_prefs);
  CHECK(eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), kWeights).stage == Stage::distraction);
  CHECK(eng.submit_distraction(s.session_id, std::nullopt).stage == Stage::offer_view);
  const auto p1 = eng.render_offers(s.session_id);
  CHECK(eng.stage(s.session_id) == Stage::choice);
  const auto p2 = eng.render_offers(s.session_id);
  CHECK(p1.offer_texts == p2.offer_texts);
  CHECK(eng.submit_choice(s.session_id, "B").stage == Stage::post_prefs);
  CHECK(eng.submit_preferences(s.session_id, Phase::post, post_responses(), kWeights).stage == Stage::post_prefs);
  const auto r = eng.finalize_session(s.session_id);
  CHECK(eng.stage(s.session_id) == Stage::complete);
  CHECK(r.participant_id == s.participant_id);
  CHECK(r.choice == Offer::B);
  CHECK(r.pre.filler_responses.size() == 3);
  CHECK(r.post.filler_responses.empty());
  CHECK(r.distraction_score == std::nullopt);
  CHECK_NOTHROW(audit_record(r));
  CHECK(r.outcome == compute_outcome(r.pre, r.post, r.choice, r.config));
  CHECK(eng.store().size() == 1);
}

TEST_CASE("choice A immediately after offers advances to post_prefs") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  const auto r = run_session(eng, 1, "A");
  CHECK(r.choice == Offer::A);
}

TEST_CASE("pre = post snapshots give cis 0") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  const auto s = eng.create_session(3);
  eng.submit_writing(s.session_id, 1, words(20));
  eng.submit_writing(s.session_id, 2, words(300));
  eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), kWeights);
  eng.submit_distraction(s.session_id, 0);
  eng.render_offers(s.session_id);
  eng.submit_choice(s.session_id, "A");
  auto same = pre_responses();
  same.erase("training_center");
  same.erase("promotion");
  same.erase("mobility");
  eng.submit_preferences(s.session_id, Phase::post, same, kWeights);
  const auto r = eng.finalize_session(s.session_id);
  CHECK(r.outcome.cis == 0);
  CHECK((r.outcome.style == CognitiveStyle::UpCisUpInf || r.outcome.style == CognitiveStyle::UpCisDownInf));
}

TEST_CASE("writing bounds are enforced with the measured count") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  const auto s = eng.create_session(1);
  try {
    eng.submit_writing(s.session_id, 1, words(19));
    FAIL("expected word count error");
  } catch (const WordCountError& e) {
    CHECK(e.measured() == 19);
    CHECK(e.min_words() == 20);
    CHECK(e.max_words() == 100);
    CHECK(e.kind() == ErrorKind::validation);
  }
  CHECK_THROWS_AS(eng.submit_writing(s.session_id, 1, words(101)), WordCountError);
  CHECK(eng.stage(s.session_id) == Stage::writing_1);
  eng.submit_writing(s.session_id, 1, words(100));
  CHECK_THROWS_AS(eng.submit_writing(s.session_id, 2, words(99)), WordCountError);
  CHECK_THROWS_AS(eng.submit_writing(s.session_id, 2, words(301)), WordCountError);
  CHECK(eng.submit_writing(s.session_id, 2, words(100)).stage == Stage::pre_prefs);
}

TEST_CASE("operations out of order are state errors") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  const auto s = eng.create_session(1);
  CHECK(kind_of([&] { eng.submit_writing(s.session_id, 2, words(150)); }) == ErrorKind::state);
  CHECK(kind_of([&] { eng.submit_choice(s.session_id, "A"); }) == ErrorKind::state);
  CHECK(kind_of([&] { eng.render_offers(s.session_id); }) == ErrorKind::state);
  CHECK(kind_of([&] { eng.finalize_session(s.session_id); }) == ErrorKind::state);
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), kWeights); }) ==
        ErrorKind::state);
  eng.submit_writing(s.session_id, 1, words(30));
  CHECK(kind_of([&] { eng.submit_writing(s.session_id, 1, words(30)); }) == ErrorKind::state);
}

TEST_CASE("finalize needs post preferences and post preferences are write-once") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  const auto s = eng.create_session(1);
  eng.submit_writing(s.session_id, 1, words(25));
  eng.submit_writing(s.session_id, 2, words(150));
  eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), kWeights);
  eng.submit_distraction(s.session_id, 5);
  eng.render_offers(s.session_id);
  eng.submit_choice(s.session_id, "A");
  CHECK(kind_of([&] { eng.finalize_session(s.session_id); }) == ErrorKind::state);
  eng.submit_preferences(s.session_id, Phase::post, post_responses(), kWeights);
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::post, post_responses(), kWeights); }) ==
        ErrorKind::state);
  eng.finalize_session(s.session_id);
  CHECK(kind_of([&] { eng.finalize_session(s.session_id); }) == ErrorKind::state);
}

TEST_CASE("preference submissions are validated") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  const auto s = eng.create_session(1);
  eng.submit_writing(s.session_id, 1, words(25));
  eng.submit_writing(s.session_id, 2, words(150));

  auto missing = pre_responses();
  missing.erase("mobility");
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::pre, missing, kWeights); }) == ErrorKind::validation);

  auto bad = pre_responses();
  bad["cubicle"] = 0;
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::pre, bad, kWeights); }) == ErrorKind::validation);

  auto extra = pre_responses();
  extra["pets_allowed"] = 1;
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::pre, extra, kWeights); }) == ErrorKind::validation);

  auto w = kWeights;
  w["salary"] = 9;
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), w); }) ==
        ErrorKind::validation);
  w = kWeights;
  w.erase("office");
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), w); }) ==
        ErrorKind::validation);
  w = kWeights;
  w["location"] = 3;
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), w); }) ==
        ErrorKind::validation);
  CHECK(eng.stage(s.session_id) == Stage::pre_prefs);

  eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), kWeights);
  CHECK(kind_of([&] { eng.submit_distraction(s.session_id, 21); }) == ErrorKind::validation);
  CHECK(kind_of([&] { eng.submit_distraction(s.session_id, -1); }) == ErrorKind::validation);
  eng.submit_distraction(s.session_id, 20);
  eng.render_offers(s.session_id);
  CHECK(kind_of([&] { eng.submit_choice(s.session_id, "C"); }) == ErrorKind::validation);
  eng.submit_choice(s.session_id, "B");
  // Filler items are not asked after the decision.
  CHECK(kind_of([&] { eng.submit_preferences(s.session_id, Phase::post, pre_responses(), kWeights); }) ==
        ErrorKind::validation);
}

TEST_CASE("unknown sessions are not_found") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  CHECK(kind_of([&] { eng.stage("nope"); }) == ErrorKind::not_found);
  CHECK(kind_of([&] { eng.submit_writing("nope", 1, words(30)); }) == ErrorKind::not_found);
}

TEST_CASE("stages only move forward under arbitrary operation sequences") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto id = eng.create_session(trial).session_id;
    Stage last = Stage::writing_1;
    for (int step = 0; step < 40; ++step) {
      try {
        switch (rng.uniform_index(9)) {
          case 0: eng.submit_writing(id, 1, words(rng.uniform_index(2) ? 25 : 5)); break;
          case 1: eng.submit_writing(id, 2, words(150)); break;
          case 2: eng.submit_preferences(id, Phase::pre, pre_responses(), kWeights); break;
          case 3: eng.submit_distraction(id, 3); break;
          case 4: eng.render_offers(id); break;
          case 5: eng.submit_choice(id, rng.uniform_index(2) ? "A" : "B"); break;
          case 6: eng.submit_preferences(id, Phase::post, post_responses(), kWeights); break;
          case 7: eng.finalize_session(id); break;
          default: eng.submit_writing(id, 1, words(300)); break;
        }
      } catch (const Error& e) {
        CHECK((e.kind() == ErrorKind::state || e.kind() == ErrorKind::validation));
      }
      const Stage now = eng.stage(id);
      CHECK(static_cast<int>(now) >= static_cast<int>(last));
      CHECK(static_cast<int>(now) - static_cast<int>(last) <= 1);
      last = now;
    }
  }
}

TEST_CASE("seeded condition draws are reproducible") {
  ProtocolEngine a(load_assets(), std::make_shared<RecordStore>());
  ProtocolEngine b(load_assets(), std::make_shared<RecordStore>());
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    CHECK(a.create_session(seed).config.loc_plus == b.create_session(seed).config.loc_plus);
}

TEST_CASE("unseeded condition draws are balanced") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  int a = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) a += eng.create_session().config.loc_plus == Offer::A;
  // Two-sided binomial test at alpha = 0.001 (normal approximation, z = 3.29).
  const double z = (a - n * 0.5) / std::sqrt(n * 0.25);
  CHECK(std::abs(z) < 3.29);
}

TEST_CASE("offer presentation follows the assigned condition") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto s = eng.create_session(seed);
    eng.submit_writing(s.session_id, 1, words(25));
    eng.submit_writing(s.session_id, 2, words(150));
    eng.submit_preferences(s.session_id, Phase::pre, pre_responses(), kWeights);
    eng.submit_distraction(s.session_id, 1);
    const auto p = eng.render_offers(s.session_id);
    const Offer fav = s.config.loc_plus;
    CHECK(p.condition == fav);
    CHECK(p.offer_texts.at(fav).find("fun part of town") != std::string::npos);
    CHECK(p.offer_texts.at(other(fav)).find("industrial area") != std::string::npos);
    const auto public_view = presentation_to_json(p, false);
    CHECK_FALSE(public_view.contains("condition"));
    CHECK(presentation_to_json(p, true).contains("condition"));
  }
}

TEST_CASE("record store persists across restarts") {
  const auto dir = fresh_dir("store_restart");
  std::vector<ParticipantRecord> written;
  {
    ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>(dir));
    for (int i = 0; i < 5; ++i) written.push_back(run_session(eng, i, i % 2 ? "A" : "B"));
  }
  RecordStore reopened(dir);
  CHECK(reopened.size() == 5);
  for (const auto& r : written) CHECK(reopened.contains(r.participant_id));
  auto stored = reopened.records();
  std::sort(written.begin(), written.end(),
            [](const auto& a, const auto& b) { return a.participant_id < b.participant_id; });
  CHECK(stored == written);
}

TEST_CASE("a tampered record log is rejected on open") {
  const auto dir = fresh_dir("store_tamper");
  {
    ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>(dir));
    run_session(eng, 1, "A");
  }
  std::ifstream in(dir / "records.ndjson");
  std::string line;
  std::getline(in, line);
  in.close();
  auto j = nlohmann::json::parse(line);
  j["outcome"]["cis"] = j["outcome"]["cis"].get<int>() + 2;
  std::ofstream(dir / "records.ndjson", std::ios::trunc) << j.dump() << "\n";
  try {
    RecordStore broken(dir);
    FAIL("expected integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::integrity);
  }
}

TEST_CASE("export, import and export again is byte-stable") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  for (int i = 0; i < 6; ++i) run_session(eng, i, i % 3 ? "A" : "B");
  const auto first = eng.export_ndjson({true});
  CHECK(std::count(first.begin(), first.end(), '\n') == 6);

  auto store = std::make_shared<RecordStore>();
  CHECK(store->import_ndjson(first) == 6);
  ProtocolEngine eng2(load_assets(), store);
  CHECK(eng2.export_ndjson({true}) == first);
  CHECK(records_to_ndjson(parse_records_ndjson(first)) == first);

  // Ids come out sorted.
  const auto recs = parse_records_ndjson(first);
  for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i - 1].participant_id < recs[i].participant_id);

  // Import is all-or-nothing.
  CHECK_THROWS_AS(store->import_ndjson(first), Error);
  CHECK(store->size() == 6);
}

TEST_CASE("export filter controls sessions in progress") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  run_session(eng, 1, "A");
  const auto open = eng.create_session(2);
  eng.submit_writing(open.session_id, 1, words(25));
  const auto complete = eng.export_records({true});
  const auto all = eng.export_records({false});
  CHECK(complete.size() == 1);
  REQUIRE(all.size() == 2);
  int partial = 0;
  for (const auto& d : all)
    if (d.contains("stage")) {
      ++partial;
      CHECK(d["stage"] == "writing_2");
      CHECK(d["outcome"].is_null());
    }
  CHECK(partial == 1);
}

TEST_CASE("concurrent sessions do not interfere") {
  ProtocolEngine eng(load_assets(), std::make_shared<RecordStore>());
  std::vector<std::thread> threads;
  std::atomic<int> failures{0};
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i) {
        try {
          run_session(eng, t * 100 + i, (i + t) % 2 ? "A" : "B");
        } catch (...) {
          ++failures;
        }
      }
    });
  for (auto& th : threads) th.join();
  CHECK(failures == 0);
  CHECK(eng.store().size() == 100);
  for (const auto& r : eng.store().records()) CHECK_NOTHROW(audit_record(r));
}
