#include "cogstyle/protocol.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

namespace cogstyle {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::writing_1: return "writing_1";
    case Stage::writing_2: return "writing_2";
    case Stage::pre_prefs: return "pre_prefs";
    case Stage::distraction: return "distraction";
    case Stage::offer_view: return "offer_view";
    case Stage::choice: return "choice";
    case Stage::post_prefs: return "post_prefs";
    case Stage::complete: return "complete";
  }
  return "?";
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

ordered_json writing_to_json(const WritingResponse& w) {
  return {{"stage", w.stage == 1 ? "writing_1" : "writing_2"}, {"text", w.text}, {"word_count", w.word_count}};
}

}  // namespace

ordered_json session_to_json(const SessionState& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["stage"] = to_string(s.stage);
  j["created_at"] = s.created_at;
  j["updated_at"] = s.updated_at;
  return j;
}

ordered_json presentation_to_json(const OfferPresentation& p, bool include_condition) {
  ordered_json j;
  j["offer_texts"] = {{"A", p.offer_texts.at(Offer::A)}, {"B", p.offer_texts.at(Offer::B)}};
  j["companies"] = {{"A", p.companies.at(Offer::A)}, {"B", p.companies.at(Offer::B)}};
  if (include_condition) j["condition"] = to_string(p.condition);
  return j;
}

// ---------------------------------------------------------------------------
// RecordStore

RecordStore::RecordStore(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::runtime, "cannot create store directory " + dir.string() + ": " + ec.message());
  path_ = dir / "records.ndjson";
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    for (auto& r : parse_records_ndjson(ss.str())) {
      audit_record(r);
      const auto id = r.participant_id;
      if (!index_.emplace(id, std::move(r)).second)
        fail(ErrorKind::integrity, "duplicate participant id in store: " + id, id);
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(ErrorKind::runtime, "cannot open record log " + path_.string() + ": " + std::strerror(errno));
}

RecordStore::~RecordStore() {
  if (fd_ >= 0) {
    ::fsync(fd_);
    ::close(fd_);
  }
}

void RecordStore::append_locked(const ParticipantRecord& r) {
  if (index_.count(r.participant_id))
    fail(ErrorKind::validation, "participant id already stored: " + r.participant_id, "participant_id");
  if (fd_ >= 0) {
    const std::string line = record_to_line(r) + "\n";
    const ssize_t n = ::write(fd_, line.data(), line.size());
    if (n != static_cast<ssize_t>(line.size()))
      fail(ErrorKind::runtime, "record log append failed: " + std::string(std::strerror(errno)));
  }
  index_.emplace(r.participant_id, r);
}

void RecordStore::append(const ParticipantRecord& r) {
  audit_record(r);
  std::unique_lock lock(mutex_);
  append_locked(r);
}

bool RecordStore::contains(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return index_.count(id) > 0;
}

std::vector<ParticipantRecord> RecordStore::records() const {
  std::shared_lock lock(mutex_);
  std::vector<ParticipantRecord> out;
  out.reserve(index_.size());
  for (const auto& [id, r] : index_) out.push_back(r);
  return out;
}

std::size_t RecordStore::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

std::size_t RecordStore::import_ndjson(const std::string& text) {
  auto incoming = parse_records_ndjson(text);
  for (const auto& r : incoming) audit_record(r);
  std::unique_lock lock(mutex_);
  std::map<std::string, int> seen;
  for (const auto& r : incoming)
    if (index_.count(r.participant_id) || seen[r.participant_id]++)
      fail(ErrorKind::validation, "duplicate participant id on import: " + r.participant_id, "participant_id");
  for (const auto& r : incoming) append_locked(r);
  return incoming.size();
}

void RecordStore::flush() {
  std::unique_lock lock(mutex_);
  if (fd_ >= 0 && ::fsync(fd_) != 0)
    fail(ErrorKind::runtime, "record log fsync failed: " + std::string(std::strerror(errno)));
}

std::vector<ParticipantRecord> parse_records_ndjson(const std::string& text) {
  std::vector<ParticipantRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::parse, "line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      out.push_back(record_from_json(j));
    } catch (const Error& e) {
      fail(e.kind(), "line " + std::to_string(lineno) + ": " + e.what(), e.field());
    }
  }
  return out;
}

std::string records_to_ndjson(const std::vector<ParticipantRecord>& records) {
  std::vector<const ParticipantRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](auto* a, auto* b) { return a->participant_id < b->participant_id; });
  std::string out;
  for (const auto* r : sorted) out += record_to_line(*r) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// ProtocolEngine

ProtocolEngine::ProtocolEngine(ProtocolAssets assets, std::shared_ptr<RecordStore> store)
    : assets_(std::move(assets)), store_(std::move(store)), entropy_(Rng::from_entropy()) {
  if (!store_) store_ = std::make_shared<RecordStore>();
}

std::string ProtocolEngine::fresh_token(std::size_t bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::lock_guard lock(entropy_mutex_);
  std::string out;
  while (out.size() < 2 * bytes) {
    std::uint64_t x = entropy_.next_u64();
    for (int i = 0; i < 16 && out.size() < 2 * bytes; ++i, x >>= 4) out += kHex[x & 0xf];
  }
  return out;
}

std::shared_ptr<ProtocolEngine::Slot> ProtocolEngine::slot(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorKind::not_found, "unknown session " + id, "session_id");
  return it->second;
}

void ProtocolEngine::require_stage(const SessionState& s, Stage expected, std::string_view op) {
  if (s.stage != expected)
    fail(ErrorKind::state,
         std::string(op) + " requires stage " + std::string(to_string(expected)) + ", session is at " +
             std::string(to_string(s.stage)),
         "stage");
}

void ProtocolEngine::touch(SessionState& s) { s.updated_at = utc_now(); }

SessionState ProtocolEngine::create_session(std::optional<std::uint64_t> seed) {
  auto slot = std::make_shared<Slot>();
  auto& s = slot->state;
  if (seed) {
    Rng rng(*seed);
    s.config.loc_plus = (rng.next_u64() >> 63) ? Offer::B : Offer::A;
  } else {
    std::lock_guard lock(entropy_mutex_);
    s.config.loc_plus = (entropy_.next_u64() >> 63) ? Offer::B : Offer::A;
  }
  s.seed = seed;
  s.stage = Stage::writing_1;
  s.created_at = s.updated_at = utc_now();
  s.participant_id = "P" + fresh_token(8);
  std::unique_lock lock(sessions_mutex_);
  do {
    s.session_id = fresh_token(16);
  } while (sessions_.count(s.session_id));
  sessions_.emplace(s.session_id, slot);
  return s;
}

SessionState ProtocolEngine::session(const std::string& id) const {
  auto sl = slot(id);
  std::lock_guard lock(sl->mutex);
  return sl->state;
}

Stage ProtocolEngine::stage(const std::string& id) const { return session(id).stage; }

SessionState ProtocolEngine::submit_writing(const std::string& id, int which, const std::string& text) {
  if (which != 1 && which != 2) fail(ErrorKind::validation, "writing stage must be 1 or 2", "stage");
  auto sl = slot(id);
  std::lock_guard lock(sl->mutex);
  auto& s = sl->state;
  require_stage(s, which == 1 ? Stage::writing_1 : Stage::writing_2, "submit_writing");
  const auto& bounds = assets_.writing[which - 1];
  const int n = count_words(text);
  if (n < bounds.min_words || n > bounds.max_words)
    throw WordCountError("writing " + std::to_string(which) + " has " + std::to_string(n) + " words; expected " +
                             std::to_string(bounds.min_words) + "-" + std::to_string(bounds.max_words),
                         n, bounds.min_words, bounds.max_words);
  s.writings.push_back(WritingResponse{which, text, n});
  s.stage = which == 1 ? Stage::writing_2 : Stage::pre_prefs;
  touch(s);
  return s;
}

SessionState ProtocolEngine::submit_preferences(const std::string& id, Phase phase,
                                                const std::map<std::string, int>& responses,
                                                const std::map<std::string, int>& weights) {
  auto sl = slot(id);
  std::lock_guard lock(sl->mutex);
  auto& s = sl->state;
  require_stage(s, phase == Phase::pre ? Stage::pre_prefs : Stage::post_prefs, "submit_preferences");
  if (phase == Phase::post && s.post) fail(ErrorKind::state, "post-decision preferences already submitted", "stage");

  // Expected item set for the phase.
  std::vector<std::string> expected;
  for (const auto& q : assets_.items)
    if (q.scored() || phase == Phase::pre) expected.push_back(q.id);
  for (const auto& [item, v] : responses) {
    if (std::find(expected.begin(), expected.end(), item) == expected.end())
      fail(ErrorKind::validation, "unexpected item '" + item + "' for the " + std::string(to_string(phase)) + " phase",
           item);
  }
  std::map<Attribute, std::pair<int, int>> ratings;
  std::map<std::string, int> fillers;
  for (const auto& item : expected) {
    auto it = responses.find(item);
    if (it == responses.end()) fail(ErrorKind::validation, "missing response for item " + item, item);
    PreferenceValue checked(it->second, item);
    const auto* q = assets_.find_item(item);
    if (q->scored()) {
      auto& r = ratings[*q->attribute];
      (*q->pole == Pole::plus ? r.first : r.second) = checked.value();
    } else {
      fillers[item] = checked.value();
    }
  }
  std::map<Attribute, int> weight_map;
  for (const auto& [name, w] : weights) {
    Attribute a;
    try {
      a = attribute_from_string(name);
    } catch (const Error&) {
      fail(ErrorKind::validation, "unexpected weight '" + name + "'", "weight." + name);
    }
    weight_map[a] = w;
  }
  auto snapshot = PreferenceSnapshot::from_maps(phase, ratings, weight_map, fillers);
  if (phase == Phase::pre) {
    s.pre = std::move(snapshot);
    s.stage = Stage::distraction;
  } else {
    s.post = std::move(snapshot);
  }
  touch(s);
  return s;
}

SessionState ProtocolEngine::submit_distraction(const std::string& id, std::optional<int> score) {
  auto sl = slot(id);
  std::lock_guard lock(sl->mutex);
  auto& s = sl->state;
  require_stage(s, Stage::distraction, "submit_distraction");
  if (score && (*score < 0 || *score > assets_.distraction_max_score))
    fail(ErrorKind::validation,
         "distraction score must be within 0.." + std::to_string(assets_.distraction_max_score), "score");
  s.distraction_score = score;
  s.stage = Stage::offer_view;
  touch(s);
  return s;
}

OfferPresentation ProtocolEngine::render_offers(const std::string& id) {
  auto sl = slot(id);
  std::lock_guard lock(sl->mutex);
  auto& s = sl->state;
  if (s.stage != Stage::offer_view && s.stage != Stage::choice) require_stage(s, Stage::offer_view, "render_offers");
  OfferPresentation p;
  p.condition = s.config.loc_plus;
  for (auto o : {Offer::A, Offer::B}) {
    p.offer_texts[o] = assets_.offer_text(o, o == s.config.loc_plus);
    p.companies[o] = assets_.offers.companies.at(o);
  }
  if (s.stage == Stage::offer_view) {
    s.stage = Stage::choice;
    touch(s);
  }
  return p;
}

SessionState ProtocolEngine::submit_choice(const std::string& id, const std::string& offer) {
  auto sl = slot(id);
  std::lock_guard lock(sl->mutex);
  auto& s = sl->state;
  require_stage(s, Stage::choice, "submit_choice");
  s.choice = offer_from_string(offer);
  s.stage = Stage::post_prefs;
  touch(s);
  return s;
}

ParticipantRecord ProtocolEngine::finalize_session(const std::string& id) {
  auto sl = slot(id);
  std::lock_guard lock(sl->mutex);
  auto& s = sl->state;
  require_stage(s, Stage::post_prefs, "finalize_session");
  if (!s.post) fail(ErrorKind::state, "post-decision preferences not yet submitted", "stage");
  ParticipantRecord r{s.participant_id,
                      {s.writings.at(0), s.writings.at(1)},
                      *s.pre,
                      *s.post,
                      s.config,
                      *s.choice,
                      compute_outcome(*s.pre, *s.post, *s.choice, s.config),
                      s.distraction_score};
  store_->append(r);
  s.stage = Stage::complete;
  touch(s);
  return r;
}

std::vector<ordered_json> ProtocolEngine::export_records(ExportFilter filter) const {
  std::map<std::string, ordered_json> docs;
  for (const auto& r : store_->records()) docs.emplace(r.participant_id, record_to_json(r));
  if (!filter.complete_only) {
    std::vector<std::shared_ptr<Slot>> slots;
    {
      std::shared_lock lock(sessions_mutex_);
      for (const auto& [id, sl] : sessions_) slots.push_back(sl);
    }
    for (const auto& sl : slots) {
      SessionState s;
      {
        std::lock_guard lock(sl->mutex);
        s = sl->state;
      }
      if (s.stage == Stage::complete) continue;
      ordered_json j;
      j["participant_id"] = s.participant_id;
      ordered_json writings = ordered_json::array();
      for (const auto& w : s.writings) writings.push_back(writing_to_json(w));
      j["writings"] = std::move(writings);
      j["pre"] = s.pre ? snapshot_to_json(*s.pre) : ordered_json(nullptr);
      j["post"] = s.post ? snapshot_to_json(*s.post) : ordered_json(nullptr);
      j["config"] = config_to_json(s.config);
      j["choice"] = s.choice ? ordered_json(to_string(*s.choice)) : ordered_json(nullptr);
      j["outcome"] = nullptr;
      j["distraction_score"] = s.distraction_score ? ordered_json(*s.distraction_score) : ordered_json(nullptr);
      j["stage"] = to_string(s.stage);
      docs.emplace(s.participant_id, std::move(j));
    }
  }
  std::vector<ordered_json> out;
  out.reserve(docs.size());
  for (auto& [id, d] : docs) out.push_back(std::move(d));
  return out;
}

std::string ProtocolEngine::export_ndjson(ExportFilter filter) const {
  std::string out;
  for (const auto& d : export_records(filter)) out += d.dump() + "\n";
  return out;
}

}  // namespace cogstyle
