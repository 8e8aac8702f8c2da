#include "cogstyle/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cogstyle/errors.hpp"

namespace cogstyle {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// FeatureTable

FeatureTable::FeatureTable(std::vector<FeatureColumn> columns, std::vector<std::string> ids, Eigen::MatrixXd values,
                           std::map<std::string, std::string> meta)
    : columns_(std::move(columns)), meta_(std::move(meta)) {
  if (static_cast<std::size_t>(values.rows()) != ids.size() ||
      static_cast<std::size_t>(values.cols()) != columns_.size())
    fail(ErrorKind::validation, "feature table is not rectangular: " + std::to_string(values.rows()) + "x" +
                                    std::to_string(values.cols()) + " values for " + std::to_string(ids.size()) +
                                    " ids and " + std::to_string(columns_.size()) + " columns");
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (c.name.empty()) fail(ErrorKind::validation, "empty column name", "column");
    if (c.name == "participant_id") fail(ErrorKind::validation, "reserved column name participant_id", c.name);
    if (!names.insert(c.name).second) fail(ErrorKind::validation, "duplicate column name " + c.name, c.name);
  }
  if (!values.allFinite()) fail(ErrorKind::validation, "feature table contains non-finite values");

  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (ids[order[i]] == ids[order[i - 1]])
      fail(ErrorKind::validation, "duplicate participant id " + ids[order[i]], "participant_id");
  ids_.reserve(ids.size());
  values_.resize(values.rows(), values.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ids_.push_back(std::move(ids[order[i]]));
    values_.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(order[i]));
  }
}

std::size_t FeatureTable::row_of(const std::string& id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return npos;
  return static_cast<std::size_t>(it - ids_.begin());
}

FeatureTable FeatureTable::select_rows(const std::vector<std::string>& ids) const {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(ids.size()), values_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = row_of(ids[i]);
    if (r == npos) fail(ErrorKind::validation, "participant " + ids[i] + " not in table", "participant_id");
    v.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(r));
  }
  return FeatureTable(columns_, ids, std::move(v), meta_);
}

FeatureTable FeatureTable::select_columns(const std::vector<std::string>& names) const {
  std::vector<FeatureColumn> cols;
  Eigen::MatrixXd v(values_.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    auto it = std::find_if(columns_.begin(), columns_.end(), [&](const auto& c) { return c.name == names[j]; });
    if (it == columns_.end()) fail(ErrorKind::validation, "unknown column " + names[j], names[j]);
    cols.push_back(*it);
    v.col(static_cast<Eigen::Index>(j)) = values_.col(it - columns_.begin());
  }
  return FeatureTable(std::move(cols), ids_, std::move(v), meta_);
}

FeatureTable FeatureTable::with_meta(std::string key, std::string value) const {
  auto m = meta_;
  m[std::move(key)] = std::move(value);
  return FeatureTable(columns_, ids_, values_, std::move(m));
}

std::vector<std::size_t> all_rows(const FeatureTable& t) {
  std::vector<std::size_t> r(t.rows());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// ---------------------------------------------------------------------------
// Aggregation

double aggregate_proportion(const std::vector<bool>& flags) {
  if (flags.empty()) fail(ErrorKind::undefined_metric, "proportion of an empty unit list is undefined");
  const auto n = std::count(flags.begin(), flags.end(), true);
  return static_cast<double>(n) / static_cast<double>(flags.size());
}

double aggregate_mean_probability(std::span<const double> probs) {
  if (probs.empty()) fail(ErrorKind::undefined_metric, "mean of an empty probability list is undefined");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::validation, "probability " + format_double(p) + " outside [0,1]", "value");
    sum += p;
  }
  return sum / static_cast<double>(probs.size());
}

std::vector<double> average_embeddings(const std::vector<std::vector<double>>& vectors) {
  if (vectors.empty()) fail(ErrorKind::undefined_metric, "mean of an empty embedding list is undefined");
  const std::size_t dim = vectors.front().size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != dim)
      fail(ErrorKind::validation,
           "embedding dimension mismatch: " + std::to_string(v.size()) + " vs " + std::to_string(dim), "value");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += v[i];
  }
  for (auto& m : mean) m /= static_cast<double>(vectors.size());
  return mean;
}

std::string_view to_string(AnnotationKind k) {
  switch (k) {
    case AnnotationKind::causal_flag: return "causal_flag";
    case AnnotationKind::counterfactual_flag: return "counterfactual_flag";
    case AnnotationKind::dissonance_prob: return "dissonance_prob";
    case AnnotationKind::consonance_prob: return "consonance_prob";
    case AnnotationKind::relation_embedding: return "relation_embedding";
  }
  return "?";
}

AnnotationKind annotation_kind_from_string(std::string_view s) {
  for (auto k : {AnnotationKind::causal_flag, AnnotationKind::counterfactual_flag, AnnotationKind::dissonance_prob,
                 AnnotationKind::consonance_prob, AnnotationKind::relation_embedding})
    if (to_string(k) == s) return k;
  fail(ErrorKind::validation, "unknown annotation kind '" + std::string(s) + "'", "kind");
}

std::vector<MessageUnitAnnotation> parse_annotations_ndjson(const std::string& text) {
  std::vector<MessageUnitAnnotation> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      MessageUnitAnnotation a;
      a.participant_id = j.at("participant_id").get<std::string>();
      a.unit_index = j.at("unit_index").get<int>();
      a.kind = annotation_kind_from_string(j.at("kind").get<std::string>());
      const auto& v = j.at("value");
      switch (a.kind) {
        case AnnotationKind::causal_flag:
        case AnnotationKind::counterfactual_flag: a.value = v.get<bool>(); break;
        case AnnotationKind::dissonance_prob:
        case AnnotationKind::consonance_prob: {
          const double p = v.get<double>();
          if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::validation, "probability outside [0,1]", "value");
          a.value = p;
          break;
        }
        case AnnotationKind::relation_embedding: a.value = v.get<std::vector<double>>(); break;
      }
      out.push_back(std::move(a));
    } catch (const json::exception& e) {
      fail(ErrorKind::parse, "annotations line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      fail(e.kind(), "annotations line " + std::to_string(lineno) + ": " + e.what(), e.field());
    }
  }
  return out;
}

std::vector<FeatureTable> aggregate_annotations(const std::vector<MessageUnitAnnotation>& annotations,
                                                std::vector<std::string>* excluded) {
  // kind -> participant -> unit values (ordered by participant; unit order
  // does not matter since every aggregate is permutation-invariant)
  std::map<AnnotationKind, std::map<std::string, std::vector<const MessageUnitAnnotation*>>> grouped;
  std::set<std::string> everyone;
  for (const auto& a : annotations) {
    grouped[a.kind][a.participant_id].push_back(&a);
    everyone.insert(a.participant_id);
  }

  std::vector<FeatureTable> out;
  for (const auto& [kind, by_participant] : grouped) {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    for (const auto& [pid, units] : by_participant) {
      switch (kind) {
        case AnnotationKind::causal_flag:
        case AnnotationKind::counterfactual_flag: {
          std::vector<bool> flags;
          for (const auto* u : units) flags.push_back(std::get<bool>(u->value));
          rows.push_back({aggregate_proportion(flags)});
          break;
        }
        case AnnotationKind::dissonance_prob:
        case AnnotationKind::consonance_prob: {
          std::vector<double> probs;
          for (const auto* u : units) probs.push_back(std::get<double>(u->value));
          rows.push_back({aggregate_mean_probability(probs)});
          break;
        }
        case AnnotationKind::relation_embedding: {
          std::vector<std::vector<double>> vecs;
          for (const auto* u : units) vecs.push_back(std::get<std::vector<double>>(u->value));
          rows.push_back(average_embeddings(vecs));
          break;
        }
      }
      ids.push_back(pid);
    }
    std::vector<FeatureColumn> cols;
    std::string provenance(to_string(kind));
    switch (kind) {
      case AnnotationKind::causal_flag: cols.push_back({"causal", provenance}); break;
      case AnnotationKind::counterfactual_flag: cols.push_back({"counterfactual", provenance}); break;
      case AnnotationKind::dissonance_prob: cols.push_back({"dissonance", provenance}); break;
      case AnnotationKind::consonance_prob: cols.push_back({"consonance", provenance}); break;
      case AnnotationKind::relation_embedding:
        for (std::size_t i = 0; i < rows.front().size(); ++i) cols.push_back({"discre_" + std::to_string(i), provenance});
        for (const auto& r : rows)
          if (r.size() != rows.front().size())
            fail(ErrorKind::validation, "relation embeddings differ in dimension across participants", "value");
        break;
    }
    Eigen::MatrixXd v(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols.size(); ++j) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    if (excluded) {
      for (const auto& pid : everyone)
        if (!by_participant.count(pid)) excluded->push_back(std::string(to_string(kind)) + ":" + pid);
    }
    out.emplace_back(std::move(cols), std::move(ids), std::move(v), std::map<std::string, std::string>{{"aggregation", provenance}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitted transforms

namespace {

void require_rows(std::span<const std::size_t> rows, Eigen::Index n, const char* what) {
  if (rows.empty()) fail(ErrorKind::validation, std::string(what) + ": fit subset is empty", "rows");
  for (auto r : rows)
    if (static_cast<Eigen::Index>(r) >= n) fail(ErrorKind::validation, std::string(what) + ": row index out of range", "rows");
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

Standardizer Standardizer::fit(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  require_rows(rows, x.rows(), "standardize");
  const Eigen::MatrixXd sub = gather(x, rows);
  Standardizer s;
  s.mean = sub.colwise().mean();
  s.sd = Eigen::RowVectorXd::Zero(x.cols());
  if (sub.rows() > 1) {
    const Eigen::MatrixXd centered = sub.rowwise() - s.mean;
    s.sd = (centered.colwise().squaredNorm() / static_cast<double>(sub.rows() - 1)).cwiseSqrt();
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (sd(j) > 0.0)
      out.col(j) = (x.col(j).array() - mean(j)) / sd(j);
    else
      out.col(j).setZero();
  }
  return out;
}

PcaModel PcaModel::fit(const Eigen::MatrixXd& x, std::span<const std::size_t> rows, std::size_t k) {
  require_rows(rows, x.rows(), "reduce_dimensions");
  if (k == 0 || k > static_cast<std::size_t>(x.cols()))
    fail(ErrorKind::validation, "PCA k must be in 1.." + std::to_string(x.cols()), "k");
  const Eigen::MatrixXd sub = gather(x, rows);
  PcaModel m;
  m.requested = k;
  m.mean = sub.colwise().mean();
  const Eigen::MatrixXd centered = sub.rowwise() - m.mean;
  const double denom = std::max<double>(1.0, static_cast<double>(sub.rows() - 1));

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = sv.size() ? sv(0) * 1e-10 * static_cast<double>(std::max(sub.rows(), x.cols())) : 0.0;
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(sv.size()) && sv(static_cast<Eigen::Index>(rank)) > tol && sv(static_cast<Eigen::Index>(rank)) > 0.0)
    ++rank;
  const auto keep = static_cast<Eigen::Index>(std::min(k, rank));
  m.components = svd.matrixV().leftCols(keep);
  m.explained_variance = sv.head(keep).array().square() / denom;
  for (Eigen::Index c = 0; c < keep; ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < m.components.rows(); ++i) {
      const double a = std::abs(m.components(i, c));
      if (a > best + 1e-12) {
        best = a;
        arg = i;
      }
    }
    if (m.components(arg, c) < 0.0) m.components.col(c) *= -1.0;
  }
  return m;
}

Eigen::MatrixXd PcaModel::apply(const Eigen::MatrixXd& x) const { return (x.rowwise() - mean) * components; }

Eigen::MatrixXd PcaModel::reconstruct(const Eigen::MatrixXd& scores) const {
  return (scores * components.transpose()).rowwise() + mean;
}

FeatureTable reduce_dimensions(const FeatureTable& table, std::size_t k, std::span<const std::size_t> fit_rows) {
  const auto model = PcaModel::fit(table.values(), fit_rows, k);
  std::vector<FeatureColumn> cols;
  for (Eigen::Index c = 0; c < model.components.cols(); ++c)
    cols.push_back({"pc_" + std::to_string(c), "pca"});
  auto meta = table.meta();
  meta["reduction"] = "pca:k=" + std::to_string(k) + ";fit_rows=" + std::to_string(fit_rows.size()) +
                      ";sign=largest_loading_positive";
  if (static_cast<std::size_t>(model.components.cols()) < k)
    meta["warning"] = "covariance rank " + std::to_string(model.components.cols()) + " < k=" + std::to_string(k);
  return FeatureTable(std::move(cols), table.ids(), model.apply(table.values()), std::move(meta));
}

FeatureTable join_features(const std::vector<FeatureTable>& tables, std::vector<std::string>* dropped) {
  if (tables.empty()) return {};
  std::vector<FeatureColumn> cols;
  std::set<std::string> names;
  std::map<std::string, std::string> meta;
  for (const auto& t : tables) {
    for (const auto& c : t.columns()) {
      if (!names.insert(c.name).second) fail(ErrorKind::validation, "duplicate column name " + c.name + " in join", c.name);
      cols.push_back(c);
    }
    for (const auto& [k, v] : t.meta()) meta[k] = meta.count(k) && meta[k] != v ? meta[k] + ";" + v : v;
  }
  std::set<std::string> all_ids;
  for (const auto& t : tables) all_ids.insert(t.ids().begin(), t.ids().end());
  std::vector<std::string> kept;
  for (const auto& id : all_ids) {
    bool everywhere = true;
    for (const auto& t : tables) everywhere = everywhere && t.row_of(id) != FeatureTable::npos;
    if (everywhere)
      kept.push_back(id);
    else if (dropped)
      dropped->push_back(id);
  }
  Eigen::MatrixXd v(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Eigen::Index offset = 0;
    for (const auto& t : tables) {
      v.block(static_cast<Eigen::Index>(i), offset, 1, t.values().cols()) =
          t.values().row(static_cast<Eigen::Index>(t.row_of(kept[i])));
      offset += t.values().cols();
    }
  }
  const std::size_t n_dropped = all_ids.size() - kept.size();
  if (n_dropped) meta["dropped_rows"] = std::to_string(n_dropped);
  if (kept.empty() && !all_ids.empty()) meta["warning"] = "join produced no rows: participant id sets are disjoint";
  return FeatureTable(std::move(cols), std::move(kept), std::move(v), std::move(meta));
}

FeatureTable standardize(const FeatureTable& table, std::span<const std::size_t> stats_rows) {
  const auto s = Standardizer::fit(table.values(), stats_rows);
  return FeatureTable(table.columns(), table.ids(), s.apply(table.values()), table.meta());
}

// ---------------------------------------------------------------------------
// CSV interchange

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::filesystem::path manifest_path_for(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".manifest.json");
  return p;
}

FeatureTable parse_feature_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::parse, source + ": empty feature file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "participant_id")
    fail(ErrorKind::parse, source + ": header must start with participant_id");
  std::vector<FeatureColumn> cols;
  for (std::size_t j = 1; j < header.size(); ++j) cols.push_back({header[j], source});

  std::vector<std::string> ids;
  std::vector<double> flat;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      fail(ErrorKind::parse, source + " line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(fields.size()));
    ids.push_back(fields[0]);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      const auto& f = fields[j];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        fail(ErrorKind::parse, source + " line " + std::to_string(lineno) + ": column " + header[j] +
                                   ": not a finite number: '" + f + "'",
             header[j]);
      flat.push_back(v);
    }
  }
  Eigen::MatrixXd v(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * cols.size() + j];
  return FeatureTable(std::move(cols), std::move(ids), std::move(v));
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::configuration, "cannot open feature file " + path.string(), path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto table = parse_feature_csv(ss.str(), path.stem().string());

  const auto mpath = manifest_path_for(path);
  if (!std::filesystem::exists(mpath)) return table;
  std::ifstream min(mpath);
  json m;
  try {
    m = json::parse(min);
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, "manifest " + mpath.string() + ": " + e.what());
  }
  std::vector<std::string> names;
  for (const auto& c : table.columns()) names.push_back(c.name);
  if (m.contains("columns") && m["columns"].get<std::vector<std::string>>() != names)
    fail(ErrorKind::validation, "manifest " + mpath.string() + " column list does not match CSV header", "columns");
  const std::string extractor = m.value("extractor", path.stem().string());
  std::vector<FeatureColumn> cols;
  for (const auto& n : names) cols.push_back({n, extractor});
  std::map<std::string, std::string> meta;
  for (const char* k : {"extractor", "model", "version", "segmentation"})
    if (m.contains(k) && m[k].is_string()) meta[k] = m[k].get<std::string>();
  return FeatureTable(std::move(cols), table.ids(), table.values(), std::move(meta));
}

std::string format_feature_csv(const FeatureTable& table) {
  std::string out = "participant_id";
  for (const auto& c : table.columns()) out += "," + csv_field(c.name);
  out += "\n";
  for (std::size_t i = 0; i < table.rows(); ++i) {
    out += csv_field(table.ids()[i]);
    for (std::size_t j = 0; j < table.cols(); ++j)
      out += "," + format_double(table.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out += "\n";
  }
  return out;
}

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path, const std::string& extractor,
                       const std::string& model, const std::string& version) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::runtime, "cannot write " + path.string());
    out << format_feature_csv(table);
  }
  nlohmann::ordered_json m;
  m["extractor"] = extractor;
  m["model"] = model;
  m["version"] = version;
  std::vector<std::string> names;
  for (const auto& c : table.columns()) names.push_back(c.name);
  m["columns"] = names;
  std::ofstream mout(manifest_path_for(path), std::ios::binary);
  if (!mout) fail(ErrorKind::runtime, "cannot write manifest for " + path.string());
  mout << m.dump(2) << "\n";
}

}  // namespace cogstyle
