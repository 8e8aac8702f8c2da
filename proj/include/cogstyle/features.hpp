#pragma once

// Participant-by-feature matrices, aggregation of per-unit extractor output,
// and the training-subset-only transforms (z-scoring, PCA) used inside
// cross-validation.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace cogstyle {

struct FeatureColumn {
  std::string name;
  std::string provenance;  // extractor or transform that produced the column
  friend bool operator==(const FeatureColumn&, const FeatureColumn&) = default;
};

/// Immutable, rectangular table. Rows are kept sorted by participant id.
class FeatureTable {
 public:
  FeatureTable() = default;
  /// Validates shape, duplicate column names, duplicate ids and finiteness;
  /// rows are re-sorted by id.
  FeatureTable(std::vector<FeatureColumn> columns, std::vector<std::string> ids, Eigen::MatrixXd values,
               std::map<std::string, std::string> meta = {});

  const std::vector<FeatureColumn>& columns() const { return columns_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }
  std::size_t rows() const { return ids_.size(); }
  std::size_t cols() const { return columns_.size(); }

  /// Row index of `id`, or npos.
  std::size_t row_of(const std::string& id) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  FeatureTable select_rows(const std::vector<std::string>& ids) const;
  FeatureTable select_columns(const std::vector<std::string>& names) const;
  FeatureTable with_meta(std::string key, std::string value) const;

 private:
  std::vector<FeatureColumn> columns_;
  std::vector<std::string> ids_;
  Eigen::MatrixXd values_;
  std::map<std::string, std::string> meta_;
};

// ---- per-unit aggregation ---------------------------------------------------

/// Fraction of true flags. Empty input is an undefined-metric error.
double aggregate_proportion(const std::vector<bool>& flags);
/// Arithmetic mean of probabilities in [0,1].
double aggregate_mean_probability(std::span<const double> probs);
/// Elementwise mean of equal-length vectors.
std::vector<double> average_embeddings(const std::vector<std::vector<double>>& vectors);

enum class AnnotationKind { causal_flag, counterfactual_flag, dissonance_prob, consonance_prob, relation_embedding };

std::string_view to_string(AnnotationKind k);
AnnotationKind annotation_kind_from_string(std::string_view s);

struct MessageUnitAnnotation {
  std::string participant_id;
  int unit_index = 0;
  AnnotationKind kind = AnnotationKind::causal_flag;
  std::variant<bool, double, std::vector<double>> value;
};

/// Parses the sidecar's per-unit NDJSON
/// ({"participant_id","unit_index","kind","value"} per line).
std::vector<MessageUnitAnnotation> parse_annotations_ndjson(const std::string& text);

/// One table per kind present: causal / counterfactual proportions,
/// dissonance / consonance mean probabilities, discre_<i> mean embedding.
/// Participants lacking units for a kind are absent from that table and
/// listed in `excluded`.
std::vector<FeatureTable> aggregate_annotations(const std::vector<MessageUnitAnnotation>& annotations,
                                                std::vector<std::string>* excluded = nullptr);

// ---- fitted transforms ----------------------------------------------------

/// Column means and sample SDs computed on a subset of rows.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd sd;  // zero for constant (or single-row) columns

  static Standardizer fit(const Eigen::MatrixXd& x, std::span<const std::size_t> rows);
  /// Columns with zero SD map to 0.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// Principal components fitted on a subset of rows. Each component's
/// largest-magnitude loading is positive (first index wins ties).
struct PcaModel {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;          // features x k, orthonormal columns
  Eigen::VectorXd explained_variance;  // descending
  std::size_t requested = 0;           // k asked for; > components.cols() when rank-deficient

  static PcaModel fit(const Eigen::MatrixXd& x, std::span<const std::size_t> rows, std::size_t k);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& scores) const;
};

/// Rows/columns of a table as index lists.
std::vector<std::size_t> all_rows(const FeatureTable& t);

/// Projects every row onto k principal components fitted on `fit_rows`.
/// Rank below k yields rank columns and a "warning" meta entry.
FeatureTable reduce_dimensions(const FeatureTable& table, std::size_t k, std::span<const std::size_t> fit_rows);

/// Inner join on participant id; duplicate column names are a validation
/// error. Dropped ids are reported through `dropped` and the "dropped_rows" meta entry.
FeatureTable join_features(const std::vector<FeatureTable>& tables, std::vector<std::string>* dropped = nullptr);

/// Z-scores every column with statistics from `stats_rows` only.
FeatureTable standardize(const FeatureTable& table, std::span<const std::size_t> stats_rows);

// ---- interchange ------------------------------------------------------------

/// Wide CSV: header `participant_id,<name>...`, '.' decimal point, no NaN.
FeatureTable read_feature_csv(const std::filesystem::path& path);
FeatureTable parse_feature_csv(const std::string& text, const std::string& source = "<memory>");
std::string format_feature_csv(const FeatureTable& table);
/// Writes the CSV and its `<stem>.manifest.json` sibling.
void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path,
                       const std::string& extractor = "cogstyle", const std::string& model = "none",
                       const std::string& version = "1");
std::filesystem::path manifest_path_for(const std::filesystem::path& csv_path);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// RFC-4180 style field splitting and quoting for one line.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_field(const std::string& s);

}  // namespace cogstyle
