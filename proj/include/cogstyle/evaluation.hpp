#pragma once

// 4-way predictive evaluation: stratified k-fold cross-validation of an
// L2-regularized multinomial logistic regression scored by macro one-vs-rest
// AUC, plus class-vs-rest Cohen's d tables.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cogstyle/features.hpp"
#include "cogstyle/scoring.hpp"

namespace cogstyle {

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> assignment;  // participant id -> fold in [0, k)

  std::vector<std::string> fold_ids(int fold) const;
  std::vector<std::string> training_ids(int fold) const;
};

/// Per-class round-robin dealing after a seeded shuffle. Classes are dealt in
/// ascending label order and each class continues where the previous one
/// stopped, so fold sizes also differ by at most one. A class with fewer than
/// k members is a configuration error naming it.
FoldAssignment stratified_folds(const std::map<std::string, int>& labels, int k, std::uint64_t seed,
                                const std::vector<std::string>& class_names = {});

struct OptimizerOptions {
  double gradient_tolerance = 1e-6;  // on the max-norm of the gradient
  int max_iterations = 1000;
  int memory = 10;                   // L-BFGS history pairs
};

struct LogisticModel {
  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd bias;     // classes
  double lambda = 0.0;
  int fold = -1;
  int iterations = 0;
  double final_loss = 0.0;
  double gradient_max_norm = 0.0;
  bool converged = false;
  std::vector<double> loss_history;  // objective after each accepted step, starting with the initial point
};

/// Objective: sum over rows of multinomial cross-entropy + (lambda/2)||W||^2,
/// bias unregularized. Parameters are packed as [W row-major, b].
double logistic_objective(const Eigen::MatrixXd& x, std::span<const int> y, int classes, double lambda,
                          const Eigen::VectorXd& params, Eigen::VectorXd* gradient);

/// Deterministic full-batch L-BFGS with Armijo backtracking from the zero
/// point. Non-convergence returns the last iterate with converged=false.
LogisticModel fit_logistic(const Eigen::MatrixXd& x, std::span<const int> y, int classes, double lambda,
                           const OptimizerOptions& options = {});

/// Row-wise softmax class probabilities.
Eigen::MatrixXd predict_proba(const LogisticModel& model, const Eigen::MatrixXd& x);

/// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie). Requires both classes.
double binary_auc(std::span<const double> scores, const std::vector<bool>& labels);

/// Unweighted mean over classes of each probability column's one-vs-rest AUC.
double macro_ovr_auc(const Eigen::MatrixXd& probs, std::span<const int> labels,
                     std::vector<double>* per_class = nullptr);

struct CvOptions {
  int k = 5;
  std::uint64_t seed = 0;
  double lambda = 1.0;
  std::size_t pca_components = 0;  // 0: no reduction
  std::string feature_set = "features";
  bool parallel = true;
  OptimizerOptions optimizer;
};

struct EvaluationReport {
  std::string feature_set;
  std::string metric = "macro_ovr_auc";
  std::size_t n = 0;
  int k_folds = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::size_t k_features = 0;
  std::vector<double> per_fold_auc;
  double mean_auc = 0.0;
  std::array<double, kStyleCount> per_class_auc{};
  std::array<std::array<long, kStyleCount>, kStyleCount> confusion{};  // [true][predicted]
  std::vector<int> fold_iterations;
  bool all_converged = true;
  std::vector<std::string> warnings;
};

/// Per fold: z-score (and optionally PCA) fitted on the training rows only,
/// fit, score the held-out rows. Every labeled id must be a table row.
EvaluationReport cross_validate(const FeatureTable& table, const std::map<std::string, CognitiveStyle>& labels,
                                const CvOptions& options);

nlohmann::ordered_json report_to_json(const EvaluationReport& r);
/// `feature_set,AUC,k` rows.
std::string reports_to_table_csv(const std::vector<EvaluationReport>& reports);

/// (mean_in - mean_out) / pooled sample SD. Both groups need >= 2 members and
/// the pooled SD must be positive, else an undefined-metric error.
double cohens_d(std::span<const double> values, const std::vector<bool>& in_class);

struct EffectSizeTable {
  std::vector<std::string> features;
  /// features.size() rows; absent (undefined) cells are nullopt.
  std::vector<std::array<std::optional<double>, kStyleCount>> d;

  std::optional<double> at(const std::string& feature, CognitiveStyle c) const;
};

/// Class-vs-rest d for every (column, class). Only ids present in both
/// arguments are used.
EffectSizeTable effect_size_table(const FeatureTable& table, const std::map<std::string, CognitiveStyle>& labels);

/// `feature,DownCisDownInf,DownCisUpInf,UpCisDownInf,UpCisUpInf`; empty cell when undefined.
std::string effects_to_csv(const EffectSizeTable& t);

}  // namespace cogstyle
