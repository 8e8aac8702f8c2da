#include "cogstyle/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <future>
#include <numeric>
#include <set>

#include "cogstyle/errors.hpp"
#include "cogstyle/rng.hpp"

namespace cogstyle {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Folds

std::vector<std::string> FoldAssignment::fold_ids(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment)
    if (f == fold) out.push_back(id);
  return out;
}

std::vector<std::string> FoldAssignment::training_ids(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment)
    if (f != fold) out.push_back(id);
  return out;
}

FoldAssignment stratified_folds(const std::map<std::string, int>& labels, int k, std::uint64_t seed,
                                const std::vector<std::string>& class_names) {
  if (k < 2) fail(ErrorKind::configuration, "number of folds must be at least 2", "k");
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& [id, c] : labels) by_class[c].push_back(id);  // ids arrive sorted
  for (const auto& [c, ids] : by_class) {
    if (static_cast<int>(ids.size()) < k) {
      const std::string name = c >= 0 && static_cast<std::size_t>(c) < class_names.size() ? class_names[c]
                                                                                          : std::to_string(c);
      fail(ErrorKind::configuration,
           "class " + name + " has " + std::to_string(ids.size()) + " members, fewer than k=" + std::to_string(k),
           name);
    }
  }
  Rng rng(seed);
  FoldAssignment out;
  out.k = k;
  int next = 0;
  for (auto& [c, ids] : by_class) {
    rng.shuffle(ids);
    for (const auto& id : ids) {
      out.assignment[id] = next;
      next = (next + 1) % k;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

void unpack(const Eigen::VectorXd& p, int classes, Eigen::Index features, Eigen::MatrixXd& w, Eigen::VectorXd& b) {
  w.resize(classes, features);
  for (int c = 0; c < classes; ++c)
    for (Eigen::Index j = 0; j < features; ++j) w(c, j) = p(c * features + j);
  b = p.tail(classes);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z, Eigen::VectorXd* lse) {
  Eigen::MatrixXd p(z.rows(), z.cols());
  if (lse) lse->resize(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    double s = 0.0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      p(i, c) = std::exp(z(i, c) - m);
      s += p(i, c);
    }
    p.row(i) /= s;
    if (lse) (*lse)(i) = m + std::log(s);
  }
  return p;
}

}  // namespace

double logistic_objective(const Eigen::MatrixXd& x, std::span<const int> y, int classes, double lambda,
                          const Eigen::VectorXd& params, Eigen::VectorXd* gradient) {
  const Eigen::Index n = x.rows(), f = x.cols();
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
  unpack(params, classes, f, w, b);
  Eigen::MatrixXd z = x * w.transpose();
  z.rowwise() += b.transpose();
  Eigen::VectorXd lse;
  Eigen::MatrixXd p = softmax_rows(z, &lse);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) loss += lse(i) - z(i, y[i]);
  loss += 0.5 * lambda * w.squaredNorm();
  if (gradient) {
    for (Eigen::Index i = 0; i < n; ++i) p(i, y[i]) -= 1.0;  // p is now P - Y
    const Eigen::MatrixXd gw = p.transpose() * x + lambda * w;
    const Eigen::VectorXd gb = p.colwise().sum().transpose();
    gradient->resize(params.size());
    for (int c = 0; c < classes; ++c)
      for (Eigen::Index j = 0; j < f; ++j) (*gradient)(c * f + j) = gw(c, j);
    gradient->tail(classes) = gb;
  }
  return loss;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, std::span<const int> y, int classes, double lambda,
                           const OptimizerOptions& opt) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    fail(ErrorKind::validation, "feature rows and labels differ in length", "y");
  if (classes < 2) fail(ErrorKind::validation, "need at least two classes", "classes");
  if (!x.allFinite()) fail(ErrorKind::validation, "non-finite feature value", "X");
  if (!std::isfinite(lambda) || lambda < 0.0) fail(ErrorKind::validation, "lambda must be finite and >= 0", "lambda");
  for (int v : y)
    if (v < 0 || v >= classes) fail(ErrorKind::validation, "label outside 0.." + std::to_string(classes - 1), "y");

  const Eigen::Index dim = classes * x.cols() + classes;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim), g(dim), g_new(dim);
  double fval = logistic_objective(x, y, classes, lambda, theta, &g);

  LogisticModel model;
  model.lambda = lambda;
  model.loss_history.push_back(fval);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  constexpr double c1 = 1e-4;

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) break;

    // Two-loop recursion.
    Eigen::VectorXd d = -g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }

    double slope = g.dot(d);
    if (!(slope < 0.0) || !d.allFinite()) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope = -g.squaredNorm();
    }
    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;

    bool accepted = false;
    double f_new = fval;
    Eigen::VectorXd candidate;
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      candidate = theta + step * d;
      f_new = logistic_objective(x, y, classes, lambda, candidate, &g_new);
      if (std::isfinite(f_new) && f_new <= fval + c1 * step * slope && f_new < fval) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!s_hist.empty()) {  // retry once along steepest descent
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        --it;
        continue;
      }
      break;  // stalled at machine precision
    }

    Eigen::VectorXd s = candidate - theta;
    Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    theta = std::move(candidate);
    g = g_new;
    fval = f_new;
    model.loss_history.push_back(fval);
  }

  unpack(theta, classes, x.cols(), model.weights, model.bias);
  model.iterations = static_cast<int>(model.loss_history.size()) - 1;
  model.final_loss = fval;
  model.gradient_max_norm = g.lpNorm<Eigen::Infinity>();
  model.converged = model.gradient_max_norm < opt.gradient_tolerance;
  return model;
}

Eigen::MatrixXd predict_proba(const LogisticModel& model, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x * model.weights.transpose();
  z.rowwise() += model.bias.transpose();
  return softmax_rows(z, nullptr);
}

// ---------------------------------------------------------------------------
// AUC

double binary_auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) fail(ErrorKind::validation, "scores and labels differ in length", "labels");
  const auto n = scores.size();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(scores[i])) fail(ErrorKind::validation, "NaN score", "scores");
    n_pos += labels[i];
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorKind::undefined_metric, "AUC needs both positive and negative examples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Tie groups get the average of their 1-based ranks; ranks are half-integers,
  // so sums stay exact in double for any realistic n.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]]) rank_sum += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double macro_ovr_auc(const Eigen::MatrixXd& probs, std::span<const int> labels, std::vector<double>* per_class) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size())
    fail(ErrorKind::validation, "probability rows and labels differ in length", "labels");
  double sum = 0.0;
  if (per_class) per_class->clear();
  std::vector<double> col(labels.size());
  std::vector<bool> is_c(labels.size());
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col[i] = probs(static_cast<Eigen::Index>(i), c);
      is_c[i] = labels[i] == c;
    }
    const double auc = binary_auc(col, is_c);
    if (per_class) per_class->push_back(auc);
    sum += auc;
  }
  return sum / static_cast<double>(probs.cols());
}

// ---------------------------------------------------------------------------
// Cross-validation

namespace {

struct FoldResult {
  double auc = 0.0;
  std::vector<double> per_class;
  std::vector<std::size_t> test_rows;
  Eigen::MatrixXd probs;
  int iterations = 0;
  bool converged = true;
  std::size_t k_features = 0;
  std::string warning;
};

FoldResult run_fold(const Eigen::MatrixXd& x, const std::vector<int>& y, const std::vector<std::size_t>& train,
                    const std::vector<std::size_t>& test, int fold, const CvOptions& opt) {
  FoldResult r;
  r.test_rows = test;
  const auto scaler = Standardizer::fit(x, train);
  Eigen::MatrixXd z = scaler.apply(x);
  if (opt.pca_components > 0) {
    const auto pca = PcaModel::fit(z, train, opt.pca_components);
    if (static_cast<std::size_t>(pca.components.cols()) < opt.pca_components)
      r.warning = "fold " + std::to_string(fold) + ": covariance rank " + std::to_string(pca.components.cols()) +
                  " < k=" + std::to_string(opt.pca_components);
    z = pca.apply(z);
  }
  r.k_features = static_cast<std::size_t>(z.cols());
  Eigen::MatrixXd x_train(static_cast<Eigen::Index>(train.size()), z.cols());
  std::vector<int> y_train;
  for (std::size_t i = 0; i < train.size(); ++i) {
    x_train.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(train[i]));
    y_train.push_back(y[train[i]]);
  }
  auto model = fit_logistic(x_train, y_train, static_cast<int>(kStyleCount), opt.lambda, opt.optimizer);
  model.fold = fold;
  r.iterations = model.iterations;
  r.converged = model.converged;

  Eigen::MatrixXd x_test(static_cast<Eigen::Index>(test.size()), z.cols());
  std::vector<int> y_test;
  for (std::size_t i = 0; i < test.size(); ++i) {
    x_test.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(test[i]));
    y_test.push_back(y[test[i]]);
  }
  r.probs = predict_proba(model, x_test);
  r.auc = macro_ovr_auc(r.probs, y_test, &r.per_class);
  return r;
}

}  // namespace

EvaluationReport cross_validate(const FeatureTable& table, const std::map<std::string, CognitiveStyle>& labels,
                                const CvOptions& opt) {
  std::vector<std::string> class_names;
  for (auto c : kStyles) class_names.emplace_back(to_string(c));
  std::map<std::string, int> int_labels;
  std::array<int, kStyleCount> counts{};
  for (const auto& [id, c] : labels) {
    int_labels[id] = static_cast<int>(index_of(c));
    ++counts[index_of(c)];
  }
  for (auto c : kStyles)
    if (counts[index_of(c)] == 0)
      fail(ErrorKind::configuration, "class " + std::string(to_string(c)) + " has no members", std::string(to_string(c)));
  if (opt.lambda < 0.0 || !std::isfinite(opt.lambda)) fail(ErrorKind::configuration, "lambda must be >= 0", "lambda");

  const auto folds = stratified_folds(int_labels, opt.k, opt.seed, class_names);

  std::vector<std::string> ids;
  std::vector<int> y;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(table.cols()));
  for (const auto& [id, c] : int_labels) {
    const auto r = table.row_of(id);
    if (r == FeatureTable::npos) fail(ErrorKind::validation, "labeled participant " + id + " has no feature row", id);
    x.row(static_cast<Eigen::Index>(ids.size())) = table.values().row(static_cast<Eigen::Index>(r));
    ids.push_back(id);
    y.push_back(c);
  }

  std::vector<std::vector<std::size_t>> train(opt.k), test(opt.k);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int f = folds.assignment.at(ids[i]);
    for (int j = 0; j < opt.k; ++j) (j == f ? test[j] : train[j]).push_back(i);
  }

  std::vector<FoldResult> results(opt.k);
  if (opt.parallel) {
    std::vector<std::future<FoldResult>> futures;
    for (int f = 0; f < opt.k; ++f)
      futures.push_back(std::async(std::launch::async, run_fold, std::cref(x), std::cref(y), std::cref(train[f]),
                                   std::cref(test[f]), f, std::cref(opt)));
    for (int f = 0; f < opt.k; ++f) results[f] = futures[f].get();
  } else {
    for (int f = 0; f < opt.k; ++f) results[f] = run_fold(x, y, train[f], test[f], f, opt);
  }

  EvaluationReport rep;
  rep.feature_set = opt.feature_set;
  rep.n = ids.size();
  rep.k_folds = opt.k;
  rep.seed = opt.seed;
  rep.lambda = opt.lambda;
  rep.k_features = results.front().k_features;
  double sum = 0.0;
  for (int f = 0; f < opt.k; ++f) {
    const auto& r = results[f];
    rep.per_fold_auc.push_back(r.auc);
    sum += r.auc;
    for (std::size_t c = 0; c < kStyleCount; ++c) rep.per_class_auc[c] += r.per_class[c] / opt.k;
    for (std::size_t i = 0; i < r.test_rows.size(); ++i) {
      Eigen::Index pred = 0;
      r.probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
      ++rep.confusion[y[r.test_rows[i]]][pred];
    }
    rep.fold_iterations.push_back(r.iterations);
    if (!r.converged) {
      rep.all_converged = false;
      rep.warnings.push_back("fold " + std::to_string(f) + ": optimizer stopped before convergence");
    }
    if (!r.warning.empty()) rep.warnings.push_back(r.warning);
    rep.k_features = std::min(rep.k_features, r.k_features);
  }
  rep.mean_auc = sum / opt.k;
  return rep;
}

ordered_json report_to_json(const EvaluationReport& r) {
  ordered_json j;
  j["feature_set"] = r.feature_set;
  j["metric"] = r.metric;
  j["aggregation"] = "unweighted mean over classes of one-vs-rest AUC";
  j["n"] = r.n;
  j["folds"] = r.k_folds;
  j["seed"] = r.seed;
  j["lambda"] = r.lambda;
  j["k_features"] = r.k_features;
  j["per_fold_auc"] = r.per_fold_auc;
  j["mean_auc"] = r.mean_auc;
  ordered_json pc;
  for (auto c : kStyles) pc[std::string(to_string(c))] = r.per_class_auc[index_of(c)];
  j["per_class_auc"] = pc;
  ordered_json conf = ordered_json::array();
  for (const auto& row : r.confusion) conf.push_back(row);
  j["confusion"] = conf;
  j["class_order"] = {"DownCisDownInf", "DownCisUpInf", "UpCisDownInf", "UpCisUpInf"};
  j["fold_iterations"] = r.fold_iterations;
  j["all_converged"] = r.all_converged;
  j["warnings"] = r.warnings;
  return j;
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string reports_to_table_csv(const std::vector<EvaluationReport>& reports) {
  std::string out = "feature_set,AUC,k\n";
  for (const auto& r : reports) out += r.feature_set + "," + fixed4(r.mean_auc) + "," + std::to_string(r.k_features) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Effect sizes

double cohens_d(std::span<const double> values, const std::vector<bool>& in_class) {
  if (values.size() != in_class.size()) fail(ErrorKind::validation, "values and group flags differ in length", "in_class");
  // Extended precision keeps small spreads on large offsets accurate.
  long double sum1 = 0.0L, sum0 = 0.0L;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (in_class[i]) {
      sum1 += values[i];
      ++n1;
    } else {
      sum0 += values[i];
      ++n0;
    }
  }
  if (n1 < 2 || n0 < 2) fail(ErrorKind::undefined_metric, "Cohen's d needs at least two members in each group");
  const long double m1 = sum1 / n1, m0 = sum0 / n0;
  long double ss1 = 0.0L, ss0 = 0.0L;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const long double dv = values[i] - (in_class[i] ? m1 : m0);
    (in_class[i] ? ss1 : ss0) += dv * dv;
  }
  const long double pooled = std::sqrt((ss1 + ss0) / static_cast<long double>(n1 + n0 - 2));
  if (!(pooled > 0.0L)) fail(ErrorKind::undefined_metric, "pooled standard deviation is zero");
  return static_cast<double>((m1 - m0) / pooled);
}

std::optional<double> EffectSizeTable::at(const std::string& feature, CognitiveStyle c) const {
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i] == feature) return d[i][index_of(c)];
  return std::nullopt;
}

EffectSizeTable effect_size_table(const FeatureTable& table, const std::map<std::string, CognitiveStyle>& labels) {
  std::vector<std::size_t> rows;
  std::vector<CognitiveStyle> cls;
  for (const auto& [id, c] : labels) {
    const auto r = table.row_of(id);
    if (r == FeatureTable::npos) continue;
    rows.push_back(r);
    cls.push_back(c);
  }
  EffectSizeTable out;
  std::vector<double> vals(rows.size());
  std::vector<bool> member(rows.size());
  for (std::size_t j = 0; j < table.cols(); ++j) {
    out.features.push_back(table.columns()[j].name);
    std::array<std::optional<double>, kStyleCount> row{};
    for (std::size_t i = 0; i < rows.size(); ++i)
      vals[i] = table.values()(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(j));
    for (auto c : kStyles) {
      for (std::size_t i = 0; i < rows.size(); ++i) member[i] = cls[i] == c;
      try {
        row[index_of(c)] = cohens_d(vals, member);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::undefined_metric) throw;
      }
    }
    out.d.push_back(row);
  }
  return out;
}

std::string effects_to_csv(const EffectSizeTable& t) {
  std::string out = "feature";
  for (auto c : kStyles) out += "," + std::string(to_string(c));
  out += "\n";
  for (std::size_t i = 0; i < t.features.size(); ++i) {
    out += t.features[i];
    for (const auto& v : t.d[i]) out += "," + (v ? fixed4(*v) : std::string());
    out += "\n";
  }
  return out;
}

}  // namespace cogstyle
