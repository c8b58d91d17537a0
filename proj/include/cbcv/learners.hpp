#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cbcv/common.hpp"
#include "cbcv/data.hpp"

namespace cbcv {

enum class LearnerKind {
  LogReg,
  Tree,
  Forest,
  /// Debug learner: looks each row up in the reference dataset and returns
  /// its true label. Only for end-to-end null tests of the harness.
  Oracle,
};

const char* to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(std::string_view s);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::LogReg;
  std::map<std::string, double> hyperparams;
  std::uint64_t seed = 0;
  std::string label;

  /// label if set, otherwise the kind name.
  std::string id() const;
  double get(const std::string& name, double fallback) const;
};

/// Throws when a hyperparameter name is not valid for the kind.
void validate(const LearnerSpec& spec);

class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<int> predict(const Matrix& X) const = 0;
  virtual std::size_t n_features() const = 0;
};

struct TrainedModel {
  LearnerKind kind = LearnerKind::LogReg;
  int n_classes = 0;
  std::shared_ptr<const Model> model;
};

/// `reference` is only consulted by the oracle learner.
TrainedModel train(const LearnerSpec& spec, const Matrix& X, std::span<const int> y, int n_classes,
                   const Dataset* reference = nullptr);
std::vector<int> predict(const TrainedModel& model, const Matrix& X);

// --- individual learners, exposed for tests and trace hooks ---

struct LogRegOptions {
  double C = 1.0;
  double learning_rate = 0.1;
  int epochs = 500;
};

/// Called once per epoch with (epoch, regularized loss) of the accepted step.
using LossTrace = std::function<void(int, double)>;

/// Multinomial logistic regression, full-batch gradient descent on
/// mean cross-entropy + ||W||^2 / (2 C n). A step that would raise the loss is
/// retried at half the learning rate.
std::shared_ptr<const Model> train_logreg(const Matrix& X, std::span<const int> y, int n_classes,
                                          const LogRegOptions& options, const LossTrace& trace = {});

struct TreeOptions {
  int max_depth = 50;
  /// Features examined per node; 0 means all.
  std::size_t max_features = 0;
  std::uint64_t seed = 0;
};

std::shared_ptr<const Model> train_tree(const Matrix& X, std::span<const int> y, int n_classes,
                                        const TreeOptions& options);

struct ForestOptions {
  int n_trees = 100;
  int max_depth = 50;
  bool bootstrap = true;
  /// true: floor(sqrt(d)) features per node; false: all features.
  bool sqrt_features = true;
  std::uint64_t seed = 0;
};

std::shared_ptr<const Model> train_forest(const Matrix& X, std::span<const int> y, int n_classes,
                                          const ForestOptions& options);

// --- metrics ---

struct ConfusionCounts {
  int n_classes = 0;
  std::size_t n_eval = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> tp, fp, fn, tn;
};

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred, int n_classes);

double accuracy(const ConfusionCounts& cc);
double precision(const ConfusionCounts& cc, int cls);
double recall(const ConfusionCounts& cc, int cls);
double class_f1(const ConfusionCounts& cc, int cls);

enum class F1Average { Macro, Weighted };

/// Binary: F1 of class 1 (1 when class 1 occurs in neither). Multiclass:
/// macro (or support-weighted) mean over the classes that occur in y_true or
/// y_pred.
double f1_score(const ConfusionCounts& cc, F1Average average = F1Average::Macro);

/// Mean per-class recall; every class must occur in y_true.
double balanced_accuracy(const ConfusionCounts& cc);

enum class MetricKind { Accuracy, F1, BalancedAccuracy };

const char* to_string(MetricKind m);
MetricKind metric_from_string(std::string_view s);
double score(MetricKind metric, const ConfusionCounts& cc, F1Average average = F1Average::Macro);

// --- tuning ---

/// Ordered hyperparameter grid: name -> values. Combinations enumerate with
/// the first entry varying slowest.
using Grid = std::vector<std::pair<std::string, std::vector<double>>>;

Grid default_grid(LearnerKind kind);

struct GridSearchResult {
  LearnerSpec best;
  std::vector<std::pair<std::map<std::string, double>, double>> scores;  // in grid order
};

/// 5-fold stratified CV per combination, scored by mean balanced accuracy;
/// the first best combination wins.
GridSearchResult grid_search(const Dataset& ds, LearnerKind kind, const Grid& grid, std::uint64_t seed,
                             int folds = 5);

}  // namespace cbcv
