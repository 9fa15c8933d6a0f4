#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace lengthlogd {

// --- ridge -------------------------------------------------------------------

struct RidgeModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double lambda = 0.0;
};

struct RidgeFitReport {
  bool dual = false;  // solved in sample space (p > n)
  bool jitter_applied = false;
  double jitter = 0.0;
};

/// Minimizes |y - Xw - b|^2 + lambda |w|^2 with an unpenalized intercept
/// (X and y are centered first). Cholesky of X'X + lambda I, or of
/// XX' + lambda I when there are more columns than rows. If the factorization
/// fails or is near-singular, 1e-10 * trace / dim is added to the diagonal
/// and the report says so.
RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                     RidgeFitReport* report = nullptr);
Eigen::VectorXd predict(const RidgeModel& m, const Eigen::MatrixXd& x);
double predict_row(const RidgeModel& m, std::span<const double> row);

// --- trees -------------------------------------------------------------------

/// Regression tree as parallel node arrays; node 0 is the root. A leaf has
/// feature == -1. Rows go left when x[feature] <= threshold.
struct RegressionTree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;  // leaf prediction (node mean for inner nodes)
  std::vector<double> gain;   // SSE reduction of the split, 0 for leaves
  std::vector<int> samples;

  std::size_t node_count() const { return feature.size(); }
  int depth() const;
  double predict(std::span<const double> row) const;
  /// Index of the leaf reached by `row`.
  int leaf_of(std::span<const double> row) const;
};

struct TreeConfig {
  int max_depth = -1;  // -1 = unbounded
  int min_leaf = 1;
  int m_features = 0;  // features tried per node; 0 = all
};

class Rng;

/// Grows a CART tree on the rows listed in `rows` (repeats allowed, as in a
/// bootstrap). Split candidates are midpoints between consecutive distinct
/// values; gain ties go to the lowest feature index, then the lowest
/// threshold. With m_features > 0 the candidate features of each node are
/// drawn from `rng`.
RegressionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                        const TreeConfig& config, Rng* rng = nullptr);

// --- ensembles of trees --------------------------------------------------------

struct ForestConfig {
  int n_trees = 300;
  int max_depth = -1;
  int min_leaf = 2;
  int m_features = 0;  // 0 = ceil(p / 3)
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  int n_features = 0;
  int m_features = 0;
};

/// Each tree sees a bootstrap sample drawn from derive_seed(seed, "forest", {t}).
/// Rows are put in a canonical order first, so the model does not depend on
/// the order of the training rows.
ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestConfig& config);
double predict_row(const ForestModel& m, std::span<const double> row);

struct GbtConfig {
  int rounds = 300;
  double eta = 0.05;
  int max_depth = 4;
  int min_leaf = 5;
  double subsample = 0.8;
  std::uint64_t seed = 0;
};

struct GbtModel {
  double base_score = 0.0;
  double eta = 0.05;
  std::vector<RegressionTree> trees;
  int n_features = 0;
};

/// Squared-loss gradient boosting. Each round grows a tree on the residuals
/// of a row subsample, then sets every leaf to the mean residual of all
/// training rows reaching it. A round that would not lower the training MSE
/// contributes zero. `train_mse`, when given, receives the training MSE
/// before the first round and after every round.
GbtModel fit_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtConfig& config,
                 std::vector<double>* train_mse = nullptr);
double predict_row(const GbtModel& m, std::span<const double> row);

// --- uniform interface -----------------------------------------------------------

enum class LearnerKind : std::uint8_t { kLinear, kForest, kGbt };
inline constexpr LearnerKind kLearnerKinds[] = {LearnerKind::kLinear, LearnerKind::kForest, LearnerKind::kGbt};
std::string_view learner_name(LearnerKind k);  // "LR", "RF", "XGB"

struct RidgeConfig {
  double lambda = 0.0;
};

using LearnerConfig = std::variant<RidgeConfig, ForestConfig, GbtConfig>;
using LearnerModel = std::variant<RidgeModel, ForestModel, GbtModel>;

LearnerKind kind_of(const LearnerConfig& c);
LearnerKind kind_of(const LearnerModel& m);

/// Replaces the seed of forest/GBT configs; ridge is unchanged.
LearnerConfig with_seed(LearnerConfig c, std::uint64_t seed);

LearnerModel fit_learner(const LearnerConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
double predict_row(const LearnerModel& m, std::span<const double> row);
Eigen::VectorXd predict(const LearnerModel& m, const Eigen::MatrixXd& x);

/// Ordering used to break validation ties: smaller is simpler.
/// Ridge: larger lambda first; forest: fewer trees, then shallower;
/// GBT: fewer rounds, then shallower.
bool simpler_than(const LearnerConfig& a, const LearnerConfig& b);

struct GridSearchResult {
  std::size_t best_index = 0;
  LearnerConfig best;
  LearnerModel best_model;      // fit on the training rows
  std::vector<double> val_mae;  // per grid entry
};

/// Fits every config on (x_train, y_train) and picks the lowest validation
/// MAE; ties go to the simpler config. Throws ConfigError on an empty grid.
GridSearchResult grid_search(std::span<const LearnerConfig> grid, const Eigen::MatrixXd& x_train,
                             const Eigen::VectorXd& y_train, const Eigen::MatrixXd& x_val,
                             const Eigen::VectorXd& y_val);

/// Row i of x as a contiguous vector.
std::vector<double> row_of(const Eigen::MatrixXd& x, Eigen::Index i);

/// Permutation that sorts rows lexicographically by (x row, y).
std::vector<std::size_t> canonical_row_order(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace lengthlogd
