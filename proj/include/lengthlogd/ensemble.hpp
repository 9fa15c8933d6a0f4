#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lengthlogd/dataset.hpp"
#include "lengthlogd/descriptors.hpp"
#include "lengthlogd/learners.hpp"

namespace lengthlogd {

// --- weights ------------------------------------------------------------------

/// Base-model weights in LR, RF, XGB order.
struct FixedWeights {
  double lr = 1.0 / 3.0;
  double rf = 1.0 / 3.0;
  double xgb = 1.0 / 3.0;

  std::array<double, 3> as_array() const { return {lr, rf, xgb}; }
  bool operator==(const FixedWeights&) const = default;
};

/// w_i = (1/e_i) / sum_j (1/e_j). If any error is zero, the zero-error
/// models share the weight equally. Throws DataError on negative or
/// non-finite errors.
FixedWeights inverse_error_weights(const std::array<double, 3>& errors);

/// w_lr *= alpha, then renormalize. Throws ConfigError for alpha < 1.
FixedWeights apply_adaptive(const FixedWeights& w, double alpha);

// --- base models ----------------------------------------------------------------

struct BaseModels {
  RidgeModel lr;
  ForestModel rf;
  GbtModel xgb;

  /// Predictions on an already scaled row.
  std::array<double, 3> predict_row(std::span<const double> row) const;
};

struct BaseConfigs {
  RidgeConfig lr;
  ForestConfig rf;
  GbtConfig xgb;
};

BaseModels fit_bases(const BaseConfigs& configs, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Validation MAE of each base model, then inverse-error weights.
/// Throws DataError on an empty validation split.
FixedWeights fit_fixed_weights(const BaseModels& bases, const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val);

/// Fold id of each of n rows: a seeded shuffle dealt round-robin into k
/// folds. Throws ConfigError unless 2 <= k <= n.
std::vector<int> assign_folds(std::size_t n, int k, std::uint64_t seed);

/// n x 3 matrix of out-of-fold predictions of the three bases.
Eigen::MatrixXd out_of_fold_predictions(const BaseConfigs& configs, const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y, std::span<const int> folds);

struct MetaFit {
  RidgeModel meta;
  std::vector<double> lambda_mse;  // cross-validated MSE per candidate lambda
};

/// Ridge over the base-prediction columns; the penalty is the candidate with
/// the lowest cross-validated MSE over `folds` (ties go to the larger one).
MetaFit fit_meta(const Eigen::MatrixXd& oof, const Eigen::VectorXd& y, std::span<const int> folds,
                 std::span<const double> lambdas);

struct StackingFit {
  BaseModels bases;  // refit on all rows
  MetaFit meta;
  Eigen::MatrixXd oof;
  std::vector<int> folds;
};

inline constexpr std::array<double, 3> kDefaultMetaLambdas{0.01, 0.1, 1.0};

StackingFit fit_stacking(const BaseConfigs& configs, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         int k_folds, std::uint64_t seed, std::span<const double> lambdas = kDefaultMetaLambdas);

// --- category and full model -----------------------------------------------------

enum class EnsembleMode : std::uint8_t { kStacking, kFixed };
std::string_view mode_name(EnsembleMode m);  // "stacking", "fixed"
EnsembleMode parse_mode(std::string_view s);  // throws ConfigError

struct CategoryModel {
  Category category = Category::kShort;
  Scaler scaler;
  BaseModels bases;
  RidgeModel meta;
  FixedWeights fixed;           // inverse-error weights
  double adaptive_alpha = 1.0;  // 1 except for the Long category
  FixedWeights weights;         // fixed weights after the adaptive step
  EnsembleMode mode = EnsembleMode::kStacking;
};

struct EnsembleOutput {
  double value = 0.0;
  std::array<double, 3> bases{};
};

/// `row` is unscaled, in schema order. Throws DataError on a size mismatch.
EnsembleOutput predict_ensemble(const CategoryModel& m, std::span<const double> row, EnsembleMode mode);
inline EnsembleOutput predict_ensemble(const CategoryModel& m, std::span<const double> row) {
  return predict_ensemble(m, row, m.mode);
}

/// Ensemble output from base predictions alone.
double combine(const CategoryModel& m, const std::array<double, 3>& bases, EnsembleMode mode);

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;
  std::size_t n_records = 0;
  std::string config_echo;
};

struct LengthLogDModel {
  static constexpr int kFormatVersion = 1;

  FeatureSchema schema;
  LengthThresholds thresholds;
  std::array<CategoryModel, 3> categories;
  bool impute_missing = false;
  ExternalValues imputation;  // training means of external columns
  TrainingMetadata metadata;

  const CategoryModel& model_for(Category c) const { return categories[static_cast<std::size_t>(c)]; }
};

struct Prediction {
  Category category = Category::kShort;
  int smiles_length = 0;
  double logd = 0.0;
  std::array<double, 3> bases{};
};

/// Features in model schema order; missing externals are imputed when the
/// model allows it.
std::vector<double> model_features(const LengthLogDModel& model, const MolecularGraph& graph,
                                   const ExternalValues& external);

Prediction predict_graph(const LengthLogDModel& model, const MolecularGraph& graph, const ExternalValues& external,
                         std::optional<EnsembleMode> mode = std::nullopt);

/// Parses the SMILES, routes by its length and runs the category model.
/// Throws SmilesError on a parse failure and DataError on schema problems.
Prediction predict_logd(const LengthLogDModel& model, std::string_view smiles, const ExternalValues& external,
                        std::optional<EnsembleMode> mode = std::nullopt);

// --- training ------------------------------------------------------------------------

/// Feature rows of all records under the full schema. Missing external
/// cells hold NaN; they are imputed at fit time from training rows.
struct FeatureTable {
  FeatureSchema schema;
  Eigen::MatrixXd x;
};

FeatureTable build_feature_table(std::span<const Record> records, const FeatureSchema& schema);

struct BaseGrids {
  std::vector<RidgeConfig> lr{{0.0}, {0.01}, {0.1}, {1.0}, {10.0}};
  std::vector<ForestConfig> rf{ForestConfig{}};
  std::vector<GbtConfig> xgb{GbtConfig{}};
};

struct PipelineConfig {
  BaseGrids grids;
  int k_folds = 5;
  std::vector<double> meta_lambdas{kDefaultMetaLambdas.begin(), kDefaultMetaLambdas.end()};
  double alpha = 1.5;
  EnsembleMode mode = EnsembleMode::kStacking;
  std::uint64_t seed = 0;
  std::vector<FeatureGroup> excluded;
  bool impute_missing = false;
};

struct CategoryFitInfo {
  Category category = Category::kShort;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  bool merged_fallback = false;
  bool oof_weights = false;  // no validation rows: weights from OOF errors
  BaseConfigs chosen;
  std::array<double, 3> base_errors{};  // MAE behind the fixed weights
  double meta_lambda = 0.0;
  std::array<double, 2> val_mae{};      // stacking, fixed (NaN without validation rows)
};

struct PipelineFit {
  LengthLogDModel model;
  std::array<CategoryFitInfo, 3> info;
  std::vector<std::string> warnings;
  /// Records (indices into data.records) each category model was fit on.
  std::array<std::vector<std::size_t>, 3> train_rows;
};

/// Fits the three category models of `data` on its training split, with
/// validation rows used for grid search and inverse-error weights. `table`
/// rows align with data.records. Forest and GBT seeds are derived from
/// config.seed and the category, overriding the seeds in the grids. A category with fewer training rows than
/// k_folds is fit on the merged training split instead, with a warning.
PipelineFit fit_pipeline(const StratifiedDataset& data, const FeatureTable& table, const PipelineConfig& config);

/// Columns of `table` named by `schema`, rows in `rows` order. NaN cells
/// take the value from `impute` (when given and holding the column);
/// otherwise they raise DataError.
Eigen::MatrixXd select_columns(const FeatureTable& table, const FeatureSchema& schema,
                               std::span<const std::size_t> rows, const ExternalValues* impute = nullptr);

/// select_columns with the model's schema and imputation.
Eigen::MatrixXd select_features(const FeatureTable& table, const LengthLogDModel& model,
                                std::span<const std::size_t> rows);

/// Means of the external columns of `schema` over `rows`, ignoring NaN.
/// Throws DataError for a column with no value among them.
ExternalValues fit_table_imputation(const FeatureTable& table, const FeatureSchema& schema,
                                    std::span<const std::size_t> rows);

/// Best config of a grid and its model fit on all training rows. Uses the
/// validation rows when there are any, otherwise out-of-fold MAE over
/// `folds` (a one-entry grid is taken as is).
std::pair<LearnerConfig, LearnerModel> select_learner(std::span<const LearnerConfig> grid, const Eigen::MatrixXd& xt,
                                                      const Eigen::VectorXd& yt, const Eigen::MatrixXd& xv,
                                                      const Eigen::VectorXd& yv, std::span<const int> folds);

}  // namespace lengthlogd
