#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lengthlogd/dataset.hpp"
#include "lengthlogd/ensemble.hpp"

namespace lengthlogd {

// --- metrics ------------------------------------------------------------------

/// R^2 reported when y_true is constant but the predictions miss it.
inline constexpr double kR2Sentinel = -1e30;

struct Metrics {
  std::size_t n = 0;
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double r = 0.0;   // Pearson correlation
  double r2 = 0.0;  // 1 - SS_res / SS_tot
  bool r_undefined = false;   // a side has zero variance; r reported as 0
  bool r2_guarded = false;    // y_true constant with nonzero residuals; r2 = kR2Sentinel

  bool operator==(const Metrics&) const = default;
};

/// Throws DataError on a length mismatch or empty input.
Metrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred);

/// Mean and population standard deviation of each field over a list.
struct MetricsSummary {
  Metrics mean;
  Metrics sd;
};
MetricsSummary summarize(std::span<const Metrics> list);

// --- report tables ----------------------------------------------------------------

/// Text, real number or count. Reals print in full precision in CSV and
/// rounded in text tables.
using Cell = std::variant<std::string, double, long long>;

struct ReportTable {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  std::string to_csv() const;
  /// Columns padded to equal width, separated by two spaces.
  std::string to_text() const;
};

/// Shortest round-trip text for CSV cells.
std::string csv_number(double v);
/// Four decimals for text tables; scientific notation for huge magnitudes.
std::string text_number(double v);

// --- pipeline evaluation -----------------------------------------------------------------

struct PredictionRecord {
  std::size_t row = 0;  // index into the dataset's records
  Category category = Category::kShort;
  double truth = 0.0;
  std::array<double, 2> ensemble{};  // stacking, fixed
  std::array<double, 3> bases{};
};

struct CategoryEval {
  Category category = Category::kShort;
  std::size_t n = 0;
  std::array<Metrics, 2> metrics{};  // stacking, fixed; unset when n == 0
};

struct PipelineEval {
  std::array<CategoryEval, 3> categories{};
  std::array<Metrics, 2> pooled{};  // all categories' predictions concatenated
  std::vector<PredictionRecord> predictions;

  /// Category, n, then R^2 / MAE / MSE for both ensembles, plus a pooled row.
  ReportTable table() const;
  /// id-free scatter data: row, category, truth, stacking, fixed, LR, RF, XGB.
  ReportTable scatter(std::span<const Record> records) const;
};

/// Routes each record of `rows` by the model thresholds and scores both
/// ensemble modes. `table` rows align with `records`.
PipelineEval evaluate_pipeline(const LengthLogDModel& model, std::span<const Record> records,
                               const FeatureTable& table, std::span<const std::size_t> rows);

// --- cross-validation ---------------------------------------------------------------------

struct CvOptions {
  int k = 5;
  int repeats = 3;
  std::uint64_t seed = 0;
  double val_fraction = 0.15;  // share of the training folds held for validation
  ThresholdPolicy policy = ThresholdPolicy::kTrain;
};

struct CvFold {
  int repeat = 0;
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::array<Metrics, 2> metrics{};  // stacking, fixed
};

struct CvResult {
  std::vector<CvFold> folds;
  std::vector<std::array<Metrics, 2>> repeats;  // pooled out-of-fold predictions per repeat
  std::array<MetricsSummary, 2> summary{};      // over folds x repeats
  std::vector<std::string> warnings;

  ReportTable table() const;
};

/// Repeated k-fold CV of the whole pipeline. In every fold the thresholds,
/// imputation, scalers and models are fit on the training folds only, and
/// this is re-checked against a recomputation after each fit (a mismatch
/// throws std::logic_error). `table` rows align with `records`.
CvResult cross_validate(std::span<const Record> records, const FeatureTable& table, const PipelineConfig& config,
                        const CvOptions& options);

// --- ablation ----------------------------------------------------------------------------

enum class AblationPreset : std::uint8_t { kFull, kNoGraph, kNoExternal, kBaseOnly };
inline constexpr AblationPreset kAllPresets[] = {AblationPreset::kFull, AblationPreset::kNoGraph,
                                                 AblationPreset::kNoExternal, AblationPreset::kBaseOnly};
std::string_view preset_name(AblationPreset p);   // full, no_graph, no_external, base_only
std::string_view preset_label(AblationPreset p);  // "Full Feature", ...
AblationPreset parse_preset(std::string_view s);  // throws ConfigError
std::vector<FeatureGroup> preset_exclusions(AblationPreset p);

struct AblationRow {
  std::string preset;
  std::string model;
  std::size_t n_features = 0;
  Metrics test;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  ReportTable table() const;
};

/// One row per (preset, learner) trained on the pooled training split with
/// the preset's groups removed, plus one row for the full stratified
/// pipeline in fixed-weight mode (pooled test predictions).
/// `full_fit`, when given, must be fit_pipeline(data, table, config) with no
/// exclusions and is reused for the pipeline row.
AblationResult run_ablation(const StratifiedDataset& data, const FeatureTable& table, const PipelineConfig& config,
                            std::span<const AblationPreset> presets = kAllPresets,
                            std::span<const LearnerKind> kinds = kLearnerKinds, const PipelineFit* full_fit = nullptr);

/// Test metrics of one learner kind trained without stratification.
Metrics pooled_learner_metrics(const StratifiedDataset& data, const FeatureTable& table, const PipelineConfig& config,
                               LearnerKind kind, std::span<const FeatureGroup> excluded, std::size_t* n_features = nullptr);

// --- baseline comparison ---------------------------------------------------------------------

struct ComparisonRow {
  std::string model;
  std::string mode;  // ensemble mode for the stratified rows
  Metrics test;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;
  ReportTable table() const;  // model, mode, R2, MAE, RMSE
};

/// LR / RF / XGB trained pooled with config.excluded removed, then the
/// per-category test metrics of the stratified model. Each category reports
/// the ensemble mode with the lower MAE on its validation rows (the model's
/// own mode when it has none).
ComparisonResult run_baseline_comparison(const StratifiedDataset& data, const FeatureTable& table,
                                         const PipelineConfig& config, const LengthLogDModel& model);

// --- feature importance ----------------------------------------------------------------------

enum class SourceBucket : std::uint8_t { kExternal, kGraph, kGlobal, kFingerprint };
inline constexpr std::array<SourceBucket, 4> kSourceBuckets{SourceBucket::kExternal, SourceBucket::kGraph,
                                                            SourceBucket::kGlobal, SourceBucket::kFingerprint};
std::string_view bucket_name(SourceBucket b);
SourceBucket bucket_of(FeatureGroup g);

struct ImportanceEntry {
  std::string name;
  FeatureGroup group = FeatureGroup::kMorgan;
  double impurity = 0.0;
  double permutation = 0.0;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> features;  // schema order
  std::vector<std::size_t> top;           // top-k by impurity (ties: lower index first)
  std::array<double, 4> bucket_shares{};  // impurity share of each bucket within the top-k

  ReportTable top_table() const;
  ReportTable share_table() const;
};

/// Impurity importance: per-tree SSE reduction per feature, normalized per
/// tree and averaged. Permutation importance: mean increase in validation
/// MSE over `shuffles` seeded permutations of each column (exactly 0 for
/// columns no tree splits on). `x_val` is scaled like the forest's input.
ImportanceReport feature_importance(const ForestModel& forest, const FeatureSchema& schema,
                                    const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val, std::size_t top_k,
                                    std::uint64_t seed, int shuffles = 10);

}  // namespace lengthlogd
