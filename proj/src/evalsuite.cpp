#include "lengthlogd/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "lengthlogd/csv.hpp"
#include "lengthlogd/errors.hpp"
#include "lengthlogd/random.hpp"

namespace lengthlogd {

// --- metrics ------------------------------------------------------------------

Metrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw DataError(fmt::format("metric inputs differ in length: {} vs {}", y_true.size(), y_pred.size()));
  }
  if (y_true.empty()) throw DataError("metrics need at least one prediction");
  const std::size_t n = y_true.size();
  const double dn = static_cast<double>(n);

  Metrics m;
  m.n = n;
  double mean_t = 0.0, mean_p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = y_pred[i] - y_true[i];
    m.mae += std::abs(d);
    m.mse += d * d;
    mean_t += y_true[i];
    mean_p += y_pred[i];
  }
  const double ss_res = m.mse;
  m.mae /= dn;
  m.mse /= dn;
  m.rmse = std::sqrt(m.mse);
  mean_t /= dn;
  mean_p /= dn;

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = y_true[i] - mean_t;
    const double b = y_pred[i] - mean_p;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  if (sxx > 0.0 && syy > 0.0) {
    m.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  } else {
    m.r_undefined = true;
  }
  if (sxx > 0.0) {
    m.r2 = 1.0 - ss_res / sxx;
  } else if (ss_res == 0.0) {
    m.r2 = 1.0;
  } else {
    m.r2 = kR2Sentinel;
    m.r2_guarded = true;
  }
  return m;
}

MetricsSummary summarize(std::span<const Metrics> list) {
  MetricsSummary s;
  if (list.empty()) return s;
  const double dn = static_cast<double>(list.size());
  constexpr double Metrics::*kFields[] = {&Metrics::mae, &Metrics::mse, &Metrics::rmse, &Metrics::r, &Metrics::r2};
  for (auto f : kFields) {
    double mean = 0.0;
    for (const Metrics& m : list) mean += m.*f;
    mean /= dn;
    double var = 0.0;
    for (const Metrics& m : list) var += (m.*f - mean) * (m.*f - mean);
    s.mean.*f = mean;
    s.sd.*f = std::sqrt(var / dn);
  }
  std::size_t n = 0;
  for (const Metrics& m : list) {
    n += m.n;
    s.mean.r_undefined = s.mean.r_undefined || m.r_undefined;
    s.mean.r2_guarded = s.mean.r2_guarded || m.r2_guarded;
  }
  s.mean.n = n;
  return s;
}

// --- report tables ----------------------------------------------------------------

std::string csv_number(double v) { return format_double(v); }

std::string text_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::abs(v) >= 1e6) return fmt::format("{:.3e}", v);
  return fmt::format("{:.4f}", v);
}

namespace {

template <typename Fmt>
std::string cell_text(const Cell& c, Fmt&& real) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) return real(*d);
  return std::to_string(std::get<long long>(c));
}

}  // namespace

std::string ReportTable::to_csv() const {
  std::string out = csv_line(header);
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (const Cell& c : row) cells.push_back(cell_text(c, csv_number));
    out += csv_line(cells);
  }
  return out;
}

std::string ReportTable::to_text() const {
  std::vector<std::vector<std::string>> grid;
  grid.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    for (const Cell& c : row) cells.push_back(cell_text(c, text_number));
    grid.push_back(std::move(cells));
  }
  std::vector<std::size_t> width;
  for (const auto& row : grid) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
  }
  std::string out;
  for (const auto& row : grid) {
    std::string line;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) line += "  ";
      line += row[j];
      if (j + 1 < row.size()) line.append(width[j] - row[j].size(), ' ');
    }
    out += line;
    out += '\n';
  }
  return out;
}

namespace {

const std::array<std::string_view, 2> kModeColumns{"stacking", "fixed"};

void append_metrics(std::vector<Cell>& row, const Metrics& m, bool with_r = false) {
  if (m.n == 0) {
    row.insert(row.end(), with_r ? 4 : 3, Cell{std::string("-")});
    return;
  }
  row.emplace_back(m.r2);
  if (with_r) row.emplace_back(m.r);
  row.emplace_back(m.mae);
  row.emplace_back(m.mse);
}

std::vector<double> column(const std::vector<PredictionRecord>& p, int which) {
  std::vector<double> v;
  v.reserve(p.size());
  for (const auto& r : p) v.push_back(which < 0 ? r.truth : r.ensemble[static_cast<std::size_t>(which)]);
  return v;
}

std::array<Metrics, 2> score(const std::vector<PredictionRecord>& p) {
  const std::vector<double> truth = column(p, -1);
  return {compute_metrics(truth, column(p, 0)), compute_metrics(truth, column(p, 1))};
}

FeatureTable take_table(const FeatureTable& table, std::span<const std::size_t> rows) {
  FeatureTable out{table.schema, Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), table.x.cols())};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = table.x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

// --- pipeline evaluation -----------------------------------------------------------------

PipelineEval evaluate_pipeline(const LengthLogDModel& model, std::span<const Record> records,
                               const FeatureTable& table, std::span<const std::size_t> rows) {
  if (table.x.rows() != static_cast<Eigen::Index>(records.size())) {
    throw DataError("feature table and records have different row counts");
  }
  PipelineEval ev;
  const Eigen::MatrixXd x = select_features(table, model, rows);
  std::array<std::vector<PredictionRecord>, 3> by_category;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Record& rec = records[rows[i]];
    PredictionRecord p;
    p.row = rows[i];
    p.category = categorize(rec.smiles_length(), model.thresholds);
    p.truth = rec.logd;
    const CategoryModel& cm = model.model_for(p.category);
    std::vector<double> row = row_of(x, static_cast<Eigen::Index>(i));
    apply_scaler_row(cm.scaler, row);
    p.bases = cm.bases.predict_row(row);
    p.ensemble = {combine(cm, p.bases, EnsembleMode::kStacking), combine(cm, p.bases, EnsembleMode::kFixed)};
    by_category[static_cast<std::size_t>(p.category)].push_back(p);
    ev.predictions.push_back(p);
  }
  for (Category c : kCategories) {
    const auto ci = static_cast<std::size_t>(c);
    CategoryEval& ce = ev.categories[ci];
    ce.category = c;
    ce.n = by_category[ci].size();
    if (ce.n > 0) ce.metrics = score(by_category[ci]);
  }
  if (!ev.predictions.empty()) ev.pooled = score(ev.predictions);
  return ev;
}

ReportTable PipelineEval::table() const {
  ReportTable t;
  t.header = {"category", "n"};
  for (std::string_view m : kModeColumns) {
    for (std::string_view f : {"R2", "R", "MAE", "MSE"}) t.header.push_back(fmt::format("{}_{}", m, f));
  }
  auto add = [&](std::string name, std::size_t n, const std::array<Metrics, 2>& ms) {
    std::vector<Cell> row{std::move(name), static_cast<long long>(n)};
    for (const Metrics& m : ms) append_metrics(row, m, true);
    t.rows.push_back(std::move(row));
  };
  for (const CategoryEval& ce : categories) add(std::string(category_name(ce.category)), ce.n, ce.metrics);
  add("Pooled", predictions.size(), pooled);
  return t;
}

ReportTable PipelineEval::scatter(std::span<const Record> records) const {
  ReportTable t;
  t.header = {"row", "id", "category", "logd_true", "stacking", "fixed", "LR", "RF", "XGB"};
  for (const PredictionRecord& p : predictions) {
    t.rows.push_back({static_cast<long long>(p.row), p.row < records.size() ? records[p.row].id : std::string(),
                      std::string(category_name(p.category)), p.truth, p.ensemble[0], p.ensemble[1], p.bases[0],
                      p.bases[1], p.bases[2]});
  }
  return t;
}

// --- cross-validation ---------------------------------------------------------------------

namespace {

void check_no_leakage(const StratifiedDataset& sub, const FeatureTable& sub_table, const PipelineFit& fit,
                      const PipelineConfig& config, ThresholdPolicy policy,
                      const std::set<std::size_t>& held_out_orders) {
  auto fail = [](const std::string& what) { throw std::logic_error("cross-validation leakage check failed: " + what); };

  for (const Record& r : sub.records) {
    if (held_out_orders.count(r.record_order) != 0) fail(fmt::format("record {} is in both train and test folds", r.id));
  }
  const std::vector<std::size_t> train = sub.indices(Split::kTrain);
  const LengthThresholds expected = policy == ThresholdPolicy::kTrain
                                        ? thresholds_of(sub.records, train)
                                        : thresholds_of(sub.records, iota_rows(sub.records.size()));
  if (!(expected == fit.model.thresholds)) fail("thresholds differ from a recomputation on the training folds");

  if (config.impute_missing) {
    if (fit_table_imputation(sub_table, fit.model.schema, train) != fit.model.imputation) {
      fail("imputation values differ from a recomputation on the training folds");
    }
  }
  for (Category c : kCategories) {
    const auto ci = static_cast<std::size_t>(c);
    for (std::size_t r : fit.train_rows[ci]) {
      if (r >= sub.records.size() || sub.split[r] != Split::kTrain) fail("a category model saw a non-training row");
    }
    const Scaler s = fit_scaler(select_features(sub_table, fit.model, fit.train_rows[ci]));
    if (!(s == fit.model.model_for(c).scaler)) {
      fail(fmt::format("{} scaler differs from a recomputation on the training folds", category_name(c)));
    }
  }
}

}  // namespace

CvResult cross_validate(std::span<const Record> records, const FeatureTable& table, const PipelineConfig& config,
                        const CvOptions& options) {
  if (options.k < 2) throw ConfigError(fmt::format("CV needs k >= 2, got {}", options.k));
  if (options.repeats < 1) throw ConfigError(fmt::format("CV needs repeats >= 1, got {}", options.repeats));
  if (!(options.val_fraction >= 0.0 && options.val_fraction < 1.0)) {
    throw ConfigError(fmt::format("CV validation fraction must be in [0, 1), got {}", options.val_fraction));
  }
  if (table.x.rows() != static_cast<Eigen::Index>(records.size())) {
    throw DataError("feature table and records have different row counts");
  }
  const std::size_t n = records.size();
  if (static_cast<std::size_t>(options.k) > n) {
    throw ConfigError(fmt::format("CV needs k <= number of records ({}), got {}", n, options.k));
  }

  CvResult result;
  std::array<std::vector<Metrics>, 2> per_fold;
  for (int rep = 0; rep < options.repeats; ++rep) {
    const auto urep = static_cast<std::uint64_t>(rep);
    const std::vector<int> folds = assign_folds(n, options.k, derive_seed(options.seed, "cv/folds", {urep}));
    std::vector<PredictionRecord> pooled;
    for (int f = 0; f < options.k; ++f) {
      const auto uf = static_cast<std::uint64_t>(f);
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t i = 0; i < n; ++i) (folds[i] == f ? test_rows : train_rows).push_back(i);

      std::vector<Record> train_records;
      train_records.reserve(train_rows.size());
      for (std::size_t i : train_rows) train_records.push_back(records[i]);
      StratifiedDataset sub =
          split_dataset(std::move(train_records), {1.0 - options.val_fraction, options.val_fraction, 0.0},
                        derive_seed(options.seed, "cv/split", {urep, uf}), options.policy);
      const FeatureTable sub_table = take_table(table, train_rows);

      PipelineConfig pc = config;
      pc.seed = derive_seed(options.seed, "cv/pipeline", {urep, uf});
      const PipelineFit fit = fit_pipeline(sub, sub_table, pc);
      for (const std::string& w : sub.warnings) result.warnings.push_back(fmt::format("repeat {} fold {}: {}", rep, f, w));
      for (const std::string& w : fit.warnings) result.warnings.push_back(fmt::format("repeat {} fold {}: {}", rep, f, w));

      std::set<std::size_t> held_out;
      for (std::size_t i : test_rows) held_out.insert(records[i].record_order);
      check_no_leakage(sub, sub_table, fit, pc, options.policy, held_out);

      PipelineEval ev = evaluate_pipeline(fit.model, records, table, test_rows);
      CvFold fold;
      fold.repeat = rep;
      fold.fold = f;
      fold.n_train = train_rows.size();
      fold.n_test = test_rows.size();
      fold.metrics = ev.pooled;
      result.folds.push_back(fold);
      for (std::size_t m = 0; m < 2; ++m) per_fold[m].push_back(fold.metrics[m]);
      pooled.insert(pooled.end(), ev.predictions.begin(), ev.predictions.end());
    }
    result.repeats.push_back(score(pooled));
  }
  for (std::size_t m = 0; m < 2; ++m) result.summary[m] = summarize(per_fold[m]);
  return result;
}

ReportTable CvResult::table() const {
  ReportTable t;
  t.header = {"repeat", "fold", "n_train", "n_test"};
  for (std::string_view m : kModeColumns) {
    for (std::string_view f : {"R2", "R", "MAE", "MSE"}) t.header.push_back(fmt::format("{}_{}", m, f));
  }
  for (const CvFold& f : folds) {
    std::vector<Cell> row{static_cast<long long>(f.repeat), static_cast<long long>(f.fold),
                          static_cast<long long>(f.n_train), static_cast<long long>(f.n_test)};
    for (const Metrics& m : f.metrics) append_metrics(row, m, true);
    t.rows.push_back(std::move(row));
  }
  for (std::size_t r = 0; r < repeats.size(); ++r) {
    std::vector<Cell> row{static_cast<long long>(r), std::string("pooled"), std::string("-"),
                          static_cast<long long>(repeats[r][0].n)};
    for (const Metrics& m : repeats[r]) append_metrics(row, m, true);
    t.rows.push_back(std::move(row));
  }
  for (int which = 0; which < 2; ++which) {
    std::vector<Cell> row{std::string(which == 0 ? "mean" : "sd"), std::string("-"), std::string("-"),
                          std::string("-")};
    for (const MetricsSummary& s : summary) {
      const Metrics& m = which == 0 ? s.mean : s.sd;
      row.insert(row.end(), {m.r2, m.r, m.mae, m.mse});
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// --- ablation ----------------------------------------------------------------------------

std::string_view preset_name(AblationPreset p) {
  switch (p) {
    case AblationPreset::kFull: return "full";
    case AblationPreset::kNoGraph: return "no_graph";
    case AblationPreset::kNoExternal: return "no_external";
    case AblationPreset::kBaseOnly: return "base_only";
  }
  return "?";
}

std::string_view preset_label(AblationPreset p) {
  switch (p) {
    case AblationPreset::kFull: return "Full Feature";
    case AblationPreset::kNoGraph: return "No Graph Features";
    case AblationPreset::kNoExternal: return "No External Features";
    case AblationPreset::kBaseOnly: return "Base Only";
  }
  return "?";
}

AblationPreset parse_preset(std::string_view s) {
  for (AblationPreset p : kAllPresets) {
    if (preset_name(p) == s) return p;
  }
  throw ConfigError(fmt::format("unknown ablation preset '{}' (full, no_graph, no_external, base_only)", s));
}

std::vector<FeatureGroup> preset_exclusions(AblationPreset p) {
  switch (p) {
    case AblationPreset::kFull: return {};
    case AblationPreset::kNoGraph: return {FeatureGroup::kGraph};
    case AblationPreset::kNoExternal: return {FeatureGroup::kExternal};
    case AblationPreset::kBaseOnly: return {FeatureGroup::kGraph, FeatureGroup::kExternal};
  }
  return {};
}

namespace {

template <typename C>
std::vector<LearnerConfig> seeded(const std::vector<C>& grid, std::uint64_t seed) {
  std::vector<LearnerConfig> out;
  for (const C& c : grid) out.push_back(with_seed(LearnerConfig{c}, seed));
  return out;
}

std::vector<LearnerConfig> pooled_grid(const PipelineConfig& config, LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kLinear: return seeded(config.grids.lr, 0);
    case LearnerKind::kForest: return seeded(config.grids.rf, derive_seed(config.seed, "ablation/forest"));
    case LearnerKind::kGbt: return seeded(config.grids.xgb, derive_seed(config.seed, "ablation/gbt"));
  }
  return {};
}

constexpr std::string_view kPipelineLabel = "LengthLogD (Full + Stratified + Adaptive)";

}  // namespace

Metrics pooled_learner_metrics(const StratifiedDataset& data, const FeatureTable& table, const PipelineConfig& config,
                               LearnerKind kind, std::span<const FeatureGroup> excluded, std::size_t* n_features) {
  const FeatureSchema schema = table.schema.without(excluded);
  if (schema.size() == 0) throw ConfigError("the feature mask removes every column");
  if (n_features != nullptr) *n_features = schema.size();
  const std::vector<std::size_t> train = data.indices(Split::kTrain);
  const std::vector<std::size_t> val = data.indices(Split::kVal);
  const std::vector<std::size_t> test = data.indices(Split::kTest);
  if (test.empty()) throw DataError("the test split is empty");
  if (train.size() < static_cast<std::size_t>(config.k_folds)) {
    throw DataError(fmt::format("training split has {} rows; at least {} are needed", train.size(), config.k_folds));
  }

  ExternalValues impute;
  const ExternalValues* impute_ptr = nullptr;
  if (config.impute_missing) {
    impute = fit_table_imputation(table, schema, train);
    impute_ptr = &impute;
  }
  const Eigen::MatrixXd raw = select_columns(table, schema, train, impute_ptr);
  const Scaler scaler = fit_scaler(raw);
  const Eigen::MatrixXd xt = apply_scaler(scaler, raw);
  const Eigen::MatrixXd xv = apply_scaler(scaler, select_columns(table, schema, val, impute_ptr));
  const Eigen::MatrixXd xs = apply_scaler(scaler, select_columns(table, schema, test, impute_ptr));
  const Eigen::VectorXd yt = targets(data.records, train);
  const Eigen::VectorXd yv = targets(data.records, val);
  const Eigen::VectorXd ys = targets(data.records, test);

  const std::vector<int> folds =
      assign_folds(train.size(), config.k_folds, derive_seed(config.seed, "ablation/folds"));
  const std::vector<LearnerConfig> grid = pooled_grid(config, kind);
  const auto [cfg, model] = select_learner(grid, xt, yt, xv, yv, folds);
  const Eigen::VectorXd pred = predict(model, xs);
  return compute_metrics(std::span<const double>(ys.data(), static_cast<std::size_t>(ys.size())),
                         std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
}

AblationResult run_ablation(const StratifiedDataset& data, const FeatureTable& table, const PipelineConfig& config,
                            std::span<const AblationPreset> presets, std::span<const LearnerKind> kinds,
                            const PipelineFit* full_fit) {
  AblationResult result;
  for (AblationPreset p : presets) {
    const std::vector<FeatureGroup> excluded = preset_exclusions(p);
    for (LearnerKind k : kinds) {
      AblationRow row;
      row.preset = std::string(preset_label(p));
      row.model = std::string(learner_name(k));
      row.test = pooled_learner_metrics(data, table, config, k, excluded, &row.n_features);
      result.rows.push_back(std::move(row));
    }
  }

  PipelineFit own;
  if (full_fit == nullptr) {
    PipelineConfig pc = config;
    pc.excluded.clear();
    own = fit_pipeline(data, table, pc);
    full_fit = &own;
  }
  const std::vector<std::size_t> test = data.indices(Split::kTest);
  if (test.empty()) throw DataError("the test split is empty");
  const PipelineEval ev = evaluate_pipeline(full_fit->model, data.records, table, test);
  AblationRow row;
  row.preset = std::string(kPipelineLabel);
  row.model = "fixed-weight ensemble";
  row.n_features = full_fit->model.schema.size();
  row.test = ev.pooled[1];
  result.rows.push_back(std::move(row));
  return result;
}

ReportTable AblationResult::table() const {
  ReportTable t;
  t.header = {"feature_config", "model", "n_features", "R2", "MAE", "MSE"};
  for (const AblationRow& r : rows) {
    std::vector<Cell> row{r.preset, r.model, static_cast<long long>(r.n_features)};
    append_metrics(row, r.test);
    t.rows.push_back(std::move(row));
  }
  return t;
}

// --- baseline comparison ---------------------------------------------------------------------

ComparisonResult run_baseline_comparison(const StratifiedDataset& data, const FeatureTable& table,
                                         const PipelineConfig& config, const LengthLogDModel& model) {
  ComparisonResult result;
  constexpr std::array<std::string_view, 3> kNames{"Linear Regression", "Random Forest", "XGBoost"};
  for (LearnerKind k : kLearnerKinds) {
    result.rows.push_back({std::string(kNames[static_cast<std::size_t>(k)]), "pooled",
                           pooled_learner_metrics(data, table, config, k, config.excluded)});
  }
  const PipelineEval val = evaluate_pipeline(model, data.records, table, data.indices(Split::kVal));
  const PipelineEval ev = evaluate_pipeline(model, data.records, table, data.indices(Split::kTest));
  for (Category c : kCategories) {
    const auto ci = static_cast<std::size_t>(c);
    EnsembleMode mode = model.model_for(c).mode;
    if (val.categories[ci].n > 0) {
      const auto& vm = val.categories[ci].metrics;
      mode = vm[1].mae < vm[0].mae ? EnsembleMode::kFixed : EnsembleMode::kStacking;
    }
    result.rows.push_back({fmt::format("LengthLogD ({})", category_name(c)), std::string(mode_name(mode)),
                           ev.categories[ci].metrics[mode == EnsembleMode::kStacking ? 0 : 1]});
  }
  return result;
}

ReportTable ComparisonResult::table() const {
  ReportTable t;
  t.header = {"model", "mode", "n", "R2", "MAE", "RMSE"};
  for (const ComparisonRow& r : rows) {
    std::vector<Cell> row{r.model, r.mode, static_cast<long long>(r.test.n)};
    if (r.test.n == 0) {
      row.insert(row.end(), 3, Cell{std::string("-")});
    } else {
      row.insert(row.end(), {r.test.r2, r.test.mae, r.test.rmse});
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// --- feature importance ----------------------------------------------------------------------

std::string_view bucket_name(SourceBucket b) {
  switch (b) {
    case SourceBucket::kExternal: return "External";
    case SourceBucket::kGraph: return "Graph";
    case SourceBucket::kGlobal: return "Global";
    case SourceBucket::kFingerprint: return "Fingerprint";
  }
  return "?";
}

SourceBucket bucket_of(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::kExternal: return SourceBucket::kExternal;
    case FeatureGroup::kGraph: return SourceBucket::kGraph;
    case FeatureGroup::kRdkitGlobal:
    case FeatureGroup::kSmilesLen: return SourceBucket::kGlobal;
    case FeatureGroup::kMorgan:
    case FeatureGroup::kMaccs: return SourceBucket::kFingerprint;
  }
  return SourceBucket::kGlobal;
}

ImportanceReport feature_importance(const ForestModel& forest, const FeatureSchema& schema,
                                    const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val, std::size_t top_k,
                                    std::uint64_t seed, int shuffles) {
  const std::size_t p = schema.size();
  if (forest.n_features != static_cast<int>(p)) {
    throw DataError(fmt::format("forest has {} features but the schema has {}", forest.n_features, p));
  }
  if (x_val.cols() != static_cast<Eigen::Index>(p) || x_val.rows() != y_val.size()) {
    throw DataError("validation matrix does not match the schema or targets");
  }
  if (shuffles < 1) throw ConfigError(fmt::format("permutation shuffles must be >= 1, got {}", shuffles));

  ImportanceReport rep;
  rep.features.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    rep.features[j].name = schema.entries()[j].name;
    rep.features[j].group = schema.entries()[j].group;
  }

  // Impurity: each tree's gains normalized to 1, averaged over trees.
  std::vector<double> imp(p, 0.0);
  std::vector<std::vector<std::size_t>> trees_using(p);
  std::size_t counted = 0;
  std::vector<double> per_tree(p);
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const RegressionTree& tree = forest.trees[t];
    std::fill(per_tree.begin(), per_tree.end(), 0.0);
    std::set<std::size_t> used;
    for (std::size_t k = 0; k < tree.node_count(); ++k) {
      if (tree.feature[k] < 0) continue;
      const auto j = static_cast<std::size_t>(tree.feature[k]);
      per_tree[j] += tree.gain[k];
      used.insert(j);
    }
    for (std::size_t j : used) trees_using[j].push_back(t);
    const double total = std::accumulate(per_tree.begin(), per_tree.end(), 0.0);
    if (total <= 0.0) continue;
    ++counted;
    for (std::size_t j = 0; j < p; ++j) imp[j] += per_tree[j] / total;
  }
  const double imp_total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (counted > 0 && imp_total > 0.0) {
    for (std::size_t j = 0; j < p; ++j) rep.features[j].impurity = imp[j] / imp_total;
  }

  // Permutation: only trees splitting on the column change their output.
  const auto n = static_cast<std::size_t>(x_val.rows());
  if (n > 0 && !forest.trees.empty()) {
    const double nt = static_cast<double>(forest.trees.size());
    std::vector<std::vector<double>> rows(n);
    std::vector<std::vector<double>> tree_pred(forest.trees.size(), std::vector<double>(n));
    std::vector<double> sum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) rows[i] = row_of(x_val, static_cast<Eigen::Index>(i));
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        tree_pred[t][i] = forest.trees[t].predict(rows[i]);
        sum[i] += tree_pred[t][i];
      }
    }
    double base_mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = sum[i] / nt - y_val(static_cast<Eigen::Index>(i));
      base_mse += d * d;
    }
    base_mse /= static_cast<double>(n);

    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < p; ++j) {
      if (trees_using[j].empty()) continue;
      double increase = 0.0;
      for (int s = 0; s < shuffles; ++s) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(derive_seed(seed, "importance/permute", {j, static_cast<std::uint64_t>(s)}));
        rng.shuffle(perm);
        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<double>& row = rows[i];
          const double keep = row[j];
          row[j] = x_val(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(j));
          double total = sum[i];
          for (std::size_t t : trees_using[j]) total += forest.trees[t].predict(row) - tree_pred[t][i];
          row[j] = keep;
          const double d = total / nt - y_val(static_cast<Eigen::Index>(i));
          mse += d * d;
        }
        increase += mse / static_cast<double>(n) - base_mse;
      }
      rep.features[j].permutation = increase / shuffles;
    }
  }

  std::vector<std::size_t> order = iota_rows(p);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rep.features[a].impurity > rep.features[b].impurity;
  });
  order.resize(std::min(top_k, p));
  rep.top = order;
  double top_total = 0.0;
  for (std::size_t j : rep.top) top_total += rep.features[j].impurity;
  if (top_total > 0.0) {
    for (std::size_t j : rep.top) {
      rep.bucket_shares[static_cast<std::size_t>(bucket_of(rep.features[j].group))] +=
          rep.features[j].impurity / top_total;
    }
  }
  return rep;
}

ReportTable ImportanceReport::top_table() const {
  ReportTable t;
  t.header = {"rank", "feature", "group", "source", "impurity", "permutation"};
  for (std::size_t r = 0; r < top.size(); ++r) {
    const ImportanceEntry& e = features[top[r]];
    t.rows.push_back({static_cast<long long>(r + 1), e.name, std::string(group_name(e.group)),
                      std::string(bucket_name(bucket_of(e.group))), e.impurity, e.permutation});
  }
  return t;
}

ReportTable ImportanceReport::share_table() const {
  ReportTable t;
  t.header = {"source", "share"};
  for (SourceBucket b : kSourceBuckets) {
    t.rows.push_back({std::string(bucket_name(b)), bucket_shares[static_cast<std::size_t>(b)]});
  }
  return t;
}

}  // namespace lengthlogd
