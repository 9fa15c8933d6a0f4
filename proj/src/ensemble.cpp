#include "lengthlogd/ensemble.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lengthlogd/errors.hpp"
#include "lengthlogd/random.hpp"

namespace lengthlogd {

FixedWeights inverse_error_weights(const std::array<double, 3>& errors) {
  int zeros = 0;
  for (double e : errors) {
    if (!std::isfinite(e) || e < 0.0) throw DataError(fmt::format("invalid base-model error {}", e));
    zeros += e == 0.0;
  }
  std::array<double, 3> w{};
  if (zeros > 0) {
    for (std::size_t i = 0; i < 3; ++i) w[i] = errors[i] == 0.0 ? 1.0 / zeros : 0.0;
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      w[i] = 1.0 / errors[i];
      total += w[i];
    }
    for (double& v : w) v /= total;
  }
  return {w[0], w[1], w[2]};
}

FixedWeights apply_adaptive(const FixedWeights& w, double alpha) {
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw ConfigError(fmt::format("adaptive alpha must be >= 1, got {}", alpha));
  const double lr = alpha * w.lr;
  const double total = lr + w.rf + w.xgb;
  return {lr / total, w.rf / total, w.xgb / total};
}

// --- bases ------------------------------------------------------------------------

std::array<double, 3> BaseModels::predict_row(std::span<const double> row) const {
  return {lengthlogd::predict_row(lr, row), lengthlogd::predict_row(rf, row), lengthlogd::predict_row(xgb, row)};
}

BaseModels fit_bases(const BaseConfigs& configs, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return {fit_ridge(x, y, configs.lr.lambda), fit_forest(x, y, configs.rf), fit_gbt(x, y, configs.xgb)};
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
  return out;
}

int fold_count(std::span<const int> folds) {
  int k = 0;
  for (int f : folds) k = std::max(k, f + 1);
  return k;
}

void fold_rows(std::span<const int> folds, int f, std::vector<std::size_t>& train, std::vector<std::size_t>& held) {
  train.clear();
  held.clear();
  for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? held : train).push_back(i);
  if (held.empty() || train.empty()) throw DataError(fmt::format("fold {} leaves no rows on one side", f));
}

double mae(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().mean(); }

/// Out-of-fold predictions of a single learner config.
Eigen::VectorXd oof_single(const LearnerConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           std::span<const int> folds) {
  Eigen::VectorXd out(x.rows());
  std::vector<std::size_t> train, held;
  for (int f = 0; f < fold_count(folds); ++f) {
    fold_rows(folds, f, train, held);
    const LearnerModel m = fit_learner(config, take_rows(x, train), take(y, train));
    for (std::size_t r : held) out(static_cast<Eigen::Index>(r)) = predict_row(m, row_of(x, static_cast<Eigen::Index>(r)));
  }
  return out;
}

}  // namespace

FixedWeights fit_fixed_weights(const BaseModels& bases, const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val) {
  if (x_val.rows() == 0) throw DataError("inverse-error weights need a non-empty validation split");
  std::array<double, 3> err{};
  for (Eigen::Index i = 0; i < x_val.rows(); ++i) {
    const auto p = bases.predict_row(row_of(x_val, i));
    for (std::size_t b = 0; b < 3; ++b) err[b] += std::abs(p[b] - y_val(i));
  }
  for (double& e : err) e /= static_cast<double>(x_val.rows());
  return inverse_error_weights(err);
}

std::vector<int> assign_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError(fmt::format("k_folds must be >= 2, got {}", k));
  if (static_cast<std::size_t>(k) > n) throw DataError(fmt::format("{} rows cannot fill {} folds", n, k));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> folds(n);
  for (std::size_t i = 0; i < n; ++i) folds[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return folds;
}

Eigen::MatrixXd out_of_fold_predictions(const BaseConfigs& configs, const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y, std::span<const int> folds) {
  Eigen::MatrixXd oof(x.rows(), 3);
  std::vector<std::size_t> train, held;
  for (int f = 0; f < fold_count(folds); ++f) {
    fold_rows(folds, f, train, held);
    const BaseModels bases = fit_bases(configs, take_rows(x, train), take(y, train));
    for (std::size_t r : held) {
      const auto p = bases.predict_row(row_of(x, static_cast<Eigen::Index>(r)));
      for (Eigen::Index b = 0; b < 3; ++b) oof(static_cast<Eigen::Index>(r), b) = p[static_cast<std::size_t>(b)];
    }
  }
  return oof;
}

MetaFit fit_meta(const Eigen::MatrixXd& oof, const Eigen::VectorXd& y, std::span<const int> folds,
                 std::span<const double> lambdas) {
  if (lambdas.empty()) throw ConfigError("meta-learner penalty list is empty");
  MetaFit out;
  std::vector<std::size_t> train, held;
  std::size_t best = 0;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    double sse = 0.0;
    for (int f = 0; f < fold_count(folds); ++f) {
      fold_rows(folds, f, train, held);
      const RidgeModel m = fit_ridge(take_rows(oof, train), take(y, train), lambdas[li]);
      for (std::size_t r : held) {
        const double d = predict_row(m, row_of(oof, static_cast<Eigen::Index>(r))) - y(static_cast<Eigen::Index>(r));
        sse += d * d;
      }
    }
    out.lambda_mse.push_back(sse / static_cast<double>(y.size()));
    const double mse = out.lambda_mse.back();
    if (li > 0 && (mse < out.lambda_mse[best] || (mse == out.lambda_mse[best] && lambdas[li] > lambdas[best]))) best = li;
  }
  out.meta = fit_ridge(oof, y, lambdas[best]);
  return out;
}

StackingFit fit_stacking(const BaseConfigs& configs, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         int k_folds, std::uint64_t seed, std::span<const double> lambdas) {
  StackingFit out;
  out.folds = assign_folds(static_cast<std::size_t>(x.rows()), k_folds, seed);
  out.oof = out_of_fold_predictions(configs, x, y, out.folds);
  out.meta = fit_meta(out.oof, y, out.folds, lambdas);
  out.bases = fit_bases(configs, x, y);
  return out;
}

// --- prediction ------------------------------------------------------------------------

std::string_view mode_name(EnsembleMode m) { return m == EnsembleMode::kStacking ? "stacking" : "fixed"; }

EnsembleMode parse_mode(std::string_view s) {
  if (s == "stacking") return EnsembleMode::kStacking;
  if (s == "fixed") return EnsembleMode::kFixed;
  throw ConfigError(fmt::format("unknown ensemble mode '{}' (expected stacking or fixed)", s));
}

double combine(const CategoryModel& m, const std::array<double, 3>& bases, EnsembleMode mode) {
  if (mode == EnsembleMode::kStacking) return predict_row(m.meta, bases);
  return m.weights.lr * bases[0] + m.weights.rf * bases[1] + m.weights.xgb * bases[2];
}

EnsembleOutput predict_ensemble(const CategoryModel& m, std::span<const double> row, EnsembleMode mode) {
  if (static_cast<Eigen::Index>(row.size()) != m.scaler.mean.size()) {
    throw DataError(fmt::format("feature row has {} values, model expects {}", row.size(), m.scaler.mean.size()));
  }
  std::vector<double> scaled(row.begin(), row.end());
  apply_scaler_row(m.scaler, scaled);
  EnsembleOutput out;
  out.bases = m.bases.predict_row(scaled);
  out.value = combine(m, out.bases, mode);
  return out;
}

namespace {

bool is_external(FeatureGroup g) { return g == FeatureGroup::kExternal || g == FeatureGroup::kMaccs; }

}  // namespace

std::vector<double> model_features(const LengthLogDModel& model, const MolecularGraph& graph,
                                   const ExternalValues& external) {
  ExternalValues filled;
  for (const FeatureEntry& e : model.schema.entries()) {
    if (!is_external(e.group)) continue;
    auto it = external.find(e.name);
    if (it != external.end() && std::isfinite(it->second)) {
      filled.emplace(e.name, it->second);
      continue;
    }
    auto mean = model.imputation.find(e.name);
    if (!model.impute_missing || mean == model.imputation.end()) {
      throw DataError(fmt::format("missing value for external column '{}'", e.name));
    }
    filled.emplace(e.name, mean->second);
  }
  std::vector<double> row(model.schema.size());
  assemble_features_into(graph, filled, model.schema, row);
  return row;
}

Prediction predict_graph(const LengthLogDModel& model, const MolecularGraph& graph, const ExternalValues& external,
                         std::optional<EnsembleMode> mode) {
  Prediction p;
  p.smiles_length = graph.smiles_length();
  p.category = categorize(p.smiles_length, model.thresholds);
  const CategoryModel& cm = model.model_for(p.category);
  const EnsembleOutput out = predict_ensemble(cm, model_features(model, graph, external), mode.value_or(cm.mode));
  p.logd = out.value;
  p.bases = out.bases;
  return p;
}

Prediction predict_logd(const LengthLogDModel& model, std::string_view smiles, const ExternalValues& external,
                        std::optional<EnsembleMode> mode) {
  return predict_graph(model, parse_smiles(smiles), external, mode);
}

// --- training ------------------------------------------------------------------------------

FeatureTable build_feature_table(std::span<const Record> records, const FeatureSchema& schema) {
  FeatureTable table{schema, Eigen::MatrixXd(static_cast<Eigen::Index>(records.size()),
                                              static_cast<Eigen::Index>(schema.size()))};
  std::vector<std::size_t> missing;
  std::vector<double> row(schema.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Record& rec = records[r];
    ExternalValues ext = rec.external;
    missing.clear();
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const FeatureEntry& e = schema.entries()[j];
      if (is_external(e.group) && !ext.contains(e.name)) {
        ext.emplace(e.name, 0.0);
        missing.push_back(j);
      }
    }
    const MolecularGraph graph = rec.graph ? *rec.graph : parse_smiles(rec.smiles);
    assemble_features_into(graph, ext, schema, row);
    for (std::size_t j : missing) row[j] = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 0; j < schema.size(); ++j) {
      table.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return table;
}

Eigen::MatrixXd select_columns(const FeatureTable& table, const FeatureSchema& schema,
                               std::span<const std::size_t> rows, const ExternalValues* impute) {
  const auto& entries = schema.entries();
  std::vector<Eigen::Index> cols(entries.size());
  std::vector<double> fill(entries.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < entries.size(); ++j) {
    const auto idx = table.schema.index_of(entries[j].name);
    if (!idx) throw DataError(fmt::format("feature table lacks column '{}'", entries[j].name));
    cols[j] = static_cast<Eigen::Index>(*idx);
    if (impute != nullptr) {
      auto it = impute->find(entries[j].name);
      if (it != impute->end()) fill[j] = it->second;
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      double v = table.x(static_cast<Eigen::Index>(rows[i]), cols[j]);
      if (std::isnan(v)) {
        v = fill[j];
        if (std::isnan(v)) throw DataError(fmt::format("missing value for external column '{}'", entries[j].name));
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return out;
}

Eigen::MatrixXd select_features(const FeatureTable& table, const LengthLogDModel& model,
                                std::span<const std::size_t> rows) {
  return select_columns(table, model.schema, rows, model.impute_missing ? &model.imputation : nullptr);
}

ExternalValues fit_table_imputation(const FeatureTable& table, const FeatureSchema& schema,
                                    std::span<const std::size_t> rows) {
  ExternalValues means;
  for (const FeatureEntry& e : schema.entries()) {
    if (!is_external(e.group)) continue;
    const auto idx = table.schema.index_of(e.name);
    if (!idx) throw DataError(fmt::format("feature table lacks column '{}'", e.name));
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r : rows) {
      const double v = table.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(*idx));
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
    }
    if (n == 0) throw DataError(fmt::format("external column '{}' has no training values to impute from", e.name));
    means.emplace(e.name, sum / static_cast<double>(n));
  }
  return means;
}

namespace {

template <typename Config>
std::vector<LearnerConfig> seeded_grid(const std::vector<Config>& grid, std::uint64_t seed) {
  if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
  std::vector<LearnerConfig> out;
  for (const Config& c : grid) out.push_back(with_seed(c, seed));
  return out;
}

}  // namespace

std::pair<LearnerConfig, LearnerModel> select_learner(std::span<const LearnerConfig> grid, const Eigen::MatrixXd& xt,
                                                      const Eigen::VectorXd& yt, const Eigen::MatrixXd& xv,
                                                      const Eigen::VectorXd& yv, std::span<const int> folds) {
  if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
  if (xv.rows() > 0) {
    GridSearchResult r = grid_search(grid, xt, yt, xv, yv);
    return {r.best, std::move(r.best_model)};
  }
  std::size_t best = 0;
  double best_mae = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double m = grid.size() == 1 ? 0.0 : mae(oof_single(grid[i], xt, yt, folds), yt);
    if (i == 0 || m < best_mae || (m == best_mae && simpler_than(grid[i], grid[best]))) {
      best = i;
      best_mae = m;
    }
  }
  return {grid[best], fit_learner(grid[best], xt, yt)};
}

PipelineFit fit_pipeline(const StratifiedDataset& data, const FeatureTable& table, const PipelineConfig& config) {
  if (config.k_folds < 2) throw ConfigError(fmt::format("k_folds must be >= 2, got {}", config.k_folds));
  if (!(config.alpha >= 1.0)) throw ConfigError(fmt::format("adaptive alpha must be >= 1, got {}", config.alpha));
  if (table.x.rows() != static_cast<Eigen::Index>(data.records.size())) {
    throw DataError("feature table and dataset have different row counts");
  }

  PipelineFit fit;
  LengthLogDModel& model = fit.model;
  model.schema = table.schema.without(config.excluded);
  if (model.schema.size() == 0) throw ConfigError("the feature mask removes every column");
  model.thresholds = data.thresholds;
  model.impute_missing = config.impute_missing;
  model.metadata.seed = config.seed;
  model.metadata.dataset_fingerprint = dataset_fingerprint(data.records);
  model.metadata.n_records = data.records.size();

  const std::vector<std::size_t> all_train = data.indices(Split::kTrain);
  if (config.impute_missing) model.imputation = fit_table_imputation(table, model.schema, all_train);

  for (Category c : kCategories) {
    const auto ci = static_cast<std::size_t>(c);
    CategoryFitInfo& info = fit.info[ci];
    info.category = c;
    std::vector<std::size_t> train = data.indices(Split::kTrain, c);
    std::vector<std::size_t> val = data.indices(Split::kVal, c);
    if (train.size() < static_cast<std::size_t>(config.k_folds)) {
      fit.warnings.push_back(fmt::format(
          "category {} has {} training rows, fewer than {} folds; its model is fit on all {} training rows",
          category_name(c), train.size(), config.k_folds, all_train.size()));
      train = all_train;
      val = data.indices(Split::kVal);
      info.merged_fallback = true;
      if (train.size() < static_cast<std::size_t>(config.k_folds)) {
        throw DataError(fmt::format("training split has {} rows; at least {} are needed for {}-fold stacking",
                                    train.size(), config.k_folds, config.k_folds));
      }
    }
    info.n_train = train.size();
    info.n_val = val.size();
    fit.train_rows[ci] = train;

    CategoryModel& cm = model.categories[ci];
    cm.category = c;
    const Eigen::MatrixXd raw_train = select_features(table, model, train);
    cm.scaler = fit_scaler(raw_train);
    const Eigen::MatrixXd xt = apply_scaler(cm.scaler, raw_train);
    const Eigen::VectorXd yt = targets(data.records, train);
    const Eigen::MatrixXd xv = apply_scaler(cm.scaler, select_features(table, model, val));
    const Eigen::VectorXd yv = targets(data.records, val);

    const std::vector<int> folds =
        assign_folds(train.size(), config.k_folds, derive_seed(config.seed, "stacking/folds", {ci}));
    auto [lr_cfg, lr_model] = select_learner(seeded_grid(config.grids.lr, 0), xt, yt, xv, yv, folds);
    auto [rf_cfg, rf_model] =
        select_learner(seeded_grid(config.grids.rf, derive_seed(config.seed, "forest", {ci})), xt, yt, xv, yv, folds);
    auto [gb_cfg, gb_model] =
        select_learner(seeded_grid(config.grids.xgb, derive_seed(config.seed, "gbt", {ci})), xt, yt, xv, yv, folds);
    info.chosen = {std::get<RidgeConfig>(lr_cfg), std::get<ForestConfig>(rf_cfg), std::get<GbtConfig>(gb_cfg)};
    // The selected models were fit on exactly the training rows, so they are
    // the refit bases.
    cm.bases = {std::get<RidgeModel>(std::move(lr_model)), std::get<ForestModel>(std::move(rf_model)),
                std::get<GbtModel>(std::move(gb_model))};

    const Eigen::MatrixXd oof = out_of_fold_predictions(info.chosen, xt, yt, folds);
    const MetaFit meta = fit_meta(oof, yt, folds, config.meta_lambdas);
    cm.meta = meta.meta;
    info.meta_lambda = meta.meta.lambda;

    if (val.empty()) {
      info.oof_weights = true;
      for (std::size_t b = 0; b < 3; ++b) info.base_errors[b] = mae(oof.col(static_cast<Eigen::Index>(b)), yt);
    } else {
      for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        const auto p = cm.bases.predict_row(row_of(xv, i));
        for (std::size_t b = 0; b < 3; ++b) info.base_errors[b] += std::abs(p[b] - yv(i));
      }
      for (double& e : info.base_errors) e /= static_cast<double>(xv.rows());
    }
    cm.fixed = inverse_error_weights(info.base_errors);
    cm.adaptive_alpha = c == Category::kLong ? config.alpha : 1.0;
    cm.weights = apply_adaptive(cm.fixed, cm.adaptive_alpha);
    cm.mode = config.mode;

    info.val_mae = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    if (!val.empty()) {
      double s = 0.0, f = 0.0;
      for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        const auto p = cm.bases.predict_row(row_of(xv, i));
        s += std::abs(combine(cm, p, EnsembleMode::kStacking) - yv(i));
        f += std::abs(combine(cm, p, EnsembleMode::kFixed) - yv(i));
      }
      info.val_mae = {s / static_cast<double>(xv.rows()), f / static_cast<double>(xv.rows())};
    }
  }
  return fit;
}

}  // namespace lengthlogd
