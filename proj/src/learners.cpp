#include "lengthlogd/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "lengthlogd/errors.hpp"
#include "lengthlogd/random.hpp"
#include "tree_index.hpp"

namespace lengthlogd {

std::vector<double> row_of(const Eigen::MatrixXd& x, Eigen::Index i) {
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
  return row;
}

std::vector<std::size_t> canonical_row_order(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (x(ia, j) != x(ib, j)) return x(ia, j) < x(ib, j);
    }
    return y(ia) < y(ib);
  });
  return order;
}

namespace {

void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw DataError("cannot fit on zero rows");
  if (x.rows() != y.size()) {
    throw DataError(fmt::format("feature matrix has {} rows but there are {} targets", x.rows(), y.size()));
  }
  if (!x.allFinite() || !y.allFinite()) throw DataError("training data contains non-finite values");
}

void check_width(std::size_t got, Eigen::Index expected) {
  if (static_cast<Eigen::Index>(got) != expected) {
    throw DataError(fmt::format("model expects {} features, got {}", expected, got));
  }
}

// Solves (A + jitter I) z = b by Cholesky, adding jitter when A is not
// numerically positive definite.
Eigen::VectorXd spd_solve(Eigen::MatrixXd a, const Eigen::VectorXd& b, RidgeFitReport& report) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success && llt.rcond() >= 1e-12) return llt.solve(b);
  const double dim = static_cast<double>(a.rows());
  double jitter = 1e-10 * a.trace() / dim;
  if (!(jitter > 0.0)) jitter = 1e-10;
  for (int attempt = 0; attempt < 20; ++attempt) {
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) {
      report.jitter_applied = true;
      report.jitter = jitter;
      return llt.solve(b);
    }
    jitter *= 10.0;
  }
  throw DataError("ridge system could not be factorized");
}

}  // namespace

RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, RidgeFitReport* report) {
  check_shapes(x, y);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge lambda must be finite and >= 0");
  RidgeFitReport local;
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  RidgeModel m;
  m.lambda = lambda;
  if (x.cols() == 0) {
    m.weights = Eigen::VectorXd(0);
  } else if (x.cols() <= x.rows()) {
    Eigen::MatrixXd a = xc.transpose() * xc;
    a.diagonal().array() += lambda;
    m.weights = spd_solve(std::move(a), xc.transpose() * yc, local);
  } else {
    local.dual = true;
    Eigen::MatrixXd k = xc * xc.transpose();
    k.diagonal().array() += lambda;
    m.weights = xc.transpose() * spd_solve(std::move(k), yc, local);
  }
  m.intercept = y_mean - x_mean.dot(m.weights);
  if (report != nullptr) *report = local;
  return m;
}

Eigen::VectorXd predict(const RidgeModel& m, const Eigen::MatrixXd& x) {
  check_width(static_cast<std::size_t>(x.cols()), m.weights.size());
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = row_of(x, i);
    out(i) = predict_row(m, row);
  }
  return out;
}

double predict_row(const RidgeModel& m, std::span<const double> row) {
  check_width(row.size(), m.weights.size());
  double s = m.intercept;
  for (std::size_t j = 0; j < row.size(); ++j) s += m.weights(static_cast<Eigen::Index>(j)) * row[j];
  return s;
}

// --- forest ---------------------------------------------------------------------

namespace {

struct Canonical {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Canonical canonicalize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto order = canonical_row_order(x, y);
  Canonical c{Eigen::MatrixXd(x.rows(), x.cols()), Eigen::VectorXd(y.size())};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(order[i]);
    c.x.row(static_cast<Eigen::Index>(i)) = x.row(src);
    c.y(static_cast<Eigen::Index>(i)) = y(src);
  }
  return c;
}

}  // namespace

ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestConfig& config) {
  check_shapes(x, y);
  if (config.n_trees < 1) throw ConfigError("forest needs at least one tree");
  if (config.min_leaf < 1) throw ConfigError("forest min_leaf must be >= 1");
  const int p = static_cast<int>(x.cols());
  if (config.m_features > p) throw ConfigError(fmt::format("m_features {} exceeds feature count {}", config.m_features, p));
  const Canonical c = canonicalize(x, y);
  const std::size_t n = static_cast<std::size_t>(x.rows());

  const detail::ColumnIndex index = detail::index_columns(c.x);
  const int usable = static_cast<int>(index.usable.size());

  ForestModel model;
  model.n_features = p;
  // Features are drawn from the columns that vary in the training data.
  model.m_features = std::max(1, config.m_features > 0 ? std::min(config.m_features, usable) : (usable + 2) / 3);
  model.trees.resize(static_cast<std::size_t>(config.n_trees));
  const TreeConfig tc{config.max_depth, config.min_leaf, model.m_features};

#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, "forest/tree", {static_cast<std::uint64_t>(t)}));
    std::vector<std::size_t> sample(n);
    for (std::size_t& s : sample) s = rng.uniform_index(n);
    model.trees[static_cast<std::size_t>(t)] = detail::grow_tree(c.x, c.y, sample, tc, &rng, index);
  }
  return model;
}

double predict_row(const ForestModel& m, std::span<const double> row) {
  check_width(row.size(), m.n_features);
  double s = 0.0;
  for (const RegressionTree& t : m.trees) s += t.predict(row);
  return s / static_cast<double>(m.trees.size());
}

// --- gradient boosting -------------------------------------------------------------

GbtModel fit_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtConfig& config,
                 std::vector<double>* train_mse) {
  check_shapes(x, y);
  if (config.rounds < 1) throw ConfigError("gbt needs at least one round");
  if (!(config.eta > 0.0 && config.eta <= 1.0)) throw ConfigError("gbt learning rate must be in (0, 1]");
  if (!(config.subsample > 0.0 && config.subsample <= 1.0)) throw ConfigError("gbt subsample must be in (0, 1]");
  if (config.min_leaf < 1) throw ConfigError("gbt min_leaf must be >= 1");

  const Canonical c = canonicalize(x, y);
  const std::size_t n = static_cast<std::size_t>(x.rows());
  std::vector<std::vector<double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = row_of(c.x, static_cast<Eigen::Index>(i));

  GbtModel model;
  model.eta = config.eta;
  model.n_features = static_cast<int>(x.cols());
  model.base_score = c.y.mean();

  std::vector<double> pred(n, model.base_score);
  auto mse_of = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = c.y(static_cast<Eigen::Index>(i)) - p[i];
      s += d * d;
    }
    return s / static_cast<double>(n);
  };
  double mse = mse_of(pred);
  if (train_mse != nullptr) {
    train_mse->clear();
    train_mse->push_back(mse);
  }

  const std::size_t k =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(config.subsample * static_cast<double>(n))), 1, n);
  const TreeConfig tc{config.max_depth, config.min_leaf, 0};
  const detail::ColumnIndex index = detail::index_columns(c.x);
  Eigen::VectorXd residual(static_cast<Eigen::Index>(n));
  std::vector<int> leaf(n);
  std::vector<double> candidate(n);

  for (int round = 0; round < config.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual(static_cast<Eigen::Index>(i)) = c.y(static_cast<Eigen::Index>(i)) - pred[i];
    std::vector<std::size_t> sample;
    if (k == n) {
      sample.resize(n);
      std::iota(sample.begin(), sample.end(), 0);
    } else {
      Rng rng(derive_seed(config.seed, "gbt/round", {static_cast<std::uint64_t>(round)}));
      sample = rng.sample_without_replacement(n, k);
      std::sort(sample.begin(), sample.end());
    }
    RegressionTree tree = detail::grow_tree(c.x, residual, sample, tc, nullptr, index);

    // Leaf values: mean residual of every training row in the leaf.
    std::vector<double> sum(tree.node_count(), 0.0);
    std::vector<std::size_t> count(tree.node_count(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      leaf[i] = tree.leaf_of(rows[i]);
      sum[static_cast<std::size_t>(leaf[i])] += residual(static_cast<Eigen::Index>(i));
      ++count[static_cast<std::size_t>(leaf[i])];
    }
    for (std::size_t v = 0; v < tree.node_count(); ++v) {
      if (tree.feature[v] < 0) tree.value[v] = count[v] > 0 ? sum[v] / static_cast<double>(count[v]) : 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) candidate[i] = pred[i] + config.eta * tree.value[static_cast<std::size_t>(leaf[i])];
    const double new_mse = mse_of(candidate);
    if (new_mse <= mse) {
      pred.swap(candidate);
      mse = new_mse;
    } else {
      // Only reachable through rounding when the exact update is ~0.
      for (std::size_t v = 0; v < tree.node_count(); ++v) {
        if (tree.feature[v] < 0) tree.value[v] = 0.0;
      }
    }
    if (train_mse != nullptr) train_mse->push_back(mse);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double predict_row(const GbtModel& m, std::span<const double> row) {
  check_width(row.size(), m.n_features);
  double s = m.base_score;
  for (const RegressionTree& t : m.trees) s += m.eta * t.predict(row);
  return s;
}

// --- uniform interface ---------------------------------------------------------------

std::string_view learner_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::kLinear: return "LR";
    case LearnerKind::kForest: return "RF";
    case LearnerKind::kGbt: return "XGB";
  }
  return "?";
}

LearnerKind kind_of(const LearnerConfig& c) { return static_cast<LearnerKind>(c.index()); }
LearnerKind kind_of(const LearnerModel& m) { return static_cast<LearnerKind>(m.index()); }

LearnerConfig with_seed(LearnerConfig c, std::uint64_t seed) {
  if (auto* f = std::get_if<ForestConfig>(&c)) f->seed = seed;
  if (auto* g = std::get_if<GbtConfig>(&c)) g->seed = seed;
  return c;
}

LearnerModel fit_learner(const LearnerConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return std::visit(
      [&](const auto& cfg) -> LearnerModel {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, RidgeConfig>) return fit_ridge(x, y, cfg.lambda);
        else if constexpr (std::is_same_v<T, ForestConfig>) return fit_forest(x, y, cfg);
        else return fit_gbt(x, y, cfg);
      },
      config);
}

double predict_row(const LearnerModel& m, std::span<const double> row) {
  return std::visit([&](const auto& model) { return predict_row(model, row); }, m);
}

Eigen::VectorXd predict(const LearnerModel& m, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = row_of(x, i);
    out(i) = predict_row(m, row);
  }
  return out;
}

bool simpler_than(const LearnerConfig& a, const LearnerConfig& b) {
  if (a.index() != b.index()) return a.index() < b.index();
  if (const auto* ra = std::get_if<RidgeConfig>(&a)) return ra->lambda > std::get<RidgeConfig>(b).lambda;
  auto depth_key = [](int d) { return d < 0 ? std::numeric_limits<int>::max() : d; };
  if (const auto* fa = std::get_if<ForestConfig>(&a)) {
    const auto& fb = std::get<ForestConfig>(b);
    if (fa->n_trees != fb.n_trees) return fa->n_trees < fb.n_trees;
    return depth_key(fa->max_depth) < depth_key(fb.max_depth);
  }
  const auto& ga = std::get<GbtConfig>(a);
  const auto& gb = std::get<GbtConfig>(b);
  if (ga.rounds != gb.rounds) return ga.rounds < gb.rounds;
  return depth_key(ga.max_depth) < depth_key(gb.max_depth);
}

GridSearchResult grid_search(std::span<const LearnerConfig> grid, const Eigen::MatrixXd& x_train,
                             const Eigen::VectorXd& y_train, const Eigen::MatrixXd& x_val,
                             const Eigen::VectorXd& y_val) {
  if (grid.empty()) throw ConfigError("hyperparameter grid is empty");
  if (x_val.rows() == 0) throw DataError("grid search needs a non-empty validation split");
  GridSearchResult result;
  result.val_mae.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    LearnerModel model = fit_learner(grid[i], x_train, y_train);
    const Eigen::VectorXd pred = predict(model, x_val);
    const double mae = (pred - y_val).cwiseAbs().mean();
    result.val_mae.push_back(mae);
    const double best = result.val_mae[result.best_index];
    if (i == 0 || mae < best || (mae == best && simpler_than(grid[i], grid[result.best_index]))) {
      result.best_index = i;
      result.best_model = std::move(model);
    }
  }
  result.best = grid[result.best_index];
  return result;
}

}  // namespace lengthlogd
