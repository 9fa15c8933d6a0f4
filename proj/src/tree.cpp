#include <algorithm>
#include <cmath>
#include <limits>

#include "lengthlogd/errors.hpp"
#include "lengthlogd/learners.hpp"
#include "lengthlogd/random.hpp"
#include "tree_index.hpp"

namespace lengthlogd {

int RegressionTree::depth() const {
  if (feature.empty()) return 0;
  int best = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (feature[static_cast<std::size_t>(node)] >= 0) {
      stack.emplace_back(left[static_cast<std::size_t>(node)], d + 1);
      stack.emplace_back(right[static_cast<std::size_t>(node)], d + 1);
    }
  }
  return best;
}

int RegressionTree::leaf_of(std::span<const double> row) const {
  int node = 0;
  while (feature[static_cast<std::size_t>(node)] >= 0) {
    const auto k = static_cast<std::size_t>(node);
    node = row[static_cast<std::size_t>(feature[k])] <= threshold[k] ? left[k] : right[k];
  }
  return node;
}

double RegressionTree::predict(std::span<const double> row) const {
  return value[static_cast<std::size_t>(leaf_of(row))];
}

namespace detail {

ColumnIndex index_columns(const Eigen::MatrixXd& x) {
  ColumnIndex index;
  const auto n = static_cast<std::size_t>(x.rows());
  index.columns.resize(static_cast<std::size_t>(x.cols()));
  for (std::size_t j = 0; j < index.columns.size(); ++j) {
    ColumnIndex::Column& col = index.columns[j];
    const auto c = static_cast<Eigen::Index>(j);
    if (n == 0) continue;
    const double first = x(0, c);
    double other = first;
    bool have_other = false;
    for (std::size_t r = 0; r < n && col.kind != ColumnKind::kGeneral; ++r) {
      const double v = x(static_cast<Eigen::Index>(r), c);
      if (v == first) continue;
      if (!have_other) {
        other = v;
        have_other = true;
        col.kind = ColumnKind::kBinary;
      } else if (v != other) {
        col.kind = ColumnKind::kGeneral;
      }
    }
    if (col.kind == ColumnKind::kConstant) continue;
    index.usable.push_back(j);
    if (col.kind == ColumnKind::kBinary) {
      col.lo = std::min(first, other);
      col.hi = std::max(first, other);
      std::size_t n_hi = 0;
      for (std::size_t r = 0; r < n; ++r) n_hi += x(static_cast<Eigen::Index>(r), c) == col.hi;
      col.minority_is_hi = 2 * n_hi <= n;
      const double minority = col.minority_is_hi ? col.hi : col.lo;
      for (std::size_t r = 0; r < n; ++r) {
        if (x(static_cast<Eigen::Index>(r), c) == minority) col.rows.push_back(r);
      }
    } else {
      col.rows.resize(n);
      for (std::size_t r = 0; r < n; ++r) col.rows[r] = r;
      std::sort(col.rows.begin(), col.rows.end(), [&](std::size_t a, std::size_t b) {
        const double va = x(static_cast<Eigen::Index>(a), c), vb = x(static_cast<Eigen::Index>(b), c);
        return va != vb ? va < vb : a < b;
      });
    }
  }
  return index;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeConfig& config, Rng* rng,
              const ColumnIndex& index)
      : x_(x), y_(y), config_(config), rng_(rng), index_(index), count_(static_cast<std::size_t>(x.rows()), 0) {}

  RegressionTree build(std::span<const std::size_t> rows) {
    std::vector<std::size_t> root(rows.begin(), rows.end());
    grow(root, 0);
    return std::move(tree_);
  }

 private:
  static double midpoint(double a, double b) {
    const double m = a + (b - a) / 2.0;
    return m < b ? m : a;  // adjacent doubles: keep `a` so that a goes left
  }

  double yv(std::size_t r) const { return y_(static_cast<Eigen::Index>(r)); }
  double xv(std::size_t r, std::size_t j) const {
    return x_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
  }

  int add_node(double value, int samples) {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(value);
    tree_.gain.push_back(0.0);
    tree_.samples.push_back(samples);
    return static_cast<int>(tree_.feature.size()) - 1;
  }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const std::size_t n = rows.size();
    double sum = 0.0;
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -ymin;
    for (std::size_t r : rows) {
      const double v = yv(r);
      sum += v;
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
    const double mean = ymin == ymax ? ymin : sum / static_cast<double>(n);
    const int node = add_node(mean, static_cast<int>(n));

    const bool depth_ok = config_.max_depth < 0 || depth < config_.max_depth;
    const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, config_.min_leaf));
    if (!depth_ok || n < 2 * min_leaf || ymin == ymax) return node;

    const Split best = find_split(rows, mean, min_leaf);
    if (best.feature < 0) return node;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (xv(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left_rows : right_rows).push_back(r);
    }
    const std::size_t k = static_cast<std::size_t>(node);
    tree_.feature[k] = best.feature;
    tree_.threshold[k] = best.threshold;
    tree_.gain[k] = best.gain;
    const int l = grow(left_rows, depth + 1);
    tree_.left[k] = l;
    const int r = grow(right_rows, depth + 1);
    tree_.right[k] = r;
    return node;
  }

  std::vector<std::size_t> candidate_features() {
    const auto& pool = index_.usable;
    const std::size_t m = config_.m_features > 0 ? static_cast<std::size_t>(config_.m_features) : pool.size();
    if (m >= pool.size() || rng_ == nullptr) return pool;
    std::vector<std::size_t> picked = rng_->sample_without_replacement(pool.size(), m);
    std::sort(picked.begin(), picked.end());
    for (std::size_t& p : picked) p = pool[p];
    return picked;
  }

  Split find_split(const std::vector<std::size_t>& rows, double mean, std::size_t min_leaf) {
    const std::size_t n = rows.size();
    std::vector<double> yc(n);
    double sse = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      yc[i] = yv(rows[i]) - mean;
      sse += yc[i] * yc[i];
      total += yc[i];
      ++count_[rows[i]];
    }
    const double base = total * total / static_cast<double>(n);
    const double min_gain = 1e-12 * sse;
    // Walking a column's global order beats sorting the node's rows once
    // the node holds a sizeable share of the training rows.
    const bool walk = 8 * n >= count_.size();

    Split best;
    auto consider = [&](std::size_t j, double threshold, double s_left, std::size_t n_left) {
      const std::size_t n_right = n - n_left;
      const double s_right = total - s_left;
      const double gain = s_left * s_left / static_cast<double>(n_left) +
                          s_right * s_right / static_cast<double>(n_right) - base;
      if (gain > best.gain && gain > min_gain) best = {static_cast<int>(j), threshold, gain};
    };

    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t j : candidate_features()) {
      const ColumnIndex::Column& col = index_.columns[j];
      if (col.kind == ColumnKind::kBinary) {
        // Sum over the rows holding the column's rarer value.
        const double minority = col.minority_is_hi ? col.hi : col.lo;
        double s_min = 0.0;
        std::size_t n_min = 0;
        if (col.rows.size() < n) {
          for (std::size_t r : col.rows) {
            if (const int c = count_[r]; c > 0) {
              s_min += c * (yv(r) - mean);
              n_min += static_cast<std::size_t>(c);
            }
          }
        } else {
          for (std::size_t i = 0; i < n; ++i) {
            if (xv(rows[i], j) == minority) {
              s_min += yc[i];
              ++n_min;
            }
          }
        }
        const std::size_t n_left = col.minority_is_hi ? n - n_min : n_min;
        const double s_left = col.minority_is_hi ? total - s_min : s_min;
        if (n_left >= min_leaf && n - n_left >= min_leaf) consider(j, midpoint(col.lo, col.hi), s_left, n_left);
        continue;
      }

      double s_left = 0.0;
      std::size_t n_left = 0;
      double prev = 0.0;
      bool started = false;
      // Adds a block of rows sharing value v, testing the boundary before it.
      auto step = [&](double v, double s, std::size_t c) {
        if (started && v != prev && n_left >= min_leaf) {
          if (n - n_left < min_leaf) return false;
          consider(j, midpoint(prev, v), s_left, n_left);
        }
        s_left += s;
        n_left += c;
        prev = v;
        started = true;
        return true;
      };
      if (walk) {
        for (std::size_t r : col.rows) {
          const int c = count_[r];
          if (c > 0 && !step(xv(r, j), c * (yv(r) - mean), static_cast<std::size_t>(c))) break;
        }
      } else {
        order.clear();
        for (std::size_t i = 0; i < n; ++i) order.emplace_back(xv(rows[i], j), i);
        std::sort(order.begin(), order.end());
        for (const auto& [v, i] : order) {
          if (!step(v, yc[i], 1)) break;
        }
      }
    }
    for (std::size_t r : rows) count_[r] = 0;
    return best;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  TreeConfig config_;
  Rng* rng_;
  const ColumnIndex& index_;
  std::vector<int> count_;  // multiplicity of each row in the node being split
  RegressionTree tree_;
};

}  // namespace

RegressionTree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                         const TreeConfig& config, Rng* rng, const ColumnIndex& index) {
  if (rows.empty()) throw DataError("cannot fit a tree on zero rows");
  TreeBuilder builder(x, y, config, rng, index);
  return builder.build(rows);
}

}  // namespace detail

RegressionTree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                        const TreeConfig& config, Rng* rng) {
  if (rows.empty()) throw DataError("cannot fit a tree on zero rows");
  if (x.rows() != y.size()) throw DataError("feature and target row counts differ");
  if (config.m_features > 0 && rng == nullptr && config.m_features < x.cols()) {
    throw ConfigError("feature subsampling needs a random generator");
  }
  return detail::grow_tree(x, y, rows, config, rng, detail::index_columns(x));
}

}  // namespace lengthlogd
