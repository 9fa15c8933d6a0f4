#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lengthlogd/learners.hpp"

namespace lengthlogd::detail {

enum class ColumnKind : std::uint8_t { kConstant, kBinary, kGeneral };

/// Per-column lookup tables over all rows of a training matrix, shared by
/// every tree grown on it.
struct ColumnIndex {
  struct Column {
    ColumnKind kind = ColumnKind::kConstant;
    double lo = 0.0;                 // binary: the two values
    double hi = 0.0;
    bool minority_is_hi = true;
    std::vector<std::size_t> rows;   // binary: rows holding the rarer value; general: all rows sorted by (value, row)
  };
  std::vector<Column> columns;
  std::vector<std::size_t> usable;  // non-constant columns, ascending
};

ColumnIndex index_columns(const Eigen::MatrixXd& x);

RegressionTree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                         const TreeConfig& config, Rng* rng, const ColumnIndex& index);

}  // namespace lengthlogd::detail
