#pragma once
// Closed-form ridge via the centered normal equations, solved with plain
// Gaussian elimination and partial pivoting. No Eigen.

#include <cmath>
#include <utility>
#include <vector>

namespace lengthlogd::testing {

struct OracleRidge {
  std::vector<double> w;
  double b = 0.0;
};

inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(rhs[c], rhs[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      rhs[r] -= f * rhs[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

inline OracleRidge oracle_ridge(const std::vector<std::vector<double>>& x, const std::vector<double>& y, double lambda) {
  const std::size_t n = x.size(), p = x[0].size();
  std::vector<double> mx(p, 0.0);
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) mx[j] += x[i][j] / static_cast<double>(n);
    my += y[i] / static_cast<double>(n);
  }
  std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0));
  std::vector<double> rhs(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      rhs[j] += (x[i][j] - mx[j]) * (y[i] - my);
      for (std::size_t k = 0; k < p; ++k) a[j][k] += (x[i][j] - mx[j]) * (x[i][k] - mx[k]);
    }
  }
  for (std::size_t j = 0; j < p; ++j) a[j][j] += lambda;
  OracleRidge out;
  out.w = gauss_solve(a, rhs);
  out.b = my;
  for (std::size_t j = 0; j < p; ++j) out.b -= mx[j] * out.w[j];
  return out;
}

}  // namespace lengthlogd::testing
