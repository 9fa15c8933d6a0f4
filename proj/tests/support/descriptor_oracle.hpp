#pragma once
// Brute-force reference implementations of the topological descriptors.
// Deliberately share no code with src/descriptors.cpp: Floyd-Warshall for
// distances, explicit simple-path enumeration for path counts.

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "lengthlogd/smiles.hpp"

namespace lengthlogd::testing {

inline std::vector<std::vector<int>> floyd_warshall(const MolecularGraph& g) {
  const std::size_t n = g.atom_count();
  const int inf = 1 << 28;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const Bond& b : g.bonds()) {
    d[static_cast<std::size_t>(b.begin)][static_cast<std::size_t>(b.end)] = 1;
    d[static_cast<std::size_t>(b.end)][static_cast<std::size_t>(b.begin)] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

inline std::vector<int> degrees_from_bonds(const MolecularGraph& g) {
  std::vector<int> deg(g.atom_count(), 0);
  for (const Bond& b : g.bonds()) {
    ++deg[static_cast<std::size_t>(b.begin)];
    ++deg[static_cast<std::size_t>(b.end)];
  }
  return deg;
}

// Number of simple paths with exactly `length` bonds, each counted once
// regardless of direction.
inline std::int64_t count_paths(const MolecularGraph& g, int length) {
  const std::size_t n = g.atom_count();
  std::vector<std::vector<int>> adj(n);
  for (const Bond& b : g.bonds()) {
    adj[static_cast<std::size_t>(b.begin)].push_back(b.end);
    adj[static_cast<std::size_t>(b.end)].push_back(b.begin);
  }
  std::set<std::vector<int>> paths;
  std::vector<int> path;
  std::vector<char> on_path(n, 0);
  auto dfs = [&](auto&& self, int u) -> void {
    if (static_cast<int>(path.size()) == length + 1) {
      std::vector<int> p = path;
      std::vector<int> r(p.rbegin(), p.rend());
      paths.insert(std::min(p, r));
      return;
    }
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (on_path[static_cast<std::size_t>(v)]) continue;
      on_path[static_cast<std::size_t>(v)] = 1;
      path.push_back(v);
      self(self, v);
      path.pop_back();
      on_path[static_cast<std::size_t>(v)] = 0;
    }
  };
  for (std::size_t s = 0; s < n; ++s) {
    path = {static_cast<int>(s)};
    on_path[s] = 1;
    dfs(dfs, static_cast<int>(s));
    on_path[s] = 0;
  }
  return static_cast<std::int64_t>(paths.size());
}

inline std::int64_t oracle_wiener(const MolecularGraph& g) {
  const auto d = floyd_warshall(g);
  std::int64_t s = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) s += d[i][j];
  return s;
}

inline double oracle_chi0(const MolecularGraph& g) {
  double s = 0;
  for (int d : degrees_from_bonds(g)) s += d == 0 ? 1.0 : 1.0 / std::sqrt(d);
  return s;
}

inline double oracle_chi1(const MolecularGraph& g) {
  const auto deg = degrees_from_bonds(g);
  double s = 0;
  for (const Bond& b : g.bonds()) {
    s += 1.0 / std::sqrt(static_cast<double>(deg[static_cast<std::size_t>(b.begin)] * deg[static_cast<std::size_t>(b.end)]));
  }
  return s;
}

struct OracleKappa {
  double k1, k2, k3;
};

inline OracleKappa oracle_kappa(const MolecularGraph& g) {
  const double a = static_cast<double>(g.atom_count());
  const double p1 = static_cast<double>(count_paths(g, 1));
  const double p2 = static_cast<double>(count_paths(g, 2));
  const double p3 = static_cast<double>(count_paths(g, 3));
  OracleKappa k{0, 0, 0};
  if (p1 > 0) k.k1 = a * (a - 1) * (a - 1) / (p1 * p1);
  if (p2 > 0) k.k2 = (a - 1) * (a - 2) * (a - 2) / (p2 * p2);
  if (p3 > 0 && g.atom_count() >= 3) {
    k.k3 = (g.atom_count() % 2 == 1) ? (a - 1) * (a - 3) * (a - 3) / (p3 * p3) : (a - 3) * (a - 2) * (a - 2) / (p3 * p3);
  }
  return k;
}

inline double oracle_balaban(const MolecularGraph& g) {
  const std::size_t n = g.atom_count();
  const std::size_t m = g.bond_count();
  if (n < 2 || m == 0) return 0.0;
  const auto d = floyd_warshall(g);
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s[i] += d[i][j];
  double sum = 0;
  for (const Bond& b : g.bonds()) sum += 1.0 / std::sqrt(s[static_cast<std::size_t>(b.begin)] * s[static_cast<std::size_t>(b.end)]);
  const double mu = static_cast<double>(m) - static_cast<double>(n) + 1.0;
  return static_cast<double>(m) / (mu + 1.0) * sum;
}

// Environments a circular fingerprint emits: one per atom at radius 0, plus
// one per distinct non-empty bond set at radius 1..R. The bond set of atom a
// at radius r is every bond with an endpoint within distance r-1 of a.
inline std::size_t oracle_environment_count(const MolecularGraph& g, int radius) {
  const auto d = floyd_warshall(g);
  std::set<std::vector<int>> bond_sets;
  for (std::size_t a = 0; a < g.atom_count(); ++a) {
    for (int r = 1; r <= radius; ++r) {
      std::vector<int> set;
      for (std::size_t e = 0; e < g.bond_count(); ++e) {
        const Bond& b = g.bonds()[e];
        if (d[a][static_cast<std::size_t>(b.begin)] <= r - 1 || d[a][static_cast<std::size_t>(b.end)] <= r - 1) {
          set.push_back(static_cast<int>(e));
        }
      }
      if (!set.empty()) bond_sets.insert(set);
    }
  }
  return g.atom_count() + bond_sets.size();
}

}  // namespace lengthlogd::testing
