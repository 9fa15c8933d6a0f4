#include "lengthlogd/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "lengthlogd/elements.hpp"

namespace lengthlogd {

SmilesError::SmilesError(std::string message, std::size_t offset)
    : DataError(fmt::format("{} at offset {}", message, offset)),
      detail_(std::move(message)),
      offset_(offset) {}

int MolecularGraph::bond_between(int a, int b) const {
  for (const Neighbor& n : neighbors(a)) {
    if (n.atom == b) return n.bond;
  }
  return -1;
}

int smiles_length(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return 0;
  const auto last = text.find_last_not_of(" \t\r\n\f\v");
  return static_cast<int>(last - first + 1);
}

namespace {

// ---------------------------------------------------------------------------
// Union-find used for fragments and component counts.

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// ---------------------------------------------------------------------------
// Ring perception: Horton candidate cycles + GF(2) elimination.

using EdgeSet = std::vector<std::uint64_t>;

struct CandidateCycle {
  std::size_t length;
  EdgeSet edges;
  std::vector<int> atoms;
};

bool edge_set_empty(const EdgeSet& s) {
  return std::all_of(s.begin(), s.end(), [](std::uint64_t w) { return w == 0; });
}

int lowest_bit(const EdgeSet& s) {
  for (std::size_t w = 0; w < s.size(); ++w) {
    if (s[w] != 0) return static_cast<int>(w * 64 + static_cast<std::size_t>(__builtin_ctzll(s[w])));
  }
  return -1;
}

bool test_bit(const EdgeSet& s, int bit) {
  return (s[static_cast<std::size_t>(bit) / 64] >> (static_cast<std::size_t>(bit) % 64)) & 1U;
}

// Incremental GF(2) basis keyed by pivot bit.
class CycleSpaceBasis {
 public:
  // Returns true (and keeps v) if v is independent of the current basis.
  bool insert(EdgeSet v) {
    for (;;) {
      const int pivot = lowest_bit(v);
      if (pivot < 0) return false;
      auto it = rows_.find(pivot);
      if (it == rows_.end()) {
        rows_.emplace(pivot, std::move(v));
        return true;
      }
      for (std::size_t w = 0; w < v.size(); ++w) v[w] ^= it->second[w];
    }
  }

 private:
  std::map<int, EdgeSet> rows_;
};

}  // namespace

int component_count(std::size_t atom_count, std::span<const std::pair<int, int>> edges) {
  DisjointSet ds(atom_count);
  for (auto [a, b] : edges) ds.unite(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  int count = 0;
  for (std::size_t i = 0; i < atom_count; ++i) {
    if (ds.find(i) == i) ++count;
  }
  return count;
}

std::vector<Ring> sssr(std::size_t atom_count, std::span<const std::pair<int, int>> edges) {
  const std::size_t m = edges.size();
  const int rank = static_cast<int>(m) - static_cast<int>(atom_count) + component_count(atom_count, edges);
  if (rank <= 0) return {};

  std::vector<std::vector<std::pair<int, int>>> adj(atom_count);  // (neighbor, edge)
  for (std::size_t e = 0; e < m; ++e) {
    adj[static_cast<std::size_t>(edges[e].first)].emplace_back(edges[e].second, static_cast<int>(e));
    adj[static_cast<std::size_t>(edges[e].second)].emplace_back(edges[e].first, static_cast<int>(e));
  }
  const std::size_t words = (m + 63) / 64;

  std::vector<CandidateCycle> candidates;
  std::set<EdgeSet> seen;
  std::vector<int> dist(atom_count);
  std::vector<int> parent_edge(atom_count);
  std::vector<int> parent_atom(atom_count);
  std::vector<int> mark(atom_count, -1);

  for (std::size_t root = 0; root < atom_count; ++root) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(parent_edge.begin(), parent_edge.end(), -1);
    std::fill(parent_atom.begin(), parent_atom.end(), -1);
    std::queue<int> queue;
    dist[root] = 0;
    queue.push(static_cast<int>(root));
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop();
      for (auto [v, e] : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          parent_edge[static_cast<std::size_t>(v)] = e;
          parent_atom[static_cast<std::size_t>(v)] = u;
          queue.push(v);
        }
      }
    }
    for (std::size_t e = 0; e < m; ++e) {
      const int x = edges[e].first;
      const int y = edges[e].second;
      if (dist[static_cast<std::size_t>(x)] < 0) continue;
      if (parent_edge[static_cast<std::size_t>(x)] == static_cast<int>(e) ||
          parent_edge[static_cast<std::size_t>(y)] == static_cast<int>(e)) {
        continue;
      }
      // Paths root->x and root->y must meet only at root.
      const int stamp = static_cast<int>(root * m + e);
      for (int a = x; a >= 0; a = parent_atom[static_cast<std::size_t>(a)]) mark[static_cast<std::size_t>(a)] = stamp;
      bool disjoint = true;
      for (int a = y; a != static_cast<int>(root); a = parent_atom[static_cast<std::size_t>(a)]) {
        if (mark[static_cast<std::size_t>(a)] == stamp) {
          disjoint = false;
          break;
        }
      }
      if (!disjoint) continue;

      CandidateCycle c;
      c.edges.assign(words, 0);
      auto set_edge = [&](int edge) {
        c.edges[static_cast<std::size_t>(edge) / 64] |= std::uint64_t{1} << (static_cast<std::size_t>(edge) % 64);
      };
      set_edge(static_cast<int>(e));
      for (int a = x; a != static_cast<int>(root); a = parent_atom[static_cast<std::size_t>(a)]) {
        set_edge(parent_edge[static_cast<std::size_t>(a)]);
        c.atoms.push_back(a);
      }
      for (int a = y; a != static_cast<int>(root); a = parent_atom[static_cast<std::size_t>(a)]) {
        set_edge(parent_edge[static_cast<std::size_t>(a)]);
        c.atoms.push_back(a);
      }
      c.atoms.push_back(static_cast<int>(root));
      c.length = static_cast<std::size_t>(dist[static_cast<std::size_t>(x)] + dist[static_cast<std::size_t>(y)] + 1);
      if (!seen.insert(c.edges).second) continue;
      std::sort(c.atoms.begin(), c.atoms.end());
      candidates.push_back(std::move(c));
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const CandidateCycle& a, const CandidateCycle& b) {
    if (a.length != b.length) return a.length < b.length;
    return a.atoms < b.atoms || (a.atoms == b.atoms && a.edges < b.edges);
  });

  std::vector<Ring> rings;
  CycleSpaceBasis basis;
  for (const CandidateCycle& c : candidates) {
    if (static_cast<int>(rings.size()) == rank) break;
    if (edge_set_empty(c.edges)) continue;
    if (!basis.insert(c.edges)) continue;
    Ring r;
    r.atoms = c.atoms;
    for (std::size_t e = 0; e < m; ++e) {
      if (test_bit(c.edges, static_cast<int>(e))) r.bonds.push_back(static_cast<int>(e));
    }
    rings.push_back(std::move(r));
  }
  std::sort(rings.begin(), rings.end(), [](const Ring& a, const Ring& b) {
    if (a.atoms.size() != b.atoms.size()) return a.atoms.size() < b.atoms.size();
    return a.atoms < b.atoms;
  });
  return rings;
}

std::vector<Ring> sssr(const MolecularGraph& graph) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(graph.bond_count());
  for (const Bond& b : graph.bonds()) edges.emplace_back(b.begin, b.end);
  return sssr(graph.atom_count(), edges);
}

namespace {

// ---------------------------------------------------------------------------
// Parser

enum class BondSymbol : std::uint8_t { kDefault, kSingle, kDouble, kTriple, kAromatic };

struct RawBond {
  int begin;
  int end;
  BondSymbol symbol;
  std::size_t offset;
};

struct PendingBond {
  BondSymbol symbol;
  std::size_t offset;
};

struct RingOpening {
  int atom;
  std::optional<PendingBond> bond;
  std::size_t offset;
};

struct BranchFrame {
  int atom;
  std::size_t atoms_at_open;
  std::size_t offset;
};

bool aromatic_capable(int z) {
  return z == 5 || z == 6 || z == 7 || z == 8 || z == 15 || z == 16;
}

class Parser {
 public:
  Parser(std::string_view text, std::size_t base) : s_(text), base_(base) {}

  void run() {
    if (s_.empty()) throw SmilesError("empty SMILES", base_);
    int prev = -1;
    std::optional<PendingBond> pending;
    std::vector<BranchFrame> branches;
    std::map<int, RingOpening> open_rings;

    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '(') {
        if (prev < 0) fail("branch without a preceding atom", pos_);
        if (pending) fail("bond symbol before '('", pending->offset);
        branches.push_back({prev, atoms_.size(), pos_});
        ++pos_;
      } else if (c == ')') {
        if (branches.empty()) fail("unmatched ')'", pos_);
        if (pending) fail("dangling bond before ')'", pending->offset);
        if (atoms_.size() == branches.back().atoms_at_open) fail("empty branch", pos_);
        prev = branches.back().atom;
        branches.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\' || c == '$') {
        if (prev < 0) fail("bond without a preceding atom", pos_);
        if (pending) fail("consecutive bond symbols", pos_);
        pending = PendingBond{bond_symbol(c), pos_};
        if (c == '/' || c == '\\') ++stereo_marks_;
        ++pos_;
      } else if (c == '.') {
        if (pending) fail("dangling bond before '.'", pending->offset);
        if (prev < 0) fail("empty fragment", pos_);
        if (!branches.empty()) fail("'.' inside a branch", pos_);
        prev = -1;
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        const std::size_t at = pos_;
        if (prev < 0) fail("ring closure without a preceding atom", at);
        const int label = ring_label();
        auto it = open_rings.find(label);
        if (it == open_rings.end()) {
          open_rings.emplace(label, RingOpening{prev, pending, at});
        } else {
          const RingOpening& open = it->second;
          PendingBond bond{BondSymbol::kDefault, at};
          if (open.bond && pending && open.bond->symbol != pending->symbol) {
            fail("conflicting ring-closure bond symbols", at);
          }
          if (open.bond) bond = *open.bond;
          if (pending) bond = *pending;
          if (open.atom == prev) fail("ring closure to the same atom", at);
          add_bond(open.atom, prev, bond.symbol, bond.offset);
          open_rings.erase(it);
        }
        pending.reset();
      } else if (c == '[' || std::isalpha(static_cast<unsigned char>(c)) || c == '*') {
        const int atom = c == '[' ? bracket_atom() : organic_atom();
        if (prev >= 0) {
          add_bond(prev, atom, pending ? pending->symbol : BondSymbol::kDefault,
                   pending ? pending->offset : atoms_[static_cast<std::size_t>(atom)].offset);
        }
        pending.reset();
        prev = atom;
      } else {
        fail(fmt::format("unexpected character '{}'", c), pos_);
      }
    }
    if (pending) fail("dangling bond at end of input", pending->offset);
    if (!branches.empty()) fail("unclosed branch", s_.size());
    if (!open_rings.empty()) {
      std::size_t first = s_.size();
      for (const auto& [label, open] : open_rings) first = std::min(first, open.offset);
      fail("unmatched ring closure", first);
    }
    if (prev < 0) fail("empty fragment", s_.size());
  }

  std::vector<Atom>& atoms() { return atoms_; }
  std::vector<RawBond>& bonds() { return bonds_; }
  int stereo_marks() const { return stereo_marks_; }

  [[noreturn]] void fail(const std::string& message, std::size_t offset) const {
    throw SmilesError(message, base_ + offset);
  }

 private:
  BondSymbol bond_symbol(char c) const {
    switch (c) {
      case '-': case '/': case '\\': return BondSymbol::kSingle;
      case '=': return BondSymbol::kDouble;
      case '#': return BondSymbol::kTriple;
      case ':': return BondSymbol::kAromatic;
      default: fail("quadruple bonds are not supported", pos_);
    }
  }

  int ring_label() {
    if (s_[pos_] == '%') {
      if (pos_ + 2 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2]))) {
        fail("'%' must be followed by two digits", pos_);
      }
      const int label = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
      pos_ += 3;
      return label;
    }
    return s_[pos_++] - '0';
  }

  void add_bond(int a, int b, BondSymbol symbol, std::size_t offset) {
    for (const RawBond& rb : bonds_) {
      if ((rb.begin == a && rb.end == b) || (rb.begin == b && rb.end == a)) {
        fail("duplicate bond between the same atoms", offset);
      }
    }
    if (symbol == BondSymbol::kAromatic &&
        (!atoms_[static_cast<std::size_t>(a)].aromatic || !atoms_[static_cast<std::size_t>(b)].aromatic)) {
      fail("aromatic bond between non-aromatic atoms", offset);
    }
    bonds_.push_back({a, b, symbol, offset});
  }

  int push_atom(Atom atom) {
    atoms_.push_back(atom);
    return static_cast<int>(atoms_.size()) - 1;
  }

  int organic_atom() {
    const std::size_t at = pos_;
    Atom atom;
    atom.offset = base_ + at;
    const char c = s_[pos_];
    auto next_is = [&](char ch) { return pos_ + 1 < s_.size() && s_[pos_ + 1] == ch; };
    std::string_view symbol;
    if (c == 'C' && next_is('l')) {
      symbol = "Cl";
    } else if (c == 'B' && next_is('r')) {
      symbol = "Br";
    } else {
      switch (c) {
        case 'B': symbol = "B"; break;
        case 'C': symbol = "C"; break;
        case 'N': symbol = "N"; break;
        case 'O': symbol = "O"; break;
        case 'P': symbol = "P"; break;
        case 'S': symbol = "S"; break;
        case 'F': symbol = "F"; break;
        case 'I': symbol = "I"; break;
        case 'b': symbol = "B"; atom.aromatic = true; break;
        case 'c': symbol = "C"; atom.aromatic = true; break;
        case 'n': symbol = "N"; atom.aromatic = true; break;
        case 'o': symbol = "O"; atom.aromatic = true; break;
        case 'p': symbol = "P"; atom.aromatic = true; break;
        case 's': symbol = "S"; atom.aromatic = true; break;
        default: {
          std::size_t len = 1;
          if (pos_ + 1 < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_ + 1]))) len = 2;
          fail(fmt::format("unknown element '{}' (non-organic atoms need brackets)", s_.substr(pos_, len)), at);
        }
      }
    }
    atom.atomic_number = find_element(symbol)->atomic_number;
    pos_ += symbol.size();
    return push_atom(atom);
  }

  std::optional<int> read_number() {
    if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) return std::nullopt;
    int value = 0;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      value = value * 10 + (s_[pos_] - '0');
      if (value > 100000) fail("number too large", pos_);
      ++pos_;
    }
    return value;
  }

  int bracket_atom() {
    const std::size_t open = pos_;
    ++pos_;
    Atom atom;
    atom.bracket = true;
    atom.offset = base_ + open;
    atom.isotope = read_number();

    if (pos_ >= s_.size()) fail("unterminated bracket atom", open);
    const std::size_t sym_at = pos_;
    const char c = s_[pos_];
    std::string symbol;
    if (std::islower(static_cast<unsigned char>(c))) {
      // Aromatic symbol.
      if (pos_ + 1 < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_ + 1]))) {
        fail(fmt::format("unsupported aromatic element '{}'", s_.substr(pos_, 2)), sym_at);
      }
      symbol = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      atom.aromatic = true;
      ++pos_;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      if (pos_ + 1 < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_ + 1]))) {
        symbol = std::string(s_.substr(pos_, 2));
        if (find_element(symbol) == nullptr) fail(fmt::format("unknown element '{}'", symbol), sym_at);
        pos_ += 2;
      } else {
        symbol = std::string(1, c);
        ++pos_;
      }
    } else {
      fail("expected element symbol in bracket atom", sym_at);
    }
    const Element* element = find_element(symbol);
    if (element == nullptr) fail(fmt::format("unknown element '{}'", symbol), sym_at);
    atom.atomic_number = element->atomic_number;
    if (atom.aromatic && !aromatic_capable(atom.atomic_number)) {
      fail(fmt::format("element '{}' cannot be aromatic", symbol), sym_at);
    }

    // Chirality: @, @@, and the @TH1-style classes.
    if (pos_ < s_.size() && s_[pos_] == '@') {
      ++stereo_marks_;
      ++pos_;
      if (pos_ < s_.size() && s_[pos_] == '@') {
        ++pos_;
      } else if (pos_ + 1 < s_.size() && std::isupper(static_cast<unsigned char>(s_[pos_])) &&
                 std::isupper(static_cast<unsigned char>(s_[pos_ + 1]))) {
        pos_ += 2;
        if (!read_number()) fail("chirality class without a number", pos_);
      }
    }
    if (pos_ < s_.size() && s_[pos_] == 'H') {
      ++pos_;
      atom.explicit_h = read_number().value_or(1);
    } else {
      atom.explicit_h = 0;
    }
    if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
      const char sign = s_[pos_];
      const int unit = sign == '+' ? 1 : -1;
      ++pos_;
      if (auto n = read_number()) {
        atom.formal_charge = unit * *n;
      } else {
        int count = 1;
        while (pos_ < s_.size() && s_[pos_] == sign) {
          ++count;
          ++pos_;
        }
        atom.formal_charge = unit * count;
      }
    }
    if (pos_ < s_.size() && s_[pos_] == ':') {
      ++pos_;
      if (!read_number()) fail("atom class without a number", pos_);
    }
    if (pos_ >= s_.size()) fail("unterminated bracket atom", open);
    if (s_[pos_] != ']') fail(fmt::format("unexpected character '{}' in bracket atom", s_[pos_]), pos_);
    ++pos_;
    return push_atom(atom);
  }

  std::string_view s_;
  std::size_t base_;
  std::size_t pos_ = 0;
  std::vector<Atom> atoms_;
  std::vector<RawBond> bonds_;
  int stereo_marks_ = 0;
};

int order_value(BondOrder o) {
  switch (o) {
    case BondOrder::kSingle: return 1;
    case BondOrder::kDouble: return 2;
    case BondOrder::kTriple: return 3;
    case BondOrder::kAromatic: return 1;
  }
  return 1;
}

}  // namespace

MolecularGraph parse_smiles(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n\f\v");
  const std::size_t base = first == std::string_view::npos ? 0 : first;
  const std::string_view trimmed =
      first == std::string_view::npos ? std::string_view{} : text.substr(first, static_cast<std::size_t>(smiles_length(text)));

  Parser parser(trimmed, base);
  parser.run();
  std::vector<Atom>& raw_atoms = parser.atoms();
  std::vector<RawBond>& raw_bonds = parser.bonds();

  MolecularGraph g;
  g.source_ = std::string(trimmed);
  g.smiles_length_ = static_cast<int>(trimmed.size());
  g.report_.stereo_marks_discarded = parser.stereo_marks();
  if (parser.stereo_marks() > 0) {
    g.report_.warnings.push_back(fmt::format("{} stereo mark(s) discarded", parser.stereo_marks()));
  }

  // Largest fragment by heavy-atom count; ties keep the earliest fragment.
  DisjointSet ds(raw_atoms.size());
  for (const RawBond& b : raw_bonds) ds.unite(static_cast<std::size_t>(b.begin), static_cast<std::size_t>(b.end));
  std::map<std::size_t, int> heavy_per_root;
  std::vector<std::size_t> root_order;
  for (std::size_t i = 0; i < raw_atoms.size(); ++i) {
    const std::size_t r = ds.find(i);
    if (!heavy_per_root.contains(r)) {
      heavy_per_root[r] = 0;
      root_order.push_back(r);
    }
    if (raw_atoms[i].atomic_number != 1) ++heavy_per_root[r];
  }
  std::size_t kept_root = root_order.front();
  for (std::size_t r : root_order) {
    if (heavy_per_root[r] > heavy_per_root[kept_root]) kept_root = r;
  }
  if (heavy_per_root[kept_root] == 0) throw SmilesError("empty largest fragment (no heavy atoms)", base);
  if (root_order.size() > 1) {
    g.report_.fragments_dropped = static_cast<int>(root_order.size()) - 1;
    g.report_.warnings.push_back(
        fmt::format("kept largest of {} fragments ({} heavy atoms)", root_order.size(), heavy_per_root[kept_root]));
  }

  // Re-index the kept fragment, hydrogens included for now.
  std::vector<int> remap(raw_atoms.size(), -1);
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < raw_atoms.size(); ++i) {
    if (ds.find(i) == kept_root) {
      remap[i] = static_cast<int>(atoms.size());
      atoms.push_back(raw_atoms[i]);
    }
  }
  struct WorkBond {
    int begin;
    int end;
    BondSymbol symbol;
    std::size_t offset;
    BondOrder order = BondOrder::kSingle;
    bool in_ring = false;
  };
  std::vector<WorkBond> bonds;
  for (const RawBond& b : raw_bonds) {
    if (remap[static_cast<std::size_t>(b.begin)] >= 0) {
      bonds.push_back({remap[static_cast<std::size_t>(b.begin)], remap[static_cast<std::size_t>(b.end)], b.symbol, b.offset});
    }
  }

  std::vector<std::vector<int>> incident(atoms.size());
  for (std::size_t e = 0; e < bonds.size(); ++e) {
    incident[static_cast<std::size_t>(bonds[e].begin)].push_back(static_cast<int>(e));
    incident[static_cast<std::size_t>(bonds[e].end)].push_back(static_cast<int>(e));
  }
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].atomic_number == 1 && incident[i].size() > 1) {
      parser.fail("hydrogen with more than one bond", atoms[i].offset - base);
    }
  }

  // Ring membership decides how unmarked bonds between aromatic atoms resolve.
  {
    std::vector<std::pair<int, int>> edges;
    for (const WorkBond& b : bonds) edges.emplace_back(b.begin, b.end);
    for (const Ring& r : sssr(atoms.size(), edges)) {
      for (int e : r.bonds) bonds[static_cast<std::size_t>(e)].in_ring = true;
      for (int a : r.atoms) atoms[static_cast<std::size_t>(a)].in_ring = true;
    }
  }
  for (WorkBond& b : bonds) {
    switch (b.symbol) {
      case BondSymbol::kSingle: b.order = BondOrder::kSingle; break;
      case BondSymbol::kDouble: b.order = BondOrder::kDouble; break;
      case BondSymbol::kTriple: b.order = BondOrder::kTriple; break;
      case BondSymbol::kAromatic: b.order = BondOrder::kAromatic; break;
      case BondSymbol::kDefault: {
        const bool both_aromatic =
            atoms[static_cast<std::size_t>(b.begin)].aromatic && atoms[static_cast<std::size_t>(b.end)].aromatic;
        b.order = both_aromatic && b.in_ring ? BondOrder::kAromatic : BondOrder::kSingle;
        break;
      }
    }
    if (atoms[static_cast<std::size_t>(b.begin)].atomic_number == 1 ||
        atoms[static_cast<std::size_t>(b.end)].atomic_number == 1) {
      if (b.order != BondOrder::kSingle) parser.fail("hydrogen with a multiple bond", b.offset - base);
    }
  }
  for (const Atom& a : atoms) {
    if (a.aromatic && !a.in_ring) parser.fail("aromatic atom outside a ring", a.offset - base);
  }

  // Hydrogen counts and valence checks.
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    Atom& a = atoms[i];
    int lower_bound = 0;  // aromatic bonds counted as 1
    int doubled_sum = 0;  // aromatic bonds counted as 1.5, times two
    for (int e : incident[i]) {
      const BondOrder o = bonds[static_cast<std::size_t>(e)].order;
      lower_bound += order_value(o);
      doubled_sum += o == BondOrder::kAromatic ? 3 : 2 * order_value(o);
    }
    const std::span<const int> valences = allowed_valences(a.atomic_number, a.formal_charge);
    if (a.bracket) {
      a.implicit_h = *a.explicit_h;
    } else if (a.aromatic && a.atomic_number != 5 && a.atomic_number != 6) {
      a.implicit_h = 0;  // aromatic n, o, s, p: hydrogens must be written in brackets
    } else {
      const int sum = doubled_sum / 2;
      a.implicit_h = 0;
      bool found = false;
      for (int v : valences) {
        if (v >= sum) {
          a.implicit_h = v - sum;
          found = true;
          break;
        }
      }
      if (!found && !a.aromatic) {
        parser.fail(fmt::format("valence {} exceeds the allowed maximum for {}", sum,
                                element_by_number(a.atomic_number).symbol),
                    a.offset - base);
      }
    }
    if (!valences.empty() && lower_bound + a.implicit_h > valences.back()) {
      parser.fail(fmt::format("valence {} exceeds the allowed maximum for {}{}", lower_bound + a.implicit_h,
                              element_by_number(a.atomic_number).symbol,
                              a.formal_charge == 0 ? std::string() : fmt::format("{:+d}", a.formal_charge)),
                  a.offset - base);
    }
  }

  // Fold explicit hydrogen atoms into their heavy neighbour.
  std::vector<int> final_index(atoms.size(), -1);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].atomic_number == 1 && incident[i].size() == 1) {
      const WorkBond& b = bonds[static_cast<std::size_t>(incident[i][0])];
      const int heavy = b.begin == static_cast<int>(i) ? b.end : b.begin;
      if (atoms[static_cast<std::size_t>(heavy)].atomic_number != 1) {
        atoms[static_cast<std::size_t>(heavy)].folded_h += 1 + atoms[i].total_h();
        continue;
      }
    }
    if (atoms[i].atomic_number == 1) {
      parser.fail("hydrogen atom not attached to a heavy atom", atoms[i].offset - base);
    }
  }
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].atomic_number != 1) {
      final_index[i] = static_cast<int>(g.atoms_.size());
      g.atoms_.push_back(atoms[i]);
    }
  }
  for (const WorkBond& b : bonds) {
    const int u = final_index[static_cast<std::size_t>(b.begin)];
    const int v = final_index[static_cast<std::size_t>(b.end)];
    if (u < 0 || v < 0) continue;
    g.bonds_.push_back({u, v, b.order, false});
  }

  g.adjacency_.assign(g.atoms_.size(), {});
  for (std::size_t e = 0; e < g.bonds_.size(); ++e) {
    const Bond& b = g.bonds_[e];
    g.adjacency_[static_cast<std::size_t>(b.begin)].push_back({b.end, static_cast<int>(e)});
    g.adjacency_[static_cast<std::size_t>(b.end)].push_back({b.begin, static_cast<int>(e)});
  }
  for (std::size_t i = 0; i < g.atoms_.size(); ++i) {
    g.atoms_[i].degree = static_cast<int>(g.adjacency_[i].size());
    g.atoms_[i].in_ring = false;
  }
  g.rings_ = sssr(g);
  for (const Ring& r : g.rings_) {
    for (int a : r.atoms) g.atoms_[static_cast<std::size_t>(a)].in_ring = true;
    for (int e : r.bonds) g.bonds_[static_cast<std::size_t>(e)].in_ring = true;
  }
  return g;
}

}  // namespace lengthlogd
