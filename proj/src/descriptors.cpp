#include "lengthlogd/descriptors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "lengthlogd/elements.hpp"
#include "lengthlogd/errors.hpp"
#include "lengthlogd/random.hpp"

namespace lengthlogd {

std::string_view group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::kMorgan: return "morgan";
    case FeatureGroup::kMaccs: return "maccs";
    case FeatureGroup::kRdkitGlobal: return "rdkit_global";
    case FeatureGroup::kExternal: return "external";
    case FeatureGroup::kGraph: return "graph";
    case FeatureGroup::kSmilesLen: return "smiles_len";
  }
  return "unknown";
}

FeatureGroup parse_group(std::string_view name) {
  for (FeatureGroup g : kAllGroups) {
    if (group_name(g) == name) return g;
  }
  throw DataError(fmt::format("unknown feature group '{}'", name));
}

FeatureSchema::FeatureSchema(std::vector<FeatureEntry> entries, int morgan_radius, int morgan_bits)
    : entries_(std::move(entries)), morgan_radius_(morgan_radius), morgan_bits_(morgan_bits) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].group == FeatureGroup::kMorgan) {
      const std::string& name = entries_[i].name;
      std::size_t bit = 0;
      const char* first = name.data() + std::min<std::size_t>(7, name.size());
      auto [ptr, ec] = std::from_chars(first, name.data() + name.size(), bit);
      if (name.rfind("Morgan_", 0) != 0 || ec != std::errc{} || ptr != name.data() + name.size() ||
          bit >= static_cast<std::size_t>(morgan_bits_)) {
        throw DataError(fmt::format("malformed morgan feature name '{}'", name));
      }
      morgan_bit_.push_back(bit);
    }
    if (i > 0 && entries_[i].group < entries_[i - 1].group) {
      throw DataError(fmt::format("feature '{}' breaks the group order", entries_[i].name));
    }
    if (!index_.emplace(entries_[i].name, i).second) {
      throw DataError(fmt::format("duplicate feature name '{}'", entries_[i].name));
    }
  }
}

std::size_t FeatureSchema::count(FeatureGroup group) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [group](const FeatureEntry& e) { return e.group == group; }));
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> FeatureSchema::indices_without(std::span<const FeatureGroup> excluded) const {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), entries_[i].group) == excluded.end()) kept.push_back(i);
  }
  return kept;
}

FeatureSchema FeatureSchema::without(std::span<const FeatureGroup> excluded) const {
  return select(indices_without(excluded));
}

FeatureSchema FeatureSchema::select(std::span<const std::size_t> indices) const {
  std::vector<FeatureEntry> kept;
  kept.reserve(indices.size());
  for (std::size_t i : indices) kept.push_back(entries_.at(i));
  return FeatureSchema(std::move(kept), morgan_radius_, morgan_bits_);
}

std::string FeatureSchema::to_text() const {
  std::string out = fmt::format("# lengthlogd-schema v{} morgan_radius={} morgan_bits={}\n", kFormatVersion,
                                morgan_radius_, morgan_bits_);
  out += "index,name,group\n";
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    out += fmt::format("{},{},{}\n", i, entries_[i].name, group_name(entries_[i].group));
  }
  return out;
}

FeatureSchema FeatureSchema::from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty schema");
  int version = 0;
  int radius = 0;
  int bits = 0;
  if (std::sscanf(line.c_str(), "# lengthlogd-schema v%d morgan_radius=%d morgan_bits=%d", &version, &radius, &bits) !=
      3) {
    throw DataError("schema header missing");
  }
  if (version != kFormatVersion) throw DataError(fmt::format("unsupported schema version {}", version));
  if (!std::getline(in, line) || line != "index,name,group") throw DataError("schema column header missing");
  std::vector<FeatureEntry> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.rfind(',');
    if (c1 == std::string::npos || c1 == c2) throw DataError(fmt::format("malformed schema row '{}'", line));
    if (std::stoul(line.substr(0, c1)) != entries.size()) throw DataError("schema rows out of order");
    entries.push_back({line.substr(c1 + 1, c2 - c1 - 1), parse_group(line.substr(c2 + 1))});
  }
  return FeatureSchema(std::move(entries), radius, bits);
}

std::vector<std::string> rdkit_global_names() {
  return {"MolWt",     "ExactMolWt",       "NumHDonors",   "NumHAcceptors", "NumRotatableBonds", "RingCount",
          "NumAromaticRings", "FractionCSP3", "Kappa1", "Kappa2",       "Kappa3",            "BalabanJ"};
}

std::vector<std::string> graph_feature_names() { return {"WienerIndex", "Chi0", "Chi1"}; }

namespace {

bool is_maccs_name(std::string_view name) {
  constexpr std::string_view prefix = "maccs";
  if (name.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(name[i])) != prefix[i]) return false;
  }
  return true;
}

}  // namespace

FeatureSchema build_schema(std::span<const std::string> external_columns, const SchemaOptions& options) {
  if (options.morgan_radius < 0 || options.morgan_bits < 1) {
    throw ConfigError("morgan radius must be >= 0 and bit count >= 1");
  }
  std::vector<FeatureEntry> entries;
  for (int b = 0; b < options.morgan_bits; ++b) entries.push_back({fmt::format("Morgan_{}", b), FeatureGroup::kMorgan});
  for (const std::string& name : external_columns) {
    if (is_maccs_name(name)) entries.push_back({name, FeatureGroup::kMaccs});
  }
  for (const std::string& name : rdkit_global_names()) entries.push_back({name, FeatureGroup::kRdkitGlobal});
  for (const std::string& name : external_columns) {
    if (!is_maccs_name(name)) entries.push_back({name, FeatureGroup::kExternal});
  }
  for (const std::string& name : graph_feature_names()) entries.push_back({name, FeatureGroup::kGraph});
  entries.push_back({std::string(kSmilesLengthName), FeatureGroup::kSmilesLen});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const FeatureEntry& a, const FeatureEntry& b) { return a.group < b.group; });
  try {
    return FeatureSchema(std::move(entries), options.morgan_radius, options.morgan_bits);
  } catch (const DataError& e) {
    throw DataError(fmt::format("schema conflict: {}", e.what()));
  }
}

// ---------------------------------------------------------------------------
// Morgan

namespace {

std::uint64_t bond_code(BondOrder order) { return static_cast<std::uint64_t>(order); }

using BondBits = std::vector<std::uint64_t>;

}  // namespace

std::uint64_t morgan_atom_invariant(const MolecularGraph& graph, int atom) {
  const Atom& a = graph.atoms()[static_cast<std::size_t>(atom)];
  Fnv1a64 h;
  h.add_i64(a.atomic_number);
  h.add_i64(a.degree);
  h.add_i64(a.formal_charge);
  h.add_i64(a.total_h());
  h.add_i64(a.in_ring ? 1 : 0);
  h.add_i64(a.aromatic ? 1 : 0);
  return h.value();
}

std::vector<std::uint64_t> morgan_environment_codes(const MolecularGraph& graph, int radius) {
  const std::size_t n = graph.atom_count();
  const std::size_t words = (graph.bond_count() + 63) / 64;
  std::vector<std::uint64_t> codes(n);
  std::vector<BondBits> env(n, BondBits(words, 0));
  std::vector<std::uint64_t> emitted;

  for (std::size_t i = 0; i < n; ++i) {
    codes[i] = morgan_atom_invariant(graph, static_cast<int>(i));
    emitted.push_back(codes[i]);
  }

  std::set<BondBits> seen;
  for (int iteration = 1; iteration <= radius; ++iteration) {
    std::vector<std::uint64_t> next_codes(n);
    std::vector<BondBits> next_env = env;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> nbrs;
      for (const Neighbor& nb : graph.neighbors(static_cast<int>(i))) {
        nbrs.emplace_back(bond_code(graph.bonds()[static_cast<std::size_t>(nb.bond)].order),
                          codes[static_cast<std::size_t>(nb.atom)]);
        BondBits& e = next_env[i];
        e[static_cast<std::size_t>(nb.bond) / 64] |= std::uint64_t{1} << (static_cast<std::size_t>(nb.bond) % 64);
        const BondBits& ne = env[static_cast<std::size_t>(nb.atom)];
        for (std::size_t w = 0; w < words; ++w) e[w] |= ne[w];
      }
      std::sort(nbrs.begin(), nbrs.end());
      Fnv1a64 h;
      h.add_i64(iteration);
      h.add_u64(codes[i]);
      for (auto [bc, code] : nbrs) {
        h.add_u64(bc);
        h.add_u64(code);
      }
      next_codes[i] = h.value();
    }

    // Within a layer, identical bond sets keep the smallest code.
    std::vector<std::pair<BondBits, std::uint64_t>> layer;
    for (std::size_t i = 0; i < n; ++i) {
      const bool empty = std::all_of(next_env[i].begin(), next_env[i].end(), [](std::uint64_t w) { return w == 0; });
      if (!empty) layer.emplace_back(next_env[i], next_codes[i]);
    }
    std::sort(layer.begin(), layer.end());
    for (const auto& [bits, code] : layer) {
      if (seen.insert(bits).second) emitted.push_back(code);
    }
    codes = std::move(next_codes);
    env = std::move(next_env);
  }
  return emitted;
}

std::vector<std::uint8_t> morgan_fingerprint(const MolecularGraph& graph, int radius, int n_bits) {
  if (radius < 0 || n_bits < 1) throw ConfigError("morgan radius must be >= 0 and bit count >= 1");
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n_bits), 0);
  for (std::uint64_t code : morgan_environment_codes(graph, radius)) {
    bits[static_cast<std::size_t>(code % static_cast<std::uint64_t>(n_bits))] = 1;
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Topological indices

namespace {

// Summation over sorted terms makes the result independent of atom order.
double ordered_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

void require_connected(const std::vector<std::vector<int>>& dist) {
  for (const auto& row : dist) {
    for (int d : row) {
      if (d < 0) throw DataError("descriptor requires a connected graph");
    }
  }
}

}  // namespace

std::vector<std::vector<int>> distance_matrix(const MolecularGraph& graph) {
  const std::size_t n = graph.atom_count();
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<int> q;
    dist[s][s] = 0;
    q.push(static_cast<int>(s));
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (const Neighbor& nb : graph.neighbors(u)) {
        if (dist[s][static_cast<std::size_t>(nb.atom)] < 0) {
          dist[s][static_cast<std::size_t>(nb.atom)] = dist[s][static_cast<std::size_t>(u)] + 1;
          q.push(nb.atom);
        }
      }
    }
  }
  return dist;
}

std::int64_t wiener_index(const MolecularGraph& graph) {
  const auto dist = distance_matrix(graph);
  require_connected(dist);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    for (std::size_t j = i + 1; j < dist.size(); ++j) total += dist[i][j];
  }
  return total;
}

double chi0(const MolecularGraph& graph) {
  std::vector<double> terms;
  for (const Atom& a : graph.atoms()) terms.push_back(a.degree == 0 ? 1.0 : 1.0 / std::sqrt(static_cast<double>(a.degree)));
  return ordered_sum(std::move(terms));
}

double chi1(const MolecularGraph& graph) {
  std::vector<double> terms;
  for (const Bond& b : graph.bonds()) {
    const int di = graph.atoms()[static_cast<std::size_t>(b.begin)].degree;
    const int dj = graph.atoms()[static_cast<std::size_t>(b.end)].degree;
    terms.push_back(1.0 / std::sqrt(static_cast<double>(di) * static_cast<double>(dj)));
  }
  return ordered_sum(std::move(terms));
}

KappaIndices kappa_indices(const MolecularGraph& graph) {
  const double atoms = static_cast<double>(graph.atom_count());
  const double p1 = static_cast<double>(graph.bond_count());
  double p2 = 0.0;
  for (const Atom& a : graph.atoms()) p2 += static_cast<double>(a.degree) * (a.degree - 1) / 2.0;
  // Three-bond paths through each central bond, minus the closed triangles.
  double p3 = 0.0;
  for (const Bond& b : graph.bonds()) {
    const int du = graph.atoms()[static_cast<std::size_t>(b.begin)].degree;
    const int dv = graph.atoms()[static_cast<std::size_t>(b.end)].degree;
    int common = 0;
    for (const Neighbor& nu : graph.neighbors(b.begin)) {
      if (nu.atom != b.end && graph.bond_between(nu.atom, b.end) >= 0) ++common;
    }
    p3 += static_cast<double>((du - 1) * (dv - 1) - common);
  }

  KappaIndices k;
  if (p1 > 0) k.kappa1 = atoms * (atoms - 1) * (atoms - 1) / (p1 * p1);
  if (p2 > 0) k.kappa2 = (atoms - 1) * (atoms - 2) * (atoms - 2) / (p2 * p2);
  if (p3 > 0 && graph.atom_count() >= 3) {
    if (graph.atom_count() % 2 == 1) {
      k.kappa3 = (atoms - 1) * (atoms - 3) * (atoms - 3) / (p3 * p3);
    } else {
      k.kappa3 = (atoms - 3) * (atoms - 2) * (atoms - 2) / (p3 * p3);
    }
  }
  return k;
}

double balaban_j(const MolecularGraph& graph) {
  const std::size_t n = graph.atom_count();
  const std::size_t m = graph.bond_count();
  if (n < 2 || m == 0) return 0.0;
  const auto dist = distance_matrix(graph);
  require_connected(dist);
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d : dist[i]) row_sum[i] += d;
  }
  std::vector<double> terms;
  for (const Bond& b : graph.bonds()) {
    terms.push_back(1.0 / std::sqrt(row_sum[static_cast<std::size_t>(b.begin)] * row_sum[static_cast<std::size_t>(b.end)]));
  }
  const double cycle_rank = static_cast<double>(m) - static_cast<double>(n) + 1.0;
  return static_cast<double>(m) / (cycle_rank + 1.0) * ordered_sum(std::move(terms));
}

GlobalDescriptors global_descriptors(const MolecularGraph& graph) {
  GlobalDescriptors d;
  const Element& hydrogen = element_by_number(1);
  std::vector<double> avg_terms;
  std::vector<double> exact_terms;
  int carbons = 0;
  int sp3_carbons = 0;
  for (std::size_t i = 0; i < graph.atom_count(); ++i) {
    const Atom& a = graph.atoms()[i];
    const Element& e = element_by_number(a.atomic_number);
    const double avg = a.isotope ? static_cast<double>(*a.isotope) : e.average_mass;
    const double exact = a.isotope ? static_cast<double>(*a.isotope) : e.monoisotopic_mass;
    avg_terms.push_back(avg + a.total_h() * hydrogen.average_mass);
    exact_terms.push_back(exact + a.total_h() * hydrogen.monoisotopic_mass);

    const bool n_or_o = a.atomic_number == 7 || a.atomic_number == 8;
    if (n_or_o) ++d.num_h_acceptors;
    if (n_or_o && a.total_h() > 0) ++d.num_h_donors;
    if (a.atomic_number == 6) {
      ++carbons;
      bool saturated = !a.aromatic;
      for (const Neighbor& nb : graph.neighbors(static_cast<int>(i))) {
        const BondOrder o = graph.bonds()[static_cast<std::size_t>(nb.bond)].order;
        if (o != BondOrder::kSingle) saturated = false;
      }
      if (saturated) ++sp3_carbons;
    }
  }
  d.mol_wt = ordered_sum(std::move(avg_terms));
  d.exact_mol_wt = ordered_sum(std::move(exact_terms));

  for (const Bond& b : graph.bonds()) {
    if (b.order == BondOrder::kSingle && !b.in_ring && graph.atoms()[static_cast<std::size_t>(b.begin)].degree >= 2 &&
        graph.atoms()[static_cast<std::size_t>(b.end)].degree >= 2) {
      ++d.num_rotatable_bonds;
    }
  }
  d.ring_count = static_cast<int>(graph.rings().size());
  // Rings of the aromatic-bond subgraph. Taking the SSSR of the whole graph
  // and filtering it would depend on atom order whenever equal-size rings
  // compete (a benzene fused into a six-membered aliphatic ring).
  std::vector<std::pair<int, int>> aromatic_edges;
  for (const Bond& b : graph.bonds()) {
    if (b.order == BondOrder::kAromatic) aromatic_edges.emplace_back(b.begin, b.end);
  }
  d.num_aromatic_rings = static_cast<int>(sssr(graph.atom_count(), aromatic_edges).size());
  d.fraction_csp3 = carbons == 0 ? 0.0 : static_cast<double>(sp3_carbons) / carbons;
  return d;
}

// ---------------------------------------------------------------------------
// Assembly

void assemble_features_into(const MolecularGraph& graph, const ExternalValues& external, const FeatureSchema& schema,
                            std::span<double> out) {
  if (out.size() != schema.size()) throw DataError("feature buffer does not match schema size");

  std::vector<std::uint8_t> fp;
  if (!schema.morgan_bit_indices().empty()) fp = morgan_fingerprint(graph, schema.morgan_radius(), schema.morgan_bits());

  bool need_global = schema.count(FeatureGroup::kRdkitGlobal) > 0;
  bool need_graph = schema.count(FeatureGroup::kGraph) > 0;
  GlobalDescriptors gd;
  KappaIndices kappa;
  double balaban = 0.0;
  if (need_global) {
    gd = global_descriptors(graph);
    kappa = kappa_indices(graph);
    balaban = balaban_j(graph);
  }
  double wiener = 0.0, c0 = 0.0, c1 = 0.0;
  if (need_graph) {
    wiener = static_cast<double>(wiener_index(graph));
    c0 = chi0(graph);
    c1 = chi1(graph);
  }

  std::size_t morgan_pos = 0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const FeatureEntry& entry = schema.entries()[i];
    double value = 0.0;
    switch (entry.group) {
      case FeatureGroup::kMorgan:
        value = fp[schema.morgan_bit_indices()[morgan_pos++]];
        break;
      case FeatureGroup::kMaccs:
      case FeatureGroup::kExternal: {
        auto it = external.find(entry.name);
        if (it == external.end()) throw DataError(fmt::format("missing external column '{}'", entry.name));
        if (!std::isfinite(it->second)) throw DataError(fmt::format("non-finite value in column '{}'", entry.name));
        value = it->second;
        break;
      }
      case FeatureGroup::kRdkitGlobal: {
        const std::string& n = entry.name;
        if (n == "MolWt") value = gd.mol_wt;
        else if (n == "ExactMolWt") value = gd.exact_mol_wt;
        else if (n == "NumHDonors") value = gd.num_h_donors;
        else if (n == "NumHAcceptors") value = gd.num_h_acceptors;
        else if (n == "NumRotatableBonds") value = gd.num_rotatable_bonds;
        else if (n == "RingCount") value = gd.ring_count;
        else if (n == "NumAromaticRings") value = gd.num_aromatic_rings;
        else if (n == "FractionCSP3") value = gd.fraction_csp3;
        else if (n == "Kappa1") value = kappa.kappa1;
        else if (n == "Kappa2") value = kappa.kappa2;
        else if (n == "Kappa3") value = kappa.kappa3;
        else if (n == "BalabanJ") value = balaban;
        else throw DataError(fmt::format("unknown rdkit_global feature '{}'", n));
        break;
      }
      case FeatureGroup::kGraph: {
        const std::string& n = entry.name;
        if (n == "WienerIndex") value = wiener;
        else if (n == "Chi0") value = c0;
        else if (n == "Chi1") value = c1;
        else throw DataError(fmt::format("unknown graph feature '{}'", n));
        break;
      }
      case FeatureGroup::kSmilesLen:
        value = graph.smiles_length();
        break;
    }
    out[i] = value;
  }
}

FeatureVector assemble_features(const MolecularGraph& graph, const ExternalValues& external,
                                std::shared_ptr<const FeatureSchema> schema) {
  FeatureVector v;
  v.values.resize(schema->size());
  assemble_features_into(graph, external, *schema, v.values);
  v.schema = std::move(schema);
  return v;
}

}  // namespace lengthlogd
