#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lengthlogd/smiles.hpp"

namespace lengthlogd {

/// Feature blocks in concatenation order.
enum class FeatureGroup : std::uint8_t { kMorgan, kMaccs, kRdkitGlobal, kExternal, kGraph, kSmilesLen };

inline constexpr FeatureGroup kAllGroups[] = {FeatureGroup::kMorgan,   FeatureGroup::kMaccs,
                                              FeatureGroup::kRdkitGlobal, FeatureGroup::kExternal,
                                              FeatureGroup::kGraph,    FeatureGroup::kSmilesLen};

std::string_view group_name(FeatureGroup group);
/// Inverse of group_name; throws DataError on an unknown name.
FeatureGroup parse_group(std::string_view name);

struct FeatureEntry {
  std::string name;
  FeatureGroup group;

  bool operator==(const FeatureEntry&) const = default;
};

/// Named, group-tagged layout of a feature vector. Entries appear grouped in
/// FeatureGroup order and names are unique; both are checked on construction.
class FeatureSchema {
 public:
  static constexpr int kFormatVersion = 1;

  FeatureSchema() = default;
  /// Morgan entries must be named Morgan_<bit> with bit < morgan_bits.
  FeatureSchema(std::vector<FeatureEntry> entries, int morgan_radius, int morgan_bits);

  const std::vector<FeatureEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  int morgan_radius() const { return morgan_radius_; }
  int morgan_bits() const { return morgan_bits_; }
  /// Fingerprint bit index for each morgan entry, in schema order.
  const std::vector<std::size_t>& morgan_bit_indices() const { return morgan_bit_; }
  std::size_t count(FeatureGroup group) const;
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Column indices kept when the listed groups are removed, and the
  /// resulting schema.
  std::vector<std::size_t> indices_without(std::span<const FeatureGroup> excluded) const;
  FeatureSchema without(std::span<const FeatureGroup> excluded) const;
  FeatureSchema select(std::span<const std::size_t> indices) const;

  /// Sidecar text form: a version line followed by `index,name,group` rows.
  std::string to_text() const;
  static FeatureSchema from_text(std::string_view text);

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FeatureEntry> entries_;
  int morgan_radius_ = 2;
  int morgan_bits_ = 1024;
  std::vector<std::size_t> morgan_bit_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct SchemaOptions {
  int morgan_radius = 2;
  int morgan_bits = 1024;
};

/// Schema for the natively computed blocks plus the given external columns.
/// Columns whose name starts with "MACCS" (any case) go to the maccs group,
/// the rest to external. Throws DataError when an external name collides
/// with a native descriptor name.
FeatureSchema build_schema(std::span<const std::string> external_columns, const SchemaOptions& options = {});

/// Names of the native blocks, in schema order.
std::vector<std::string> rdkit_global_names();
std::vector<std::string> graph_feature_names();
inline constexpr std::string_view kSmilesLengthName = "SMILES_Length";

struct FeatureVector {
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<double> values;
};

using ExternalValues = std::map<std::string, double, std::less<>>;

// --- Morgan / ECFP ---------------------------------------------------------

/// Codes of the atom environments that survive bond-set deduplication, in
/// emission order (radius 0 first). Folding these mod n_bits gives the
/// fingerprint.
std::vector<std::uint64_t> morgan_environment_codes(const MolecularGraph& graph, int radius);

/// Folded circular fingerprint, one byte (0 or 1) per bit.
std::vector<std::uint8_t> morgan_fingerprint(const MolecularGraph& graph, int radius = 2, int n_bits = 1024);

/// Hash of an atom's initial invariant tuple.
std::uint64_t morgan_atom_invariant(const MolecularGraph& graph, int atom);

// --- Topological indices ---------------------------------------------------

/// All-pairs shortest path lengths in bonds (BFS); -1 for unreachable.
std::vector<std::vector<int>> distance_matrix(const MolecularGraph& graph);

/// Throws DataError for a disconnected graph.
std::int64_t wiener_index(const MolecularGraph& graph);
double chi0(const MolecularGraph& graph);
double chi1(const MolecularGraph& graph);

struct KappaIndices {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa3 = 0.0;
};
KappaIndices kappa_indices(const MolecularGraph& graph);
double balaban_j(const MolecularGraph& graph);

struct GlobalDescriptors {
  double mol_wt = 0.0;
  double exact_mol_wt = 0.0;
  int num_h_donors = 0;
  int num_h_acceptors = 0;
  int num_rotatable_bonds = 0;
  int ring_count = 0;
  int num_aromatic_rings = 0;
  double fraction_csp3 = 0.0;
};
GlobalDescriptors global_descriptors(const MolecularGraph& graph);

// --- Assembly --------------------------------------------------------------

/// Writes the feature values for `graph` in schema order into `out`
/// (size must equal schema.size()). Throws DataError naming the column when
/// an external or maccs entry is missing from `external` or non-finite.
void assemble_features_into(const MolecularGraph& graph, const ExternalValues& external,
                            const FeatureSchema& schema, std::span<double> out);

FeatureVector assemble_features(const MolecularGraph& graph, const ExternalValues& external,
                                std::shared_ptr<const FeatureSchema> schema);

}  // namespace lengthlogd
