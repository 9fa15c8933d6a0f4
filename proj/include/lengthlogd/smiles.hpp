#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lengthlogd/errors.hpp"

namespace lengthlogd {

enum class BondOrder : std::uint8_t { kSingle = 1, kDouble = 2, kTriple = 3, kAromatic = 4 };

struct Atom {
  int atomic_number = 0;
  int formal_charge = 0;
  std::optional<int> isotope;
  bool aromatic = false;
  bool bracket = false;
  std::optional<int> explicit_h;  // H count written inside brackets
  int implicit_h = 0;             // equals explicit_h for bracket atoms
  int folded_h = 0;               // explicit [H] atoms merged into this atom
  int degree = 0;                 // heavy-atom neighbours
  bool in_ring = false;
  std::size_t offset = 0;         // character offset in the source string

  int total_h() const { return implicit_h + folded_h; }
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondOrder order = BondOrder::kSingle;
  bool in_ring = false;

  int other(int atom) const { return atom == begin ? end : begin; }
};

/// One SSSR member; both lists are sorted ascending.
struct Ring {
  std::vector<int> atoms;
  std::vector<int> bonds;
};

struct ParseReport {
  int fragments_dropped = 0;
  int stereo_marks_discarded = 0;
  std::vector<std::string> warnings;
};

struct Neighbor {
  int atom;
  int bond;
};

/// Heavy-atom molecular graph. Immutable once built by parse_smiles.
class MolecularGraph {
 public:
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<Ring>& rings() const { return rings_; }
  std::span<const Neighbor> neighbors(int atom) const { return adjacency_[static_cast<std::size_t>(atom)]; }

  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t bond_count() const { return bonds_.size(); }
  /// Bond index joining a and b, or -1.
  int bond_between(int a, int b) const;

  /// Character count of the original (trimmed) input, including any
  /// fragments that were dropped.
  int smiles_length() const { return smiles_length_; }
  const std::string& source_smiles() const { return source_; }
  const ParseReport& report() const { return report_; }

 private:
  friend MolecularGraph parse_smiles(std::string_view text);

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<Ring> rings_;
  std::vector<std::vector<Neighbor>> adjacency_;
  int smiles_length_ = 0;
  std::string source_;
  ParseReport report_;
};

class SmilesError : public DataError {
 public:
  SmilesError(std::string message, std::size_t offset);
  std::size_t offset() const { return offset_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

/// Parses the supported SMILES subset (see docs/smiles_grammar.md).
/// Stereo marks are accepted and discarded; multi-fragment input keeps the
/// fragment with the most heavy atoms and records a warning.
/// Throws SmilesError carrying the character offset of the problem.
MolecularGraph parse_smiles(std::string_view text);

/// Smallest set of smallest rings: exactly (bonds - atoms + components)
/// simple cycles, computed from the graph topology alone.
std::vector<Ring> sssr(const MolecularGraph& graph);

/// Same computation on a bare edge list over `atom_count` vertices.
std::vector<Ring> sssr(std::size_t atom_count, std::span<const std::pair<int, int>> edges);

/// Length of `text` after trimming surrounding whitespace.
int smiles_length(std::string_view text);

/// Number of connected components; 0 for an empty graph.
int component_count(std::size_t atom_count, std::span<const std::pair<int, int>> edges);

}  // namespace lengthlogd
