#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace lengthlogd {

struct Element {
  std::string_view symbol;
  int atomic_number;
  double average_mass;      // standard atomic weight (abridged IUPAC)
  double monoisotopic_mass; // most abundant isotope
};

/// Looks up an element by its (case-sensitive) symbol.
const Element* find_element(std::string_view symbol);
const Element& element_by_number(int atomic_number);

/// Allowed valences for an atom of `atomic_number` carrying `charge`.
/// Charged atoms take the valences of their isoelectronic neighbour
/// (N+ behaves like C, O- like F). Empty when no valence model applies
/// (metals, exotic charge states); such atoms are never valence-checked.
std::span<const int> allowed_valences(int atomic_number, int charge);

}  // namespace lengthlogd
