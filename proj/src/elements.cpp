#include "lengthlogd/elements.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace lengthlogd {
namespace {

constexpr std::array kElements = {
    Element{"H", 1, 1.008, 1.00782503207},
    Element{"He", 2, 4.002602, 4.00260325415},
    Element{"Li", 3, 6.94, 7.01600455},
    Element{"B", 5, 10.81, 11.0093054},
    Element{"C", 6, 12.011, 12.0},
    Element{"N", 7, 14.007, 14.0030740048},
    Element{"O", 8, 15.999, 15.99491461956},
    Element{"F", 9, 18.998, 18.99840322},
    Element{"Na", 11, 22.99, 22.9897692809},
    Element{"Mg", 12, 24.305, 23.985041700},
    Element{"Al", 13, 26.982, 26.98153863},
    Element{"Si", 14, 28.085, 27.9769265325},
    Element{"P", 15, 30.974, 30.97376163},
    Element{"S", 16, 32.06, 31.97207100},
    Element{"Cl", 17, 35.45, 34.96885268},
    Element{"K", 19, 39.098, 38.96370668},
    Element{"Ca", 20, 40.078, 39.96259098},
    Element{"Fe", 26, 55.845, 55.9349375},
    Element{"Cu", 29, 63.546, 62.9295975},
    Element{"Zn", 30, 65.38, 63.9291422},
    Element{"Se", 34, 78.971, 79.9165213},
    Element{"Br", 35, 79.904, 78.9183371},
    Element{"I", 53, 126.904, 126.904473},
};

constexpr std::array kV0 = {0};
constexpr std::array kV1 = {1};
constexpr std::array kV2 = {2, 4, 6};
constexpr std::array kV2Only = {2};
constexpr std::array kV3 = {3};
constexpr std::array kV35 = {3, 5};
constexpr std::array kV4 = {4};

// Valences indexed by the effective (isoelectronic) atomic number.
std::span<const int> valences_for_effective(int z) {
  switch (z) {
    case 1: return kV1;
    case 2: return kV0;
    case 5: return kV3;
    case 6: return kV4;
    case 7: return kV3;
    case 8: return kV2Only;
    case 9: return kV1;
    case 10: return kV0;
    case 13: return kV3;
    case 14: return kV4;
    case 15: return kV35;
    case 16: return kV2;
    case 17: return kV1;
    case 18: return kV0;
    case 33: return kV35;
    case 34: return kV2;
    case 35: return kV1;
    case 36: return kV0;
    case 51: return kV35;
    case 52: return kV2;
    case 53: return kV1;
    case 54: return kV0;
    default: return {};
  }
}

bool has_valence_model(int z) {
  switch (z) {
    case 1: case 5: case 6: case 7: case 8: case 9:
    case 14: case 15: case 16: case 17: case 34: case 35: case 53:
      return true;
    default:
      return false;
  }
}

int period_of(int z) {
  if (z <= 2) return 1;
  if (z <= 10) return 2;
  if (z <= 18) return 3;
  if (z <= 36) return 4;
  if (z <= 54) return 5;
  return 6;
}

}  // namespace

const Element* find_element(std::string_view symbol) {
  for (const Element& e : kElements) {
    if (e.symbol == symbol) return &e;
  }
  return nullptr;
}

const Element& element_by_number(int atomic_number) {
  for (const Element& e : kElements) {
    if (e.atomic_number == atomic_number) return e;
  }
  throw std::out_of_range("no element with atomic number " + std::to_string(atomic_number));
}

std::span<const int> allowed_valences(int atomic_number, int charge) {
  if (!has_valence_model(atomic_number)) return {};
  const int effective = atomic_number - charge;
  if (effective < 1 || period_of(effective) != period_of(atomic_number)) {
    // H+ and H- fall outside the period; hydride/proton carry no bonds.
    if (atomic_number == 1 && (charge == 1 || charge == -1)) return kV0;
    return {};
  }
  return valences_for_effective(effective);
}

}  // namespace lengthlogd
