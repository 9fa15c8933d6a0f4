#include <gtest/gtest.h>

#include <algorithm>
#include <tuple>

#include "lengthlogd/elements.hpp"
#include "lengthlogd/smiles.hpp"
#include "support/molecule_gen.hpp"

namespace lengthlogd {
namespace {

using testing::GenMol;

std::size_t offset_of_error(std::string_view s) {
  try {
    parse_smiles(s);
  } catch (const SmilesError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected a parse error for '" << s << "'";
  return static_cast<std::size_t>(-1);
}

TEST(ParseSmiles, Ethanol) {
  const MolecularGraph g = parse_smiles("CCO");
  ASSERT_EQ(g.atom_count(), 3u);
  ASSERT_EQ(g.bond_count(), 2u);
  EXPECT_EQ(g.atoms()[0].atomic_number, 6);
  EXPECT_EQ(g.atoms()[2].atomic_number, 8);
  EXPECT_EQ(g.atoms()[0].total_h(), 3);
  EXPECT_EQ(g.atoms()[1].total_h(), 2);
  EXPECT_EQ(g.atoms()[2].total_h(), 1);
  EXPECT_EQ(g.smiles_length(), 3);
  EXPECT_GE(g.bond_between(0, 1), 0);
  EXPECT_GE(g.bond_between(1, 2), 0);
  EXPECT_EQ(g.bond_between(0, 2), -1);
}

TEST(ParseSmiles, Cyclopropane) {
  const MolecularGraph g = parse_smiles("C1CC1");
  ASSERT_EQ(g.atom_count(), 3u);
  EXPECT_EQ(g.bond_count(), 3u);
  for (const Atom& a : g.atoms()) {
    EXPECT_TRUE(a.in_ring);
    EXPECT_EQ(a.total_h(), 2);
  }
  ASSERT_EQ(g.rings().size(), 1u);
  EXPECT_EQ(g.rings()[0].atoms, (std::vector<int>{0, 1, 2}));
}

TEST(ParseSmiles, UnclosedBranchReportsEndOffset) {
  EXPECT_EQ(offset_of_error("C(C"), 3u);
  try {
    parse_smiles("C(C");
  } catch (const SmilesError& e) {
    EXPECT_NE(e.detail().find("branch"), std::string::npos);
  }
}

TEST(ParseSmiles, Benzene) {
  const MolecularGraph g = parse_smiles("c1ccccc1");
  ASSERT_EQ(g.atom_count(), 6u);
  ASSERT_EQ(g.bond_count(), 6u);
  for (const Atom& a : g.atoms()) {
    EXPECT_TRUE(a.aromatic);
    EXPECT_EQ(a.total_h(), 1);
  }
  for (const Bond& b : g.bonds()) EXPECT_EQ(b.order, BondOrder::kAromatic);
  ASSERT_EQ(g.rings().size(), 1u);
  EXPECT_EQ(g.rings()[0].atoms.size(), 6u);
}

TEST(ParseSmiles, AromaticHeterocycles) {
  // pyridine, pyrrole (explicit [nH]), furan, thiophene, N-methylpyrrole
  const MolecularGraph pyridine = parse_smiles("c1ccncc1");
  EXPECT_EQ(pyridine.atoms()[3].total_h(), 0);
  const MolecularGraph pyrrole = parse_smiles("c1cc[nH]c1");
  EXPECT_EQ(pyrrole.atoms()[3].total_h(), 1);
  const MolecularGraph furan = parse_smiles("c1ccoc1");
  EXPECT_EQ(furan.atoms()[3].total_h(), 0);
  EXPECT_EQ(furan.atoms()[0].total_h(), 1);
  const MolecularGraph thiophene = parse_smiles("c1ccsc1");
  EXPECT_EQ(thiophene.atoms()[3].total_h(), 0);
  const MolecularGraph nmp = parse_smiles("Cn1cccc1");
  EXPECT_EQ(nmp.atoms()[1].total_h(), 0);
}

TEST(Sssr, LinearChainHasNoRings) {
  const MolecularGraph g = parse_smiles("CCCC");
  EXPECT_TRUE(g.rings().empty());
  for (const Atom& a : g.atoms()) EXPECT_FALSE(a.in_ring);
}

TEST(Sssr, NaphthaleneHasTwoSixRings) {
  const MolecularGraph g = parse_smiles("c1ccc2ccccc2c1");
  ASSERT_EQ(g.rings().size(), 2u);
  for (const Ring& r : g.rings()) {
    EXPECT_EQ(r.atoms.size(), 6u);
    EXPECT_EQ(r.bonds.size(), 6u);
  }
}

TEST(Sssr, CubaneHasFiveFourRings) {
  const MolecularGraph g = parse_smiles("C12C3C4C1C5C2C3C45");
  ASSERT_EQ(g.rings().size(), 5u);  // 12 - 8 + 1
  for (const Ring& r : g.rings()) EXPECT_EQ(r.atoms.size(), 4u);
}

TEST(Sssr, EdgeListMatchesCircuitRank) {
  // two triangles sharing a vertex plus a disjoint square
  const std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 0}, {2, 3}, {3, 4}, {4, 2},
                                               {5, 6}, {6, 7}, {7, 8}, {8, 5}};
  const auto rings = sssr(9, edges);
  EXPECT_EQ(rings.size(), 3u);
  EXPECT_EQ(component_count(9, edges), 2);
}

TEST(Sssr, RingBondFlagsAgree) {
  const MolecularGraph g = parse_smiles("CC1CCC(CC1)C(=O)O");
  ASSERT_EQ(g.rings().size(), 1u);
  std::vector<char> in_ring(g.bond_count(), 0);
  for (int b : g.rings()[0].bonds) in_ring[static_cast<std::size_t>(b)] = 1;
  for (std::size_t b = 0; b < g.bond_count(); ++b) EXPECT_EQ(g.bonds()[b].in_ring, in_ring[b] != 0);
}

TEST(SmilesLength, TrimsWhitespace) {
  EXPECT_EQ(smiles_length("CCO"), 3);
  EXPECT_EQ(smiles_length(""), 0);
  EXPECT_EQ(smiles_length("  CCO \n"), 3);
  EXPECT_EQ(parse_smiles(" CCO ").smiles_length(), 3);
}

TEST(ParseSmiles, BracketAtoms) {
  const MolecularGraph g = parse_smiles("[13CH3][NH3+]");
  ASSERT_EQ(g.atom_count(), 2u);
  EXPECT_EQ(g.atoms()[0].isotope, 13);
  EXPECT_EQ(g.atoms()[0].total_h(), 3);
  EXPECT_EQ(g.atoms()[1].formal_charge, 1);
  EXPECT_EQ(g.atoms()[1].total_h(), 3);
  EXPECT_TRUE(g.atoms()[1].bracket);
  const MolecularGraph acetate = parse_smiles("CC(=O)[O-]");
  EXPECT_EQ(acetate.atoms()[3].formal_charge, -1);
  EXPECT_EQ(acetate.atoms()[3].total_h(), 0);
}

TEST(ParseSmiles, StereoMarksAreDiscarded) {
  const MolecularGraph a = parse_smiles("N[C@@H](C)C(=O)O");
  const MolecularGraph b = parse_smiles("NC(C)C(=O)O");
  EXPECT_GT(a.report().stereo_marks_discarded, 0);
  ASSERT_EQ(a.atom_count(), b.atom_count());
  for (std::size_t i = 0; i < a.atom_count(); ++i) EXPECT_EQ(a.atoms()[i].total_h(), b.atoms()[i].total_h());
  const MolecularGraph c = parse_smiles("F/C=C/F");
  EXPECT_EQ(c.bonds()[1].order, BondOrder::kDouble);
  EXPECT_EQ(c.bonds()[0].order, BondOrder::kSingle);
}

TEST(ParseSmiles, PercentRingLabels) {
  const MolecularGraph g = parse_smiles("C%12CCCC%12");
  EXPECT_EQ(g.rings().size(), 1u);
  EXPECT_EQ(g.rings()[0].atoms.size(), 5u);
}

TEST(ParseSmiles, ExplicitHydrogenAtomsFold) {
  const MolecularGraph g = parse_smiles("[H]OC([H])([H])[H]");
  ASSERT_EQ(g.atom_count(), 2u);
  EXPECT_EQ(g.atoms()[0].total_h(), 1);
  EXPECT_EQ(g.atoms()[1].total_h(), 3);
}

TEST(ParseSmiles, KeepsLargestFragment) {
  const MolecularGraph g = parse_smiles("CCCC(=O)[O-].[Na+]");
  EXPECT_EQ(g.atom_count(), 6u);
  EXPECT_EQ(g.report().fragments_dropped, 1);
  EXPECT_FALSE(g.report().warnings.empty());
  EXPECT_EQ(g.smiles_length(), 18);
}

TEST(ParseSmiles, ValenceModel) {
  EXPECT_EQ(parse_smiles("P").atoms()[0].total_h(), 3);
  EXPECT_EQ(parse_smiles("OP(=O)(O)O").atoms()[1].total_h(), 0);
  EXPECT_EQ(parse_smiles("CS(=O)C").atoms()[1].total_h(), 0);
  EXPECT_EQ(parse_smiles("B").atoms()[0].total_h(), 3);
  EXPECT_EQ(parse_smiles("ClC").atoms()[0].total_h(), 0);
  EXPECT_EQ(parse_smiles("C#N").atoms()[0].total_h(), 1);
}

struct ErrorCase {
  const char* smiles;
  std::size_t offset;
};

class ParseErrors : public ::testing::TestWithParam<ErrorCase> {};

TEST_P(ParseErrors, ReportsOffset) {
  EXPECT_EQ(offset_of_error(GetParam().smiles), GetParam().offset);
}

INSTANTIATE_TEST_SUITE_P(Malformed, ParseErrors,
                         ::testing::Values(ErrorCase{"C1CC", 1},       // unmatched ring label
                                           ErrorCase{"CXC", 1},        // unknown element
                                           ErrorCase{"C)C", 1},        // unmatched ')'
                                           ErrorCase{"C(=O", 4},       // unclosed branch
                                           ErrorCase{"C(C)(", 5},      // unclosed branch
                                           ErrorCase{"C=", 1},         // dangling bond
                                           ErrorCase{"FC(F)(F)(F)F", 1},  // pentavalent carbon
                                           ErrorCase{"[C", 0},         // unclosed bracket
                                           ErrorCase{"C$C", 1}));      // quadruple bond unsupported

TEST(ParseSmiles, RejectsMoreInputs) {
  EXPECT_THROW(parse_smiles(""), SmilesError);
  EXPECT_THROW(parse_smiles("   "), SmilesError);
  EXPECT_THROW(parse_smiles("cC"), SmilesError);            // aromatic atom outside a ring
  EXPECT_THROW(parse_smiles("CC()C"), SmilesError);         // empty branch
  EXPECT_THROW(parse_smiles("C=1CC#1"), SmilesError);      // conflicting ring-closure bonds
  EXPECT_THROW(parse_smiles("C:C"), SmilesError);           // aromatic bond between aliphatic atoms
}

// --- properties over generated molecules ------------------------------------

struct Signature {
  std::vector<std::tuple<int, bool, int, int, int>> atoms;  // z, aromatic, charge, h, degree
  std::vector<std::tuple<int, int, int>> bonds;              // sorted (z_a, z_b), order
  std::size_t rings = 0;

  bool operator==(const Signature&) const = default;
};

Signature signature_of(const MolecularGraph& g) {
  Signature s;
  for (const Atom& a : g.atoms()) s.atoms.emplace_back(a.atomic_number, a.aromatic, a.formal_charge, a.total_h(), a.degree);
  for (const Bond& b : g.bonds()) {
    int za = g.atoms()[static_cast<std::size_t>(b.begin)].atomic_number;
    int zb = g.atoms()[static_cast<std::size_t>(b.end)].atomic_number;
    if (za > zb) std::swap(za, zb);
    s.bonds.emplace_back(za, zb, static_cast<int>(b.order));
  }
  std::sort(s.atoms.begin(), s.atoms.end());
  std::sort(s.bonds.begin(), s.bonds.end());
  s.rings = g.rings().size();
  return s;
}

Signature signature_of(const GenMol& m) {
  Signature s;
  std::vector<int> degree(m.atoms.size(), 0);
  for (const auto& b : m.bonds) {
    ++degree[static_cast<std::size_t>(b.a)];
    ++degree[static_cast<std::size_t>(b.b)];
  }
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    const auto& a = m.atoms[i];
    s.atoms.emplace_back(a.z, a.aromatic, a.charge, a.h, degree[i]);
  }
  for (const auto& b : m.bonds) {
    int za = m.atoms[static_cast<std::size_t>(b.a)].z;
    int zb = m.atoms[static_cast<std::size_t>(b.b)].z;
    if (za > zb) std::swap(za, zb);
    s.bonds.emplace_back(za, zb, b.order);
  }
  std::sort(s.atoms.begin(), s.atoms.end());
  std::sort(s.bonds.begin(), s.bonds.end());
  s.rings = m.bonds.size() - m.atoms.size() + 1;
  return s;
}

TEST(ParseSmilesProperty, GeneratedStringsParseToTheGeneratedGraph) {
  Rng rng(20240611);
  for (int trial = 0; trial < 300; ++trial) {
    const GenMol m = testing::random_molecule(rng, 2 + static_cast<int>(rng.uniform_index(24)));
    const Signature expected = signature_of(m);
    for (int variant = 0; variant < 4; ++variant) {
      const testing::WriterOptions opt{variant % 2 == 0, variant / 2 == 0};
      const std::string s = testing::write_random_smiles(m, rng, opt);
      MolecularGraph g;
      ASSERT_NO_THROW(g = parse_smiles(s)) << s;
      ASSERT_EQ(signature_of(g), expected) << s;
      EXPECT_EQ(g.smiles_length(), static_cast<int>(s.size()));
    }
  }
}

TEST(ParseSmilesProperty, MutatedStringsAreRejected) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const GenMol m = testing::random_molecule(rng, 3 + static_cast<int>(rng.uniform_index(15)));
    const std::string s = testing::write_random_smiles(m, rng, {rng.uniform01() < 0.5, rng.uniform01() < 0.5});
    // Each mutation breaks a different production of the grammar.
    const std::vector<std::pair<std::string, std::size_t>> bad{
        {s + "(", s.size() + 1}, {s + "9", s.size()}, {")" + s, 0}, {s + "Q", s.size()}, {s + "[C", s.size()},
        {"(" + s + ")", 0}};
    for (const auto& [text, offset] : bad) {
      try {
        parse_smiles(text);
        ADD_FAILURE() << "accepted " << text;
      } catch (const SmilesError& e) {
        EXPECT_EQ(e.offset(), offset) << text << ": " << e.what();
      }
    }
  }
}

TEST(ParseSmilesProperty, ValenceInvariantHolds) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const GenMol m = testing::random_molecule(rng, 2 + static_cast<int>(rng.uniform_index(30)));
    const MolecularGraph g = parse_smiles(testing::write_random_smiles(m, rng, {false, false}));
    for (std::size_t i = 0; i < g.atom_count(); ++i) {
      const Atom& a = g.atoms()[i];
      EXPECT_GE(a.implicit_h, 0);
      EXPECT_EQ(static_cast<std::size_t>(a.degree), g.neighbors(static_cast<int>(i)).size());
      int sum2 = 0;  // bond orders doubled, aromatic = 3
      for (const Neighbor& nb : g.neighbors(static_cast<int>(i))) {
        const BondOrder o = g.bonds()[static_cast<std::size_t>(nb.bond)].order;
        sum2 += o == BondOrder::kAromatic ? 3 : 2 * static_cast<int>(o);
      }
      const int used = sum2 / 2 + a.total_h();
      const auto allowed = allowed_valences(a.atomic_number, a.formal_charge);
      ASSERT_FALSE(allowed.empty());
      EXPECT_LE(used, *std::max_element(allowed.begin(), allowed.end()));
      if (!a.aromatic) EXPECT_NE(std::find(allowed.begin(), allowed.end(), used), allowed.end());
    }
  }
}

TEST(ParseSmilesProperty, PureFunction) {
  const std::string s = "CC(C)C[C@H](NC(=O)[C@@H](N)Cc1ccc(O)cc1)C(=O)N1CCC[C@H]1C(=O)O";
  const Signature a = signature_of(parse_smiles(s));
  const Signature b = signature_of(parse_smiles(s));
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace lengthlogd
