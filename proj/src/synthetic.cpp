#include "lengthlogd/synthetic.hpp"

#include <array>
#include <cmath>
#include <set>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "lengthlogd/csv.hpp"
#include "lengthlogd/descriptors.hpp"
#include "lengthlogd/errors.hpp"
#include "lengthlogd/random.hpp"
#include "lengthlogd/smiles.hpp"

namespace lengthlogd {

namespace {

constexpr std::array<std::string_view, 15> kSideChains{
    "",           "C",         "C(C)C",  "CC(C)C",        "C(C)CC",
    "CO",         "C(C)O",     "Cc1ccccc1", "Cc1ccc(O)cc1", "CCCCN",
    "CC(=O)O",    "CCC(=O)O",  "CC(N)=O", "CCSC",          "Cc1c[nH]c2ccccc12"};

struct Band {
  int min_residues;
  int max_residues;
};
constexpr std::array<Band, 3> kBands{{{2, 4}, {6, 8}, {10, 13}}};

std::string peptide_smiles(Rng& rng, int residues) {
  const bool cyclic = rng.uniform01() < 0.4;
  std::string s;
  for (int i = 0; i < residues; ++i) {
    s += 'N';
    if (cyclic && i == 0) s += "%10";
    if (i > 0 && rng.uniform01() < 0.15) s += "(C)";
    const auto side = kSideChains[rng.uniform_index(kSideChains.size())];
    s += 'C';
    if (!side.empty()) s += fmt::format("({})", side);
    if (cyclic && i == residues - 1) {
      s += "C%10=O";
    } else {
      s += "C(=O)";
    }
  }
  if (!cyclic) s += 'O';
  return s;
}

}  // namespace

double synthetic_logd(double mol_wt, double wiener, double chi1, double ext1, double ext2) {
  const double m = mol_wt / 1000.0;
  return 0.9 * ext1 + 0.5 * ext2 + 0.15 * ext2 * ext2 + 0.8 * std::sin(2.0 * m) + 0.25 * std::log(wiener) -
         0.3 * chi1 / 10.0 - 1.0;
}

std::string generate_synthetic_csv(const SyntheticOptions& options) {
  if (options.per_band < 1) throw ConfigError("synthetic data needs at least one molecule per band");
  if (!(options.noise_sd >= 0.0)) throw ConfigError("noise sd must be >= 0");
  Rng rng(derive_seed(options.seed, "synth/molecules"));
  Rng noise(derive_seed(options.seed, "synth/noise"));

  struct Row {
    std::string smiles;
    double logd, ext1, ext2;
  };
  std::vector<Row> rows;
  std::set<std::string> seen;
  for (const Band& band : kBands) {
    for (int i = 0; i < options.per_band; ++i) {
      const int n = band.min_residues + static_cast<int>(rng.uniform_index(
                                            static_cast<std::size_t>(band.max_residues - band.min_residues + 1)));
      std::string smiles = peptide_smiles(rng, n);
      while (!seen.insert(smiles).second) smiles = peptide_smiles(rng, n);
      const MolecularGraph g = parse_smiles(smiles);
      const double ext1 = noise.normal();
      const double ext2 = noise.normal();
      const double y = synthetic_logd(global_descriptors(g).mol_wt, static_cast<double>(wiener_index(g)), chi1(g),
                                      ext1, ext2) +
                       options.noise_sd * noise.normal();
      rows.push_back({smiles, y, ext1, ext2});
    }
  }
  if (options.shuffle_targets) {
    std::vector<double> y;
    for (const Row& r : rows) y.push_back(r.logd);
    Rng shuffler(derive_seed(options.seed, "synth/shuffle"));
    shuffler.shuffle(y);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].logd = y[i];
  }

  std::string out = "id,smiles,logd,ext1,ext2\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += csv_line({fmt::format("syn{:04d}", i + 1), rows[i].smiles, format_double(rows[i].logd),
                     format_double(rows[i].ext1), format_double(rows[i].ext2)});
  }
  return out;
}

}  // namespace lengthlogd
