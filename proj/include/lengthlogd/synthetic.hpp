#pragma once

#include <cstdint>
#include <string>

namespace lengthlogd {

struct SyntheticOptions {
  int per_band = 200;  // molecules per length band (short, medium, long)
  double noise_sd = 0.1;
  std::uint64_t seed = 1;
  bool shuffle_targets = false;  // permute logd across rows (permutation test)
};

/// Pseudo-peptide CSV with columns id,smiles,logd,ext1,ext2. Backbones of
/// 2-4, 6-8 and 10-13 residues (some cyclic, some N-methylated) with side
/// chains from a fixed residue table. ext1/ext2 are standard normal draws
/// and logd = synthetic_logd(MolWt, Wiener, chi1, ext1, ext2) + N(0, sd^2).
std::string generate_synthetic_csv(const SyntheticOptions& options);

/// Noise-free target of the synthetic data.
double synthetic_logd(double mol_wt, double wiener, double chi1, double ext1, double ext2);

}  // namespace lengthlogd
