#pragma once
// Small synthetic datasets and light learner settings for pipeline tests.

#include "lengthlogd/dataset.hpp"
#include "lengthlogd/ensemble.hpp"
#include "lengthlogd/synthetic.hpp"

namespace lengthlogd::testing {

struct Fixture {
  StratifiedDataset data;
  FeatureTable table;
};

inline Fixture make_fixture(int per_band, std::uint64_t seed, SplitRatios ratios = {}, bool shuffled = false) {
  SyntheticOptions so;
  so.per_band = per_band;
  so.seed = seed;
  so.shuffle_targets = shuffled;
  LoadedData loaded = load_and_clean(generate_synthetic_csv(so));
  Fixture f;
  const FeatureSchema schema = build_schema(loaded.external_columns);
  f.data = split_dataset(std::move(loaded.records), ratios, seed);
  f.table = build_feature_table(f.data.records, schema);
  return f;
}

inline PipelineConfig light_config(std::uint64_t seed) {
  PipelineConfig c;
  c.seed = seed;
  c.grids.rf = {ForestConfig{25, -1, 2, 0, 0}};
  c.grids.xgb = {GbtConfig{40, 0.1, 3, 3, 0.8, 0}};
  return c;
}

}  // namespace lengthlogd::testing
