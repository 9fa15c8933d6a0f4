#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lengthlogd/errors.hpp"
#include "lengthlogd/evalsuite.hpp"
#include "lengthlogd/random.hpp"
#include "support/pipeline_fixture.hpp"

using namespace lengthlogd;
using lengthlogd::testing::light_config;
using lengthlogd::testing::make_fixture;

namespace {

Metrics metrics_of(std::vector<double> t, std::vector<double> p) { return compute_metrics(t, p); }

double training_r2(const ForestModel& f, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  std::vector<double> truth(y.data(), y.data() + y.size());
  std::vector<double> pred;
  for (Eigen::Index i = 0; i < x.rows(); ++i) pred.push_back(predict_row(f, row_of(x, i)));
  return compute_metrics(truth, pred).r2;
}

}  // namespace

// --- metrics ------------------------------------------------------------------

TEST(Metrics, ThreePointHandExample) {
  const Metrics m = metrics_of({0, 1, 2}, {0, 1, 4});
  EXPECT_EQ(m.n, 3u);
  EXPECT_NEAR(m.mae, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.mse, 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.rmse, std::sqrt(4.0 / 3.0), 1e-12);
  EXPECT_NEAR(m.r2, -1.0, 1e-12);
  // sxy = 4, sxx = 2, syy = 78/9
  EXPECT_NEAR(m.r, 12.0 / std::sqrt(156.0), 1e-12);
  EXPECT_FALSE(m.r_undefined);
  EXPECT_FALSE(m.r2_guarded);
}

TEST(Metrics, SecondThreePointExample) {
  // residuals 1, -1, 0; sxx = 8
  const Metrics m = metrics_of({1, 3, 5}, {2, 2, 5});
  EXPECT_NEAR(m.mae, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.mse, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.r2, 1.0 - 2.0 / 8.0, 1e-12);
  // pred mean 3: deviations -1,-1,2; sxy = 1+1+4 = 6; syy = 6
  EXPECT_NEAR(m.r, 6.0 / std::sqrt(8.0 * 6.0), 1e-12);
}

TEST(Metrics, PerfectAndMeanPredictors) {
  const Metrics perfect = metrics_of({1.5, -2, 3, 0.25}, {1.5, -2, 3, 0.25});
  EXPECT_EQ(perfect.mae, 0.0);
  EXPECT_EQ(perfect.mse, 0.0);
  EXPECT_EQ(perfect.r2, 1.0);
  EXPECT_NEAR(perfect.r, 1.0, 1e-12);

  const Metrics mean = metrics_of({1, 2, 3, 6}, {3, 3, 3, 3});
  EXPECT_NEAR(mean.r2, 0.0, 1e-12);
  EXPECT_TRUE(mean.r_undefined);
  EXPECT_EQ(mean.r, 0.0);
}

TEST(Metrics, ConstantTruthIsFlagged) {
  const Metrics exact = metrics_of({2, 2, 2}, {2, 2, 2});
  EXPECT_EQ(exact.r2, 1.0);
  EXPECT_FALSE(exact.r2_guarded);
  EXPECT_TRUE(exact.r_undefined);
  EXPECT_EQ(exact.r, 0.0);

  const Metrics off = metrics_of({2, 2, 2}, {1, 2, 3});
  EXPECT_EQ(off.r2, kR2Sentinel);
  EXPECT_TRUE(off.r2_guarded);
  EXPECT_TRUE(off.r_undefined);
}

TEST(Metrics, BadInput) {
  EXPECT_THROW(metrics_of({1, 2}, {1}), DataError);
  EXPECT_THROW(metrics_of({}, {}), DataError);
}

TEST(Metrics, RandomInvariants) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(30);
    std::vector<double> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng.normal();
      p[i] = 0.5 * t[i] + rng.normal();
    }
    const Metrics m = compute_metrics(t, p);
    EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(m.mse));
    EXPECT_LE(m.mae, m.rmse + 1e-15);
    EXPECT_LE(std::abs(m.r), 1.0);
    EXPECT_LE(m.r2, 1.0);
    // Affine recalibration of a perfect predictor: r stays 1, R^2 does not.
    std::vector<double> affine(n);
    for (std::size_t i = 0; i < n; ++i) affine[i] = 2.0 * t[i] + 1.0;
    const Metrics a = compute_metrics(t, affine);
    EXPECT_NEAR(a.r, 1.0, 1e-12);
    EXPECT_LT(a.r2, 1.0);
  }
}

TEST(Metrics, SummaryUsesPopulationSd) {
  Metrics a, b;
  a.n = 2;
  a.mae = 1.0;
  a.r2 = 0.5;
  b.n = 3;
  b.mae = 3.0;
  b.r2 = 0.5;
  const std::vector<Metrics> list{a, b};
  const MetricsSummary s = summarize(list);
  EXPECT_EQ(s.mean.mae, 2.0);
  EXPECT_EQ(s.sd.mae, 1.0);
  EXPECT_EQ(s.mean.r2, 0.5);
  EXPECT_EQ(s.sd.r2, 0.0);
  EXPECT_EQ(s.mean.n, 5u);
}

// --- report tables ----------------------------------------------------------------

TEST(ReportTable, CsvAndText) {
  ReportTable t;
  t.header = {"model", "n", "R2"};
  t.rows.push_back({std::string("a,b"), 3LL, 0.1});
  t.rows.push_back({std::string("long name"), 12LL, -1.34e23});
  EXPECT_EQ(t.to_csv(), "model,n,R2\n\"a,b\",3,0.1\nlong name,12,-1.34e+23\n");
  EXPECT_EQ(t.to_text(),
            "model      n   R2\n"
            "a,b        3   0.1000\n"
            "long name  12  -1.340e+23\n");
  EXPECT_EQ(text_number(0.85504), "0.8550");
}

// --- pipeline evaluation -----------------------------------------------------------

class EvalFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fx_ = new lengthlogd::testing::Fixture(make_fixture(40, 31));
    fit_ = new PipelineFit(fit_pipeline(fx_->data, fx_->table, light_config(31)));
  }
  static void TearDownTestSuite() {
    delete fit_;
    delete fx_;
  }
  static lengthlogd::testing::Fixture* fx_;
  static PipelineFit* fit_;
};
lengthlogd::testing::Fixture* EvalFixture::fx_ = nullptr;
PipelineFit* EvalFixture::fit_ = nullptr;

TEST_F(EvalFixture, EvaluationMatchesPredictLogd) {
  const auto test = fx_->data.indices(Split::kTest);
  const PipelineEval ev = evaluate_pipeline(fit_->model, fx_->data.records, fx_->table, test);
  ASSERT_EQ(ev.predictions.size(), test.size());
  std::size_t total = 0;
  for (const CategoryEval& ce : ev.categories) total += ce.n;
  EXPECT_EQ(total, test.size());
  for (const PredictionRecord& p : ev.predictions) {
    const Record& r = fx_->data.records[p.row];
    EXPECT_EQ(p.category, fx_->data.category[p.row]);
    for (EnsembleMode mode : {EnsembleMode::kStacking, EnsembleMode::kFixed}) {
      const Prediction direct = predict_logd(fit_->model, r.smiles, r.external, mode);
      EXPECT_EQ(direct.logd, p.ensemble[mode == EnsembleMode::kStacking ? 0 : 1]);
      EXPECT_EQ(direct.bases, p.bases);
    }
  }
  const ReportTable t = ev.table();
  EXPECT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(ev.scatter(fx_->data.records).rows.size(), test.size());
}

TEST_F(EvalFixture, AblationGridShapeAndDimensions) {
  const PipelineConfig config = light_config(31);
  const AblationResult a = run_ablation(fx_->data, fx_->table, config, kAllPresets, kLearnerKinds, fit_);
  ASSERT_EQ(a.rows.size(), 13u);
  const FeatureSchema& full = fx_->table.schema;
  const std::size_t n_graph = full.count(FeatureGroup::kGraph);
  const std::size_t n_ext = full.count(FeatureGroup::kExternal);
  ASSERT_GT(n_graph, 0u);
  ASSERT_GT(n_ext, 0u);
  for (std::size_t i = 0; i < 12; ++i) {
    const std::size_t expected = i < 3 ? full.size()
                                 : i < 6 ? full.size() - n_graph
                                 : i < 9 ? full.size() - n_ext
                                         : full.size() - n_graph - n_ext;
    EXPECT_EQ(a.rows[i].n_features, expected) << a.rows[i].preset << " " << a.rows[i].model;
    EXPECT_EQ(a.rows[i].model, learner_name(kLearnerKinds[i % 3]));
  }
  EXPECT_EQ(a.rows[12].n_features, full.size());

  // The pipeline row is the pooled fixed-weight test metric.
  const PipelineEval ev = evaluate_pipeline(fit_->model, fx_->data.records, fx_->table, fx_->data.indices(Split::kTest));
  EXPECT_EQ(a.rows[12].test, ev.pooled[1]);
  EXPECT_EQ(a.table().rows.size(), 13u);

  // Reusing the fit and refitting give the same grid.
  const AblationResult b = run_ablation(fx_->data, fx_->table, config);
  ASSERT_EQ(b.rows.size(), a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].test, b.rows[i].test) << i;
  EXPECT_EQ(a.table().to_csv(), b.table().to_csv());
}

TEST_F(EvalFixture, BaseOnlyIsSubsetOfFull) {
  const FeatureSchema full = fx_->table.schema;
  const FeatureSchema base = full.without(preset_exclusions(AblationPreset::kBaseOnly));
  for (const FeatureEntry& e : base.entries()) EXPECT_TRUE(full.index_of(e.name).has_value()) << e.name;
  EXPECT_EQ(base.count(FeatureGroup::kGraph), 0u);
  EXPECT_EQ(base.count(FeatureGroup::kExternal), 0u);
  EXPECT_EQ(base.count(FeatureGroup::kSmilesLen), full.count(FeatureGroup::kSmilesLen));
  EXPECT_EQ(base.count(FeatureGroup::kMorgan), full.count(FeatureGroup::kMorgan));
  // base_only is the union of the two single-group presets.
  std::vector<FeatureGroup> both = preset_exclusions(AblationPreset::kNoGraph);
  for (FeatureGroup g : preset_exclusions(AblationPreset::kNoExternal)) both.push_back(g);
  EXPECT_EQ(full.without(both), base);
}

TEST_F(EvalFixture, PresetRemovingEveryColumnIsRejected) {
  const std::vector<FeatureGroup> all(std::begin(kAllGroups), std::end(kAllGroups));
  EXPECT_THROW(pooled_learner_metrics(fx_->data, fx_->table, light_config(31), LearnerKind::kLinear, all),
               ConfigError);
}

TEST(Presets, NamesRoundTrip) {
  for (AblationPreset p : kAllPresets) EXPECT_EQ(parse_preset(preset_name(p)), p);
  EXPECT_THROW(parse_preset("no_moe"), ConfigError);
}

TEST_F(EvalFixture, BaselineComparisonLayout) {
  const PipelineConfig config = light_config(31);
  const ComparisonResult c = run_baseline_comparison(fx_->data, fx_->table, config, fit_->model);
  ASSERT_EQ(c.rows.size(), 6u);
  EXPECT_EQ(c.rows[0].model, "Linear Regression");
  EXPECT_EQ(c.rows[1].model, "Random Forest");
  EXPECT_EQ(c.rows[2].model, "XGBoost");
  EXPECT_EQ(c.rows[3].model, "LengthLogD (Short)");
  EXPECT_EQ(c.rows[5].model, "LengthLogD (Long)");
  for (const ComparisonRow& r : c.rows) EXPECT_EQ(r.test.rmse, std::sqrt(r.test.mse)) << r.model;
  EXPECT_EQ(c.rows[0].test, pooled_learner_metrics(fx_->data, fx_->table, config, LearnerKind::kLinear, {}));

  // Each category reports the mode with the lower validation MAE; without a
  // merged fallback that is the MAE recorded at fit time.
  const PipelineEval ev = evaluate_pipeline(fit_->model, fx_->data.records, fx_->table, fx_->data.indices(Split::kTest));
  for (std::size_t ci = 0; ci < 3; ++ci) {
    ASSERT_FALSE(fit_->info[ci].merged_fallback);
    const auto& v = fit_->info[ci].val_mae;
    const std::size_t m = v[1] < v[0] ? 1 : 0;
    EXPECT_EQ(c.rows[3 + ci].mode, m == 0 ? "stacking" : "fixed");
    EXPECT_EQ(c.rows[3 + ci].test, ev.categories[ci].metrics[m]);
  }
}

// --- cross-validation ---------------------------------------------------------------------

TEST(CrossValidation, DeterministicAndCoversEveryRecord) {
  const auto fx = make_fixture(20, 5, {1.0, 0.0, 0.0});
  PipelineConfig config = light_config(5);
  config.k_folds = 3;
  CvOptions o;
  o.k = 3;
  o.repeats = 2;
  o.seed = 8;
  const CvResult a = cross_validate(fx.data.records, fx.table, config, o);
  const CvResult b = cross_validate(fx.data.records, fx.table, config, o);
  ASSERT_EQ(a.folds.size(), 6u);
  ASSERT_EQ(a.repeats.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(a.repeats[r], b.repeats[r]);
    EXPECT_EQ(a.repeats[r][0].n, fx.data.records.size());
  }
  for (const CvFold& f : a.folds) EXPECT_EQ(f.n_train + f.n_test, fx.data.records.size());
  EXPECT_NE(a.repeats[0], a.repeats[1]);
  EXPECT_EQ(a.table().to_csv(), b.table().to_csv());
  EXPECT_EQ(a.summary[0].mean.n, 2 * fx.data.records.size());
}

TEST(CrossValidation, LeaveOneOutCompletes) {
  const auto fx = make_fixture(4, 6, {1.0, 0.0, 0.0});
  const std::size_t n = fx.data.records.size();
  PipelineConfig config = light_config(6);
  config.k_folds = 3;
  CvOptions o;
  o.k = static_cast<int>(n);
  o.repeats = 1;
  const CvResult r = cross_validate(fx.data.records, fx.table, config, o);
  EXPECT_EQ(r.folds.size(), n);
  for (const CvFold& f : r.folds) EXPECT_EQ(f.n_test, 1u);
  EXPECT_EQ(r.repeats[0][0].n, n);
}

TEST(CrossValidation, RejectsBadOptions) {
  const auto fx = make_fixture(4, 6, {1.0, 0.0, 0.0});
  CvOptions o;
  o.k = 1;
  EXPECT_THROW(cross_validate(fx.data.records, fx.table, light_config(1), o), ConfigError);
  o.k = 3;
  o.repeats = 0;
  EXPECT_THROW(cross_validate(fx.data.records, fx.table, light_config(1), o), ConfigError);
  o.repeats = 1;
  o.k = static_cast<int>(fx.data.records.size()) + 1;
  EXPECT_THROW(cross_validate(fx.data.records, fx.table, light_config(1), o), ConfigError);
}

TEST(CrossValidation, ShuffledTargetsHaveNoSkill) {
  const auto fx = make_fixture(40, 12, {1.0, 0.0, 0.0}, true);
  CvOptions o;
  o.k = 5;
  o.repeats = 1;
  o.seed = 12;
  const CvResult r = cross_validate(fx.data.records, fx.table, light_config(12), o);
  EXPECT_LE(r.summary[0].mean.r2, 0.1);
  EXPECT_LE(r.summary[1].mean.r2, 0.1);
}

// --- feature importance ----------------------------------------------------------------------

namespace {

struct SingleFactor {
  FeatureSchema schema;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

SingleFactor single_factor(std::uint64_t seed, Eigen::Index n = 150) {
  SingleFactor s;
  s.schema = FeatureSchema({{"MolWt", FeatureGroup::kRdkitGlobal},
                            {"ext1", FeatureGroup::kExternal},
                            {"ext2", FeatureGroup::kExternal},
                            {"flat", FeatureGroup::kExternal},
                            {"Chi0", FeatureGroup::kGraph}},
                           2, 1024);
  Rng rng(seed);
  s.x.resize(n, 5);
  s.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j : {0, 1, 2, 4}) s.x(i, j) = rng.uniform01();
    s.x(i, 3) = 1.0;
    s.y(i) = 4.0 * s.x(i, 0);
  }
  return s;
}

}  // namespace

TEST(Importance, SingleFactorRanksFirst) {
  const SingleFactor s = single_factor(3);
  const ForestModel f = fit_forest(s.x, s.y, ForestConfig{60, -1, 2, 0, 4});
  const SingleFactor v = single_factor(4, 80);
  const ImportanceReport rep = feature_importance(f, s.schema, v.x, v.y, 3, 9);
  ASSERT_EQ(rep.features.size(), 5u);
  EXPECT_EQ(rep.top.front(), 0u);
  EXPECT_EQ(rep.top.size(), 3u);
  for (std::size_t j = 1; j < 5; ++j) EXPECT_GT(rep.features[0].impurity, rep.features[j].impurity);
  EXPECT_GT(rep.features[0].permutation, 0.0);

  double sum = 0.0;
  for (const ImportanceEntry& e : rep.features) {
    EXPECT_GE(e.impurity, 0.0);
    sum += e.impurity;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(std::accumulate(rep.bucket_shares.begin(), rep.bucket_shares.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(rep.top_table().rows.size(), 3u);
  EXPECT_EQ(rep.share_table().rows.size(), 4u);
}

TEST(Importance, UnusedFeatureHasZeroPermutationImportance) {
  const SingleFactor s = single_factor(5);
  const ForestModel f = fit_forest(s.x, s.y, ForestConfig{40, 3, 2, 0, 6});
  const SingleFactor v = single_factor(6, 60);
  const ImportanceReport rep = feature_importance(f, s.schema, v.x, v.y, 5, 1);
  EXPECT_EQ(rep.features[3].impurity, 0.0);
  EXPECT_NEAR(rep.features[3].permutation, 0.0, 1e-12);
  for (const ImportanceEntry& e : rep.features) {
    if (e.impurity == 0.0) EXPECT_NEAR(e.permutation, 0.0, 1e-12) << e.name;
  }
  // Reproducible under a fixed seed.
  const ImportanceReport again = feature_importance(f, s.schema, v.x, v.y, 5, 1);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(rep.features[j].permutation, again.features[j].permutation);
}

TEST(Importance, MaskingTopFeatureDoesNotRaiseTrainingFit) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SingleFactor s = single_factor(seed);
    const ForestConfig cfg{40, -1, 2, 0, seed};
    const ForestModel full = fit_forest(s.x, s.y, cfg);
    const ImportanceReport rep = feature_importance(full, s.schema, s.x, s.y, 1, seed, 1);
    const std::size_t top = rep.top.front();
    Eigen::MatrixXd masked(s.x.rows(), s.x.cols() - 1);
    for (Eigen::Index j = 0, k = 0; j < s.x.cols(); ++j) {
      if (static_cast<std::size_t>(j) != top) masked.col(k++) = s.x.col(j);
    }
    const ForestModel without = fit_forest(masked, s.y, cfg);
    EXPECT_LE(training_r2(without, masked, s.y), training_r2(full, s.x, s.y)) << seed;
  }
}

TEST(Importance, Buckets) {
  EXPECT_EQ(bucket_of(FeatureGroup::kExternal), SourceBucket::kExternal);
  EXPECT_EQ(bucket_of(FeatureGroup::kGraph), SourceBucket::kGraph);
  EXPECT_EQ(bucket_of(FeatureGroup::kRdkitGlobal), SourceBucket::kGlobal);
  EXPECT_EQ(bucket_of(FeatureGroup::kSmilesLen), SourceBucket::kGlobal);
  EXPECT_EQ(bucket_of(FeatureGroup::kMorgan), SourceBucket::kFingerprint);
  EXPECT_EQ(bucket_of(FeatureGroup::kMaccs), SourceBucket::kFingerprint);
}
