#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "lengthlogd/csv.hpp"
#include "lengthlogd/dataset.hpp"
#include "lengthlogd/errors.hpp"

namespace lengthlogd {
namespace {

TEST(Csv, QuotedFieldsAndLineEnds) {
  const CsvTable t = parse_csv("\xEF\xBB\xBFid,smiles\r\n\"a,1\",\"C\"\"C\"\r\n\nb,CO\n");
  ASSERT_EQ(t.header, (std::vector<std::string>{"id", "smiles"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "a,1");
  EXPECT_EQ(t.rows[0][1], "C\"C");
  EXPECT_EQ(t.row_lines[1], 4u);
  EXPECT_THROW(parse_csv("a,b\n1\n"), DataError);
  EXPECT_THROW(parse_csv("a,b\n\"1,2\n"), DataError);
}

TEST(Csv, EscapeRoundTrip) {
  const std::vector<std::string> fields{"plain", "with,comma", "with\"quote", ""};
  const CsvTable t = parse_csv("h1,h2,h3,h4\n" + csv_line(fields));
  EXPECT_EQ(t.rows[0], fields);
}

TEST(Csv, DoubleFormattingRoundTrips) {
  for (double v : {0.1, -2.345678901234567, 1e-300, 123456789.0, 1.0 / 3.0}) {
    double back = 0;
    ASSERT_TRUE(parse_double(format_double(v), back));
    EXPECT_EQ(back, v);
  }
  double v = 0;
  EXPECT_FALSE(parse_double("", v));
  EXPECT_FALSE(parse_double("1.5x", v));
  EXPECT_FALSE(parse_double("nan", v));
  EXPECT_TRUE(parse_double(" +2.5 ", v));
  EXPECT_EQ(v, 2.5);
}

TEST(LoadAndClean, KeepsMostRecentDuplicate) {
  const auto data = load_and_clean(
      "id,SMILES,LogD,date\n"
      "a,CCO,-1.5,2023-01-02\n"
      "b,CCO,-2.0,2020-05-01\n"
      "c,CCN,-1.2,\n");
  ASSERT_EQ(data.records.size(), 2u);
  EXPECT_EQ(data.records[0].id, "a");
  EXPECT_EQ(data.records[0].logd, -1.5);
  ASSERT_EQ(data.report.dropped.size(), 1u);
  EXPECT_EQ(data.report.dropped[0].id, "b");
  EXPECT_EQ(data.report.dropped[0].line, 3u);
}

TEST(LoadAndClean, WithoutDatesLastOccurrenceWins) {
  const auto data = load_and_clean("id,smiles,logd\na,CCO,1\nb,CCO,2\n");
  ASSERT_EQ(data.records.size(), 1u);
  EXPECT_EQ(data.records[0].id, "b");
}

TEST(LoadAndClean, DropsBadSmilesWithReason) {
  const auto data = load_and_clean("id,smiles,logd\nok1,CCO,1\nbad,C1CC,2\nok2,CCN,x\nok3,CCC,3\n");
  ASSERT_EQ(data.records.size(), 2u);
  ASSERT_EQ(data.report.dropped.size(), 2u);
  EXPECT_EQ(data.report.dropped[0].id, "bad");
  EXPECT_NE(data.report.dropped[0].reason.find("SMILES"), std::string::npos);
  EXPECT_NE(data.report.dropped[1].reason.find("logd"), std::string::npos);
  const std::string csv = data.report.to_csv();
  EXPECT_NE(csv.find("3,bad,"), std::string::npos);
}

TEST(LoadAndClean, ThreeValidRows) {
  const auto data = load_and_clean("id,smiles,logd\na,C,1\nb,CC,2\nc,CCC,3\n");
  EXPECT_EQ(data.records.size(), 3u);
  EXPECT_TRUE(data.report.dropped.empty());
}

TEST(LoadAndClean, MissingRequiredColumn) {
  EXPECT_THROW(load_and_clean("id,smiles\na,C\n"), DataError);
  EXPECT_THROW(load_and_clean("id,smiles,logd\na,C1,1\n"), DataError);  // nothing survives
}

TEST(LoadAndClean, ExternalColumnPolicies) {
  const std::string csv =
      "id,smiles,logd,MOE_a,MOE_b,note,MACCS_1\n"
      "a,C,1,1.5,2,x,0\n"
      "b,CC,2,2.5,,y,1\n"
      "c,CCC,3,3.5,oops,z,1\n";
  const auto strict = load_and_clean(csv);
  EXPECT_EQ(strict.external_columns, (std::vector<std::string>{"MOE_a", "MACCS_1"}));
  EXPECT_EQ(strict.report.rejected_columns, (std::vector<std::string>{"MOE_b"}));
  EXPECT_EQ(strict.report.ignored_columns, (std::vector<std::string>{"note"}));
  EXPECT_EQ(strict.report.cell_errors.size(), 1u);
  EXPECT_EQ(strict.records[2].external.at("MOE_a"), 3.5);

  const auto lenient = load_and_clean(csv, {MissingPolicy::kImpute});
  EXPECT_EQ(lenient.external_columns, (std::vector<std::string>{"MOE_a", "MOE_b", "MACCS_1"}));
  EXPECT_FALSE(lenient.records[1].external.contains("MOE_b"));
  const std::vector<std::size_t> rows{0, 1, 2};
  const auto means = fit_imputation(lenient.records, rows, lenient.external_columns);
  EXPECT_EQ(means.at("MOE_b"), 2.0);
  EXPECT_EQ(means.at("MOE_a"), 2.5);
  const auto schema = build_schema(lenient.external_columns, {2, 64});
  EXPECT_THROW(feature_matrix(lenient.records, rows, schema), DataError);
  const Eigen::MatrixXd x = feature_matrix(lenient.records, rows, schema, &means);
  EXPECT_EQ(x(1, static_cast<Eigen::Index>(*schema.index_of("MOE_b"))), 2.0);
  EXPECT_EQ(x(0, static_cast<Eigen::Index>(*schema.index_of("MOE_b"))), 2.0);
}

TEST(LoadAndClean, FingerprintIsStable) {
  const auto a = load_and_clean("id,smiles,logd\na,C,1\nb,CC,2\n");
  const auto b = load_and_clean("id,smiles,logd\na,C,1\nb,CC,2\n");
  const auto c = load_and_clean("id,smiles,logd\na,C,1\nb,CC,2.5\n");
  EXPECT_EQ(dataset_fingerprint(a.records), dataset_fingerprint(b.records));
  EXPECT_NE(dataset_fingerprint(a.records), dataset_fingerprint(c.records));
  EXPECT_EQ(dataset_fingerprint(a.records).size(), 16u);
}

TEST(Thresholds, PercentileOracle) {
  const std::vector<int> l{10, 20, 30};
  const LengthThresholds t = compute_thresholds(l);
  EXPECT_NEAR(t.q33, 16.6, 1e-12);
  EXPECT_NEAR(t.q66, 23.2, 1e-12);
  const std::vector<int> same{50, 50, 50, 50};
  EXPECT_EQ(compute_thresholds(same), (LengthThresholds{50, 50}));
  std::vector<int> uniform;
  for (int i = 38; i <= 108; ++i) uniform.push_back(i);
  const LengthThresholds u = compute_thresholds(uniform);
  EXPECT_LT(u.q33, u.q66);
  EXPECT_GE(u.q33, 38);
  EXPECT_LE(u.q66, 108);
  EXPECT_THROW(compute_thresholds(std::vector<int>{1, 2}), DataError);
}

TEST(Thresholds, PercentileEndpoints) {
  const std::vector<double> v{1, 2, 4, 8};
  EXPECT_EQ(percentile(v, 0), 1.0);
  EXPECT_EQ(percentile(v, 100), 8.0);
  EXPECT_EQ(percentile(v, 50), 3.0);
}

TEST(Categorize, BoundariesFollowLessOrEqual) {
  const LengthThresholds t{40, 60};
  EXPECT_EQ(categorize(40, t), Category::kShort);
  EXPECT_EQ(categorize(60, t), Category::kMedium);
  EXPECT_EQ(categorize(61, t), Category::kLong);
  EXPECT_EQ(categorize(41, t), Category::kMedium);
}

TEST(Categorize, RoutesAreExclusiveAndExhaustive) {
  for (double q33 : {10.0, 16.6, 30.0}) {
    for (double q66 : {q33, q33 + 0.5, q33 + 7.25}) {
      const LengthThresholds t{q33, q66};
      for (int l = 0; l < 60; ++l) {
        const int hits = (l <= q33) + (l > q33 && l <= q66) + (l > q66);
        EXPECT_EQ(hits, 1);
        const Category c = categorize(l, t);
        EXPECT_EQ(c == Category::kShort, l <= q33);
        EXPECT_EQ(c == Category::kLong, l > q66);
      }
    }
  }
}

std::vector<Record> make_records(const std::vector<int>& chain_lengths) {
  std::vector<Record> out;
  for (std::size_t i = 0; i < chain_lengths.size(); ++i) {
    Record r;
    r.id = "r" + std::to_string(i);
    r.smiles = std::string(static_cast<std::size_t>(chain_lengths[i]), 'C');
    r.logd = static_cast<double>(i);
    r.record_order = i;
    r.graph = std::make_shared<const MolecularGraph>(parse_smiles(r.smiles));
    out.push_back(std::move(r));
  }
  return out;
}

TEST(Split, PerCategoryCountsFollowRatios) {
  std::vector<int> lengths;
  for (int band : {10, 20, 30}) {
    for (int k = 0; k < 100; ++k) lengths.push_back(band);
  }
  const StratifiedDataset ds = split_dataset(make_records(lengths), {}, 42);
  for (Category c : kCategories) {
    EXPECT_EQ(ds.indices(Split::kTrain, c).size(), 70u) << category_name(c);
    EXPECT_EQ(ds.indices(Split::kVal, c).size(), 15u);
    EXPECT_EQ(ds.indices(Split::kTest, c).size(), 15u);
  }
}

TEST(Split, SeededAndReproducible) {
  std::vector<int> lengths;
  for (int i = 0; i < 90; ++i) lengths.push_back(5 + i % 30);
  const auto a = split_dataset(make_records(lengths), {}, 7);
  const auto b = split_dataset(make_records(lengths), {}, 7);
  const auto c = split_dataset(make_records(lengths), {}, 8);
  EXPECT_EQ(a.split, b.split);
  EXPECT_NE(a.split, c.split);
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) EXPECT_EQ(a.indices(s).size(), c.indices(s).size());
}

TEST(Split, ThresholdsComeFromTrainOnly) {
  std::vector<int> lengths;
  for (int i = 0; i < 120; ++i) lengths.push_back(3 + (i * 37) % 50);
  const auto ds = split_dataset(make_records(lengths), {}, 3, ThresholdPolicy::kTrain);
  EXPECT_EQ(ds.thresholds, thresholds_of(ds.records, ds.indices(Split::kTrain)));
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    EXPECT_EQ(ds.category[i], categorize(ds.records[i].smiles_length(), ds.thresholds));
  }
  const auto all = split_dataset(make_records(lengths), {}, 3, ThresholdPolicy::kAll);
  std::vector<std::size_t> every(all.records.size());
  for (std::size_t i = 0; i < every.size(); ++i) every[i] = i;
  EXPECT_EQ(all.thresholds, thresholds_of(all.records, every));
  // every category in every split
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    for (Category c : kCategories) EXPECT_FALSE(ds.indices(s, c).empty());
  }
}

TEST(Split, TinyStratumGoesToTrain) {
  std::vector<int> lengths{1, 1, 1, 1, 1, 1, 5, 5, 5, 5, 5, 5, 9, 9};
  const auto ds = split_dataset(make_records(lengths), {}, 1);
  ASSERT_EQ(ds.warnings.size(), 1u);
  EXPECT_EQ(ds.split[12], Split::kTrain);
  EXPECT_EQ(ds.split[13], Split::kTrain);
}

TEST(Split, RatiosValidated) {
  EXPECT_THROW(validate_ratios({0.7, 0.2, 0.2}), ConfigError);
  EXPECT_THROW(validate_ratios({0.0, 0.5, 0.5}), ConfigError);
  EXPECT_THROW(validate_ratios({1.1, -0.1, 0.0}), ConfigError);
  EXPECT_NO_THROW(validate_ratios({0.8, 0.2, 0.0}));
}

TEST(Split, AssignmentCsv) {
  const auto ds = split_dataset(make_records({3, 4, 5, 6, 7, 8}), {}, 1);
  const std::string csv = ds.assignment_csv();
  EXPECT_EQ(csv.rfind("id,category,split\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Scaler, HandValues) {
  Eigen::MatrixXd x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  const Scaler s = fit_scaler(x);
  EXPECT_DOUBLE_EQ(s.mean(0), 2.0);
  EXPECT_NEAR(s.scale(0), std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_EQ(s.scale(1), 1.0);
  const Eigen::MatrixXd z = apply_scaler(s, x);
  EXPECT_NEAR(z(0, 0), -1.224744871391589, 1e-12);
  EXPECT_NEAR(z(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(z(2, 0), 1.224744871391589, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(z(i, 1), 0.0);
  std::vector<double> row{2.0, 5.0};
  apply_scaler_row(s, row);
  EXPECT_EQ(row, (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(apply_scaler(s, Eigen::MatrixXd(2, 3)), DataError);
}

TEST(Scaler, StandardizesRandomColumns) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(50, 6) * 7.0;
  x.col(3).array() += 1000.0;
  x.col(5).setConstant(-4.0);
  const Eigen::MatrixXd z = apply_scaler(fit_scaler(x), x);
  for (int j = 0; j < 6; ++j) {
    EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-9);
    const double sd = std::sqrt((z.col(j).array() - z.col(j).mean()).square().mean());
    if (j != 5) EXPECT_NEAR(sd, 1.0, 1e-9);
  }
}

}  // namespace
}  // namespace lengthlogd
