#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lengthlogd/descriptors.hpp"
#include "lengthlogd/smiles.hpp"

namespace lengthlogd {

struct Record {
  std::string id;
  std::string smiles;
  double logd = 0.0;
  std::size_t record_order = 0;  // 0-based position among data rows of the file
  std::optional<std::string> date;
  ExternalValues external;  // missing cells are absent
  std::shared_ptr<const MolecularGraph> graph;

  int smiles_length() const { return graph ? graph->smiles_length() : lengthlogd::smiles_length(smiles); }
};

enum class MissingPolicy : std::uint8_t { kRejectColumn, kImpute };

struct LoadOptions {
  MissingPolicy missing = MissingPolicy::kRejectColumn;
};

struct DroppedRow {
  std::size_t line = 0;  // 1-based line in the source file
  std::string id;
  std::string reason;
};

struct CleaningReport {
  std::vector<DroppedRow> dropped;
  std::vector<std::string> ignored_columns;   // no numeric cells at all
  std::vector<std::string> rejected_columns;  // missing or non-numeric cells under kRejectColumn
  std::vector<std::string> cell_errors;       // non-numeric cells treated as missing
  std::vector<std::string> warnings;          // parser warnings, dedup notes

  /// `line,id,reason` rows.
  std::string to_csv() const;
};

struct LoadedData {
  std::vector<Record> records;
  std::vector<std::string> external_columns;  // file order
  CleaningReport report;
};

/// Validates, parses and deduplicates the rows of a peptide CSV. Required
/// columns id, smiles, logd (case-insensitive); optional date (ISO-8601);
/// every other column with at least one numeric cell is an external feature.
/// Duplicate SMILES keep the most recent date, else the last occurrence.
/// Throws DataError on a missing required column or when nothing survives.
LoadedData load_and_clean(std::string_view csv_text, const LoadOptions& options = {});
LoadedData load_and_clean_file(const std::filesystem::path& path, const LoadOptions& options = {});

/// Order-sensitive hash of the cleaned records, as 16 hex digits.
std::string dataset_fingerprint(std::span<const Record> records);

// --- length categories -------------------------------------------------------

enum class Category : std::uint8_t { kShort, kMedium, kLong };
inline constexpr std::array<Category, 3> kCategories{Category::kShort, Category::kMedium, Category::kLong};
std::string_view category_name(Category c);
Category parse_category(std::string_view name);

struct LengthThresholds {
  double q33 = 0.0;
  double q66 = 0.0;

  bool operator==(const LengthThresholds&) const = default;
};

/// Percentile p in [0, 100] of sorted values, linear interpolation at rank
/// 1 + p(n-1)/100.
double percentile(std::span<const double> sorted, double p);

/// Throws DataError for fewer than 3 lengths.
LengthThresholds compute_thresholds(std::span<const int> lengths);

/// Short if l <= q33, Medium if l <= q66, Long otherwise.
Category categorize(double length, const LengthThresholds& t);

// --- splitting -----------------------------------------------------------------

enum class Split : std::uint8_t { kTrain, kVal, kTest };
std::string_view split_name(Split s);

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};
/// Throws ConfigError unless all ratios are >= 0, train > 0 and they sum to 1
/// within 1e-9.
void validate_ratios(const SplitRatios& r);

enum class ThresholdPolicy : std::uint8_t { kTrain, kAll };
std::string_view threshold_policy_name(ThresholdPolicy p);

struct StratifiedDataset {
  std::vector<Record> records;
  std::vector<Category> category;
  std::vector<Split> split;
  LengthThresholds thresholds;
  ThresholdPolicy policy = ThresholdPolicy::kTrain;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::vector<std::size_t> indices(Split s) const;
  std::vector<std::size_t> indices(Split s, Category c) const;
  /// `id,category,split` rows.
  std::string assignment_csv() const;
};

/// Shuffles each length stratum with a seeded generator and cuts it by the
/// ratios. Strata come from percentiles of all lengths; with kTrain the final
/// thresholds are then recomputed from the training split alone and every
/// record is re-categorized with them. A stratum with fewer than 3 records
/// goes to train entirely, with a warning.
StratifiedDataset split_dataset(std::vector<Record> records, const SplitRatios& ratios, std::uint64_t seed,
                                ThresholdPolicy policy = ThresholdPolicy::kTrain);

/// Thresholds from the lengths of the given records.
LengthThresholds thresholds_of(std::span<const Record> records, std::span<const std::size_t> rows);

// --- features --------------------------------------------------------------------

/// Population mean and scale per column. Columns with (near) zero spread get
/// scale 1.
struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  bool operator==(const Scaler& o) const {
    return mean.size() == o.mean.size() && scale.size() == o.scale.size() && (mean.array() == o.mean.array()).all() &&
           (scale.array() == o.scale.array()).all();
  }
};

Scaler fit_scaler(const Eigen::MatrixXd& x);
/// Throws DataError on a column-count mismatch.
Eigen::MatrixXd apply_scaler(const Scaler& s, const Eigen::MatrixXd& x);
void apply_scaler_row(const Scaler& s, std::span<double> row);

/// Means of each external column over the given records (present cells
/// only). Throws DataError if a column has no value among them.
ExternalValues fit_imputation(std::span<const Record> records, std::span<const std::size_t> rows,
                              std::span<const std::string> columns);

/// Feature rows for the given records. Missing externals are filled from
/// `impute` when it has the column; otherwise assembly throws.
Eigen::MatrixXd feature_matrix(std::span<const Record> records, std::span<const std::size_t> rows,
                               const FeatureSchema& schema, const ExternalValues* impute = nullptr);

Eigen::VectorXd targets(std::span<const Record> records, std::span<const std::size_t> rows);

}  // namespace lengthlogd
