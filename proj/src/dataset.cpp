#include "lengthlogd/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "lengthlogd/csv.hpp"
#include "lengthlogd/errors.hpp"
#include "lengthlogd/random.hpp"

namespace lengthlogd {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string CleaningReport::to_csv() const {
  std::string out = "line,id,reason\n";
  for (const DroppedRow& d : dropped) out += csv_line({std::to_string(d.line), d.id, d.reason});
  return out;
}

LoadedData load_and_clean(std::string_view csv_text, const LoadOptions& options) {
  const CsvTable table = parse_csv(csv_text);
  std::optional<std::size_t> id_col, smiles_col, logd_col, date_col;
  std::vector<std::size_t> other;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string name = lower(trim(table.header[c]));
    auto claim = [&](std::optional<std::size_t>& slot) {
      if (slot) throw DataError(fmt::format("column '{}' appears more than once", table.header[c]));
      slot = c;
    };
    if (name == "id") claim(id_col);
    else if (name == "smiles") claim(smiles_col);
    else if (name == "logd") claim(logd_col);
    else if (name == "date") claim(date_col);
    else other.push_back(c);
  }
  for (auto [slot, name] : {std::pair{&id_col, "id"}, {&smiles_col, "smiles"}, {&logd_col, "logd"}}) {
    if (!*slot) throw DataError(fmt::format("missing required column '{}'", name));
  }

  LoadedData out;
  CleaningReport& report = out.report;

  // Classify external columns: numeric, textual (ignored), or with gaps.
  std::vector<std::size_t> external;
  for (std::size_t c : other) {
    const std::string name(trim(table.header[c]));
    std::size_t numeric = 0, missing = 0;
    std::vector<std::size_t> bad_rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      double v;
      const std::string_view cell = trim(table.rows[r][c]);
      if (cell.empty()) ++missing;
      else if (parse_double(cell, v)) ++numeric;
      else bad_rows.push_back(r);
    }
    if (numeric == 0) {
      report.ignored_columns.push_back(name);
      continue;
    }
    for (std::size_t r : bad_rows) {
      report.cell_errors.push_back(fmt::format("line {}: column '{}': non-numeric value '{}'", table.row_lines[r], name,
                                               std::string(trim(table.rows[r][c]))));
    }
    if ((missing > 0 || !bad_rows.empty()) && options.missing == MissingPolicy::kRejectColumn) {
      report.rejected_columns.push_back(name);
      continue;
    }
    external.push_back(c);
  }
  for (std::size_t c : external) out.external_columns.emplace_back(trim(table.header[c]));

  std::vector<Record> valid;
  std::vector<std::size_t> valid_lines;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.row_lines[r];
    Record rec;
    rec.id = std::string(trim(row[*id_col]));
    rec.smiles = std::string(trim(row[*smiles_col]));
    rec.record_order = r;
    if (rec.id.empty()) {
      report.dropped.push_back({line, rec.id, "empty id"});
      continue;
    }
    if (!parse_double(row[*logd_col], rec.logd)) {
      report.dropped.push_back({line, rec.id, fmt::format("invalid logd '{}'", std::string(trim(row[*logd_col])))});
      continue;
    }
    try {
      rec.graph = std::make_shared<const MolecularGraph>(parse_smiles(rec.smiles));
    } catch (const SmilesError& e) {
      report.dropped.push_back({line, rec.id, fmt::format("invalid SMILES: {}", e.what())});
      continue;
    }
    for (const std::string& w : rec.graph->report().warnings) {
      report.warnings.push_back(fmt::format("line {} ({}): {}", line, rec.id, w));
    }
    if (date_col) {
      const std::string_view d = trim(row[*date_col]);
      if (!d.empty()) rec.date = std::string(d);
    }
    for (std::size_t c : external) {
      double v;
      if (parse_double(row[c], v)) rec.external.emplace(std::string(trim(table.header[c])), v);
    }
    valid.push_back(std::move(rec));
    valid_lines.push_back(line);
  }

  // Deduplicate on SMILES: the latest date wins; undated rows count as oldest;
  // equal dates fall back to the later file position.
  std::map<std::string, std::size_t> best;
  auto newer = [&](const Record& a, const Record& b) {
    if (a.date != b.date) {
      if (!b.date) return true;
      if (!a.date) return false;
      return *a.date > *b.date;
    }
    return a.record_order > b.record_order;
  };
  for (std::size_t i = 0; i < valid.size(); ++i) {
    auto [it, inserted] = best.emplace(valid[i].smiles, i);
    if (!inserted && newer(valid[i], valid[it->second])) it->second = i;
  }
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const std::size_t keep = best.at(valid[i].smiles);
    if (keep == i) {
      out.records.push_back(std::move(valid[i]));
    } else {
      report.dropped.push_back({valid_lines[i], valid[i].id,
                                fmt::format("duplicate SMILES; kept id '{}' (line {})", valid[keep].id,
                                            valid_lines[keep])});
    }
  }
  std::sort(report.dropped.begin(), report.dropped.end(),
            [](const DroppedRow& a, const DroppedRow& b) { return a.line < b.line; });
  if (out.records.empty()) throw DataError("no valid records remain after cleaning");
  return out;
}

LoadedData load_and_clean_file(const std::filesystem::path& path, const LoadOptions& options) {
  return load_and_clean(read_text_file(path), options);
}

std::string dataset_fingerprint(std::span<const Record> records) {
  Fnv1a64 h;
  h.add_u64(records.size());
  for (const Record& r : records) {
    h.add_string(r.id);
    h.add_string(r.smiles);
    h.add_double(r.logd);
    h.add_u64(r.external.size());
    for (const auto& [k, v] : r.external) {
      h.add_string(k);
      h.add_double(v);
    }
  }
  return fmt::format("{:016x}", h.value());
}

// --- categories ----------------------------------------------------------------

std::string_view category_name(Category c) {
  switch (c) {
    case Category::kShort: return "Short";
    case Category::kMedium: return "Medium";
    case Category::kLong: return "Long";
  }
  return "?";
}

Category parse_category(std::string_view name) {
  for (Category c : kCategories) {
    if (lower(category_name(c)) == lower(name)) return c;
  }
  throw DataError(fmt::format("unknown category '{}'", name));
}

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("percentile of an empty sample");
  const double rank = 1.0 + p * static_cast<double>(sorted.size() - 1) / 100.0;
  const double fl = std::floor(rank);
  const std::size_t lo = static_cast<std::size_t>(fl) - 1;
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = rank - fl;
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

LengthThresholds compute_thresholds(std::span<const int> lengths) {
  if (lengths.size() < 3) {
    throw DataError(fmt::format("length thresholds need at least 3 records, got {}", lengths.size()));
  }
  std::vector<double> v(lengths.begin(), lengths.end());
  std::sort(v.begin(), v.end());
  return {percentile(v, 33.0), percentile(v, 66.0)};
}

Category categorize(double length, const LengthThresholds& t) {
  if (length <= t.q33) return Category::kShort;
  if (length <= t.q66) return Category::kMedium;
  return Category::kLong;
}

// --- splitting -----------------------------------------------------------------

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string_view threshold_policy_name(ThresholdPolicy p) { return p == ThresholdPolicy::kTrain ? "train" : "all"; }

void validate_ratios(const SplitRatios& r) {
  for (double v : {r.train, r.val, r.test}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("split ratios must be finite and non-negative");
  }
  if (r.train <= 0.0) throw ConfigError("the training ratio must be positive");
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw ConfigError(fmt::format("split ratios must sum to 1 (got {} + {} + {})", r.train, r.val, r.test));
  }
}

std::vector<std::size_t> StratifiedDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> StratifiedDataset::indices(Split s, Category c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (split[i] == s && category[i] == c) out.push_back(i);
  }
  return out;
}

std::string StratifiedDataset::assignment_csv() const {
  std::string out = "id,category,split\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out += csv_line({records[i].id, std::string(category_name(category[i])), std::string(split_name(split[i]))});
  }
  return out;
}

LengthThresholds thresholds_of(std::span<const Record> records, std::span<const std::size_t> rows) {
  std::vector<int> lengths;
  lengths.reserve(rows.size());
  for (std::size_t i : rows) lengths.push_back(records[i].smiles_length());
  return compute_thresholds(lengths);
}

StratifiedDataset split_dataset(std::vector<Record> records, const SplitRatios& ratios, std::uint64_t seed,
                                ThresholdPolicy policy) {
  validate_ratios(ratios);
  StratifiedDataset ds;
  ds.records = std::move(records);
  ds.seed = seed;
  ds.policy = policy;
  const std::size_t n = ds.records.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const LengthThresholds strata_thresholds = thresholds_of(ds.records, all);

  ds.split.assign(n, Split::kTrain);
  for (Category c : kCategories) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (categorize(ds.records[i].smiles_length(), strata_thresholds) == c) members.push_back(i);
    }
    if (members.empty()) continue;
    if (members.size() < 3) {
      ds.warnings.push_back(fmt::format("stratum {} has only {} record(s); all assigned to train", category_name(c),
                                        members.size()));
      continue;
    }
    Rng rng(derive_seed(seed, "dataset/split", {static_cast<std::uint64_t>(c)}));
    rng.shuffle(members);
    const double m = static_cast<double>(members.size());
    std::size_t n_test = static_cast<std::size_t>(std::llround(m * ratios.test));
    std::size_t n_val = static_cast<std::size_t>(std::llround(m * ratios.val));
    if (ratios.test > 0.0) n_test = std::max<std::size_t>(n_test, 1);
    if (ratios.val > 0.0) n_val = std::max<std::size_t>(n_val, 1);
    while (n_test + n_val >= members.size()) {
      // keep at least one training record
      if (n_val >= n_test && n_val > 0) --n_val;
      else --n_test;
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      Split s = Split::kTrain;
      if (k < n_test) s = Split::kTest;
      else if (k < n_test + n_val) s = Split::kVal;
      ds.split[members[k]] = s;
    }
  }

  if (policy == ThresholdPolicy::kAll) {
    ds.thresholds = strata_thresholds;
  } else {
    ds.thresholds = thresholds_of(ds.records, ds.indices(Split::kTrain));
  }
  ds.category.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.category[i] = categorize(ds.records[i].smiles_length(), ds.thresholds);
  return ds;
}

// --- features --------------------------------------------------------------------

Scaler fit_scaler(const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw DataError("cannot fit a scaler on zero rows");
  Scaler s;
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().sum().transpose() / n;
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale(j) = sd <= 1e-12 * std::max(1.0, std::abs(s.mean(j))) ? 1.0 : sd;
  }
  return s;
}

Eigen::MatrixXd apply_scaler(const Scaler& s, const Eigen::MatrixXd& x) {
  if (x.cols() != s.mean.size()) {
    throw DataError(fmt::format("scaler expects {} columns, got {}", s.mean.size(), x.cols()));
  }
  Eigen::MatrixXd out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = (x.col(j).array() - s.mean(j)) / s.scale(j);
  return out;
}

void apply_scaler_row(const Scaler& s, std::span<double> row) {
  if (static_cast<Eigen::Index>(row.size()) != s.mean.size()) {
    throw DataError(fmt::format("scaler expects {} columns, got {}", s.mean.size(), row.size()));
  }
  for (std::size_t j = 0; j < row.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    row[j] = (row[j] - s.mean(k)) / s.scale(k);
  }
}

ExternalValues fit_imputation(std::span<const Record> records, std::span<const std::size_t> rows,
                              std::span<const std::string> columns) {
  ExternalValues means;
  for (const std::string& col : columns) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i : rows) {
      auto it = records[i].external.find(col);
      if (it != records[i].external.end()) {
        sum += it->second;
        ++count;
      }
    }
    if (count == 0) throw DataError(fmt::format("column '{}' has no values in the training split", col));
    means.emplace(col, sum / static_cast<double>(count));
  }
  return means;
}

Eigen::MatrixXd feature_matrix(std::span<const Record> records, std::span<const std::size_t> rows,
                               const FeatureSchema& schema, const ExternalValues* impute) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
  std::vector<double> buf(schema.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Record& rec = records[rows[r]];
    if (!rec.graph) throw DataError(fmt::format("record '{}' has no parsed graph", rec.id));
    if (impute != nullptr && !impute->empty()) {
      ExternalValues ext = rec.external;
      for (const auto& [k, v] : *impute) ext.emplace(k, v);
      assemble_features_into(*rec.graph, ext, schema, buf);
    } else {
      assemble_features_into(*rec.graph, rec.external, schema, buf);
    }
    for (std::size_t j = 0; j < buf.size(); ++j) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = buf[j];
  }
  return x;
}

Eigen::VectorXd targets(std::span<const Record> records, std::span<const std::size_t> rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Eigen::Index>(r)) = records[rows[r]].logd;
  return y;
}

}  // namespace lengthlogd
