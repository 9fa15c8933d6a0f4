#include "lengthlogd/cli.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lengthlogd/artifact.hpp"
#include "lengthlogd/csv.hpp"
#include "lengthlogd/errors.hpp"
#include "lengthlogd/random.hpp"
#include "lengthlogd/smiles.hpp"

namespace lengthlogd {

namespace fs = std::filesystem;

// --- settings -----------------------------------------------------------------

namespace {

struct KeySpec {
  std::string_view key;
  std::string_view fallback;
  std::string_view help;
};

// Echo order. `command` is only meaningful in config files.
constexpr KeySpec kKeys[] = {
    {"command", "", "subcommand to run when none is given on the command line"},
    {"input", "", "input CSV (id, smiles, logd, optional date, external columns)"},
    {"output", "", "output directory"},
    {"model", "", "model artifact (JSON)"},
    {"smiles", "", "single SMILES to predict"},
    {"external", "", "external values for --smiles, as name=value,name=value"},
    {"seed", "0", "run seed; every stochastic stage derives from it"},
    {"ratios", "0.70,0.15,0.15", "train,val,test split ratios"},
    {"thresholds_on", "train", "length percentiles from the training split (train) or all records (all)"},
    {"mode", "stacking", "ensemble mode: stacking, fixed or both"},
    {"alpha", "1.5", "adaptive LR weight multiplier for the Long category"},
    {"kfolds", "5", "folds for stacking and cross-validation"},
    {"repeats", "3", "cross-validation repeats"},
    {"cv_val_fraction", "0.15", "share of the CV training folds held out for validation"},
    {"preset", "all", "ablation presets: all or a list of full,no_graph,no_external,base_only"},
    {"top_k", "20", "features listed by importance"},
    {"importance_category", "Long", "category whose forest is analysed"},
    {"importance_shuffles", "10", "permutations per feature"},
    {"missing", "reject", "missing external cells: reject the column or impute training means"},
    {"morgan_radius", "2", "Morgan fingerprint radius"},
    {"morgan_bits", "1024", "Morgan fingerprint length"},
    {"lr_lambdas", "0,0.01,0.1,1,10", "ridge penalties searched for LR"},
    {"rf_trees", "300", "forest sizes searched"},
    {"rf_max_depth", "-1", "forest depth limits searched (-1 = none)"},
    {"rf_min_leaf", "2", "forest minimum leaf sizes searched"},
    {"rf_m_features", "0", "features tried per split (0 = a third)"},
    {"xgb_rounds", "300", "boosting rounds searched"},
    {"xgb_eta", "0.05", "boosting learning rates searched"},
    {"xgb_max_depth", "4", "boosting tree depths searched"},
    {"xgb_min_leaf", "5", "boosting minimum leaf sizes searched"},
    {"xgb_subsample", "0.8", "boosting row subsample fractions searched"},
    {"meta_lambdas", "0.01,0.1,1", "stacking meta-learner penalties"},
    {"synth_per_band", "200", "synthetic molecules per length band"},
    {"synth_noise", "0.1", "synthetic target noise standard deviation"},
    {"synth_shuffle", "false", "permute synthetic targets"},
    {"figures", "false", "also write figure data files"},
};

constexpr std::array<std::string_view, 5> kPathKeys{"input", "output", "model", "smiles", "external"};

const std::vector<std::string_view>& key_list() {
  static const std::vector<std::string_view> keys = [] {
    std::vector<std::string_view> v;
    for (const KeySpec& k : kKeys) v.push_back(k.key);
    return v;
  }();
  return keys;
}

const KeySpec* find_key(std::string_view key) {
  for (const KeySpec& k : kKeys) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

std::string flag_of(std::string_view key) {
  std::string f = "--" + std::string(key);
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.emplace_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double d = 0.0;
  if (!parse_double(v, d)) throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  return d;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  v = trim(v);
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid integer", key, v));
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not true or false", key, v));
}

std::vector<double> doubles(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (const std::string& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

std::vector<int> ints(std::string_view key, std::string_view v) {
  std::vector<int> out;
  for (const std::string& s : split_list(v)) out.push_back(to_int<int>(key, s));
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::span<const std::string_view> config_keys() { return key_list(); }

std::string_view config_default(std::string_view key) {
  const KeySpec* k = find_key(key);
  if (k == nullptr) throw ConfigError(fmt::format("unknown setting '{}'", key));
  return k->fallback;
}

Settings parse_config_text(std::string_view text) {
  Settings out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("config line {}: expected 'key = value', got '{}'", line_no, line));
    }
    const std::string key(trim(line.substr(0, eq)));
    if (find_key(key) == nullptr) throw ConfigError(fmt::format("config line {}: unknown setting '{}'", line_no, key));
    out[key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

RunConfig make_run_config(const Settings& values) {
  RunConfig c;
  for (const KeySpec& k : kKeys) c.settings[std::string(k.key)] = std::string(k.fallback);
  for (const auto& [key, value] : values) {
    if (find_key(key) == nullptr) throw ConfigError(fmt::format("unknown setting '{}'", key));
    c.settings[key] = value;
  }
  auto get = [&](std::string_view key) -> const std::string& { return c.settings.find(key)->second; };

  c.command = get("command");
  c.input = get("input");
  c.output = get("output");
  c.model = get("model");
  c.smiles = get("smiles");
  if (!get("external").empty()) {
    for (const std::string& item : split_list(get("external"))) {
      const std::size_t eq = item.find('=');
      require(eq != std::string::npos && eq > 0, fmt::format("external: expected name=value, got '{}'", item));
      c.external[std::string(trim(std::string_view(item).substr(0, eq)))] =
          to_double("external", std::string_view(item).substr(eq + 1));
    }
  }
  c.seed = to_int<std::uint64_t>("seed", get("seed"));

  const std::vector<double> r = doubles("ratios", get("ratios"));
  require(r.size() == 3, "ratios: expected three comma-separated values train,val,test");
  c.ratios = {r[0], r[1], r[2]};
  validate_ratios(c.ratios);

  const std::string& th = get("thresholds_on");
  require(th == "train" || th == "all", fmt::format("thresholds_on: expected train or all, got '{}'", th));
  c.thresholds_on = th == "train" ? ThresholdPolicy::kTrain : ThresholdPolicy::kAll;

  c.mode = get("mode");
  require(c.mode == "stacking" || c.mode == "fixed" || c.mode == "both",
          fmt::format("mode: expected stacking, fixed or both, got '{}'", c.mode));
  c.alpha = to_double("alpha", get("alpha"));
  require(c.alpha >= 1.0, fmt::format("alpha must be >= 1, got {}", c.alpha));
  c.kfolds = to_int<int>("kfolds", get("kfolds"));
  require(c.kfolds >= 2, fmt::format("kfolds must be >= 2, got {}", c.kfolds));
  c.repeats = to_int<int>("repeats", get("repeats"));
  require(c.repeats >= 1, fmt::format("repeats must be >= 1, got {}", c.repeats));
  c.cv_val_fraction = to_double("cv_val_fraction", get("cv_val_fraction"));
  require(c.cv_val_fraction >= 0.0 && c.cv_val_fraction < 1.0, "cv_val_fraction must be in [0, 1)");

  const std::string& preset = get("preset");
  if (preset == "all") {
    c.presets.assign(std::begin(kAllPresets), std::end(kAllPresets));
  } else {
    for (const std::string& p : split_list(preset)) c.presets.push_back(parse_preset(p));
  }
  c.top_k = to_int<std::size_t>("top_k", get("top_k"));
  require(c.top_k >= 1, "top_k must be >= 1");
  try {
    c.importance_category = parse_category(get("importance_category"));
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("importance_category: {}", e.what()));
  }
  c.importance_shuffles = to_int<int>("importance_shuffles", get("importance_shuffles"));
  require(c.importance_shuffles >= 1, "importance_shuffles must be >= 1");

  const std::string& missing = get("missing");
  require(missing == "reject" || missing == "impute",
          fmt::format("missing: expected reject or impute, got '{}'", missing));
  c.missing = missing == "reject" ? MissingPolicy::kRejectColumn : MissingPolicy::kImpute;

  c.schema.morgan_radius = to_int<int>("morgan_radius", get("morgan_radius"));
  c.schema.morgan_bits = to_int<int>("morgan_bits", get("morgan_bits"));
  require(c.schema.morgan_radius >= 0, "morgan_radius must be >= 0");
  require(c.schema.morgan_bits >= 1, "morgan_bits must be >= 1");

  c.grids.lr.clear();
  for (double l : doubles("lr_lambdas", get("lr_lambdas"))) {
    require(l >= 0.0, "lr_lambdas must be >= 0");
    c.grids.lr.push_back({l});
  }
  c.grids.rf.clear();
  for (int trees : ints("rf_trees", get("rf_trees"))) {
    for (int depth : ints("rf_max_depth", get("rf_max_depth"))) {
      for (int leaf : ints("rf_min_leaf", get("rf_min_leaf"))) {
        for (int m : ints("rf_m_features", get("rf_m_features"))) {
          require(trees >= 1 && (depth == -1 || depth >= 1) && leaf >= 1 && m >= 0,
                  "forest settings: trees >= 1, max_depth -1 or >= 1, min_leaf >= 1, m_features >= 0");
          c.grids.rf.push_back(ForestConfig{trees, depth, leaf, m, 0});
        }
      }
    }
  }
  c.grids.xgb.clear();
  for (int rounds : ints("xgb_rounds", get("xgb_rounds"))) {
    for (double eta : doubles("xgb_eta", get("xgb_eta"))) {
      for (int depth : ints("xgb_max_depth", get("xgb_max_depth"))) {
        for (int leaf : ints("xgb_min_leaf", get("xgb_min_leaf"))) {
          for (double sub : doubles("xgb_subsample", get("xgb_subsample"))) {
            require(rounds >= 1 && eta > 0.0 && depth >= 1 && leaf >= 1 && sub > 0.0 && sub <= 1.0,
                    "boosting settings: rounds >= 1, eta > 0, max_depth >= 1, min_leaf >= 1, subsample in (0, 1]");
            c.grids.xgb.push_back(GbtConfig{rounds, eta, depth, leaf, sub, 0});
          }
        }
      }
    }
  }
  c.meta_lambdas = doubles("meta_lambdas", get("meta_lambdas"));
  for (double l : c.meta_lambdas) require(l >= 0.0, "meta_lambdas must be >= 0");

  c.synth.per_band = to_int<int>("synth_per_band", get("synth_per_band"));
  require(c.synth.per_band >= 1, "synth_per_band must be >= 1");
  c.synth.noise_sd = to_double("synth_noise", get("synth_noise"));
  require(c.synth.noise_sd >= 0.0, "synth_noise must be >= 0");
  c.synth.seed = c.seed;
  c.synth.shuffle_targets = to_bool("synth_shuffle", get("synth_shuffle"));
  c.figures = to_bool("figures", get("figures"));
  return c;
}

std::string RunConfig::echo(bool with_paths) const {
  std::string out = "# lengthlogd run configuration\n";
  for (const KeySpec& k : kKeys) {
    if (!with_paths && std::find(kPathKeys.begin(), kPathKeys.end(), k.key) != kPathKeys.end()) continue;
    out += fmt::format("{} = {}\n", k.key, settings.find(k.key)->second);
  }
  return out;
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.grids = grids;
  p.k_folds = kfolds;
  p.meta_lambdas = meta_lambdas;
  p.alpha = alpha;
  p.mode = mode == "fixed" ? EnsembleMode::kFixed : EnsembleMode::kStacking;
  p.seed = seed;
  p.impute_missing = missing == MissingPolicy::kImpute;
  return p;
}

// --- commands -------------------------------------------------------------------

namespace {

struct Context {
  const RunConfig& config;
  std::ostream& out;
  std::ostream& err;

  void warn(std::string_view message) const { err << "warning: " << message << '\n'; }
};

void prepare_output(const RunConfig& c) {
  if (c.output.empty()) throw ConfigError("--output is required");
  std::error_code ec;
  fs::create_directories(c.output, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory {}: {}", c.output.string(), ec.message()));
}

void write(const Context& ctx, std::string_view name, std::string_view text) {
  write_text_file(ctx.config.output / name, text);
}

void write_table(const Context& ctx, std::string_view stem, const ReportTable& t) {
  write(ctx, fmt::format("{}.csv", stem), t.to_csv());
  write(ctx, fmt::format("{}.txt", stem), t.to_text());
}

struct Prepared {
  LoadedData loaded;  // records moved into data
  StratifiedDataset data;
  FeatureTable table;
};

Prepared prepare_data(const Context& ctx, bool split = true) {
  const RunConfig& c = ctx.config;
  if (c.input.empty()) throw ConfigError("--input is required");
  Prepared p;
  p.loaded = load_and_clean_file(c.input, {c.missing});
  write(ctx, "cleaning_report.csv", p.loaded.report.to_csv());
  for (const std::string& w : p.loaded.report.warnings) ctx.warn(w);
  for (const std::string& w : p.loaded.report.cell_errors) ctx.warn(w);
  if (!p.loaded.report.dropped.empty()) {
    ctx.warn(fmt::format("{} row(s) dropped; see cleaning_report.csv", p.loaded.report.dropped.size()));
  }
  for (const std::string& col : p.loaded.report.rejected_columns) {
    ctx.warn(fmt::format("external column '{}' rejected (missing or non-numeric cells)", col));
  }
  const FeatureSchema schema = build_schema(p.loaded.external_columns, c.schema);
  if (split) {
    p.data = split_dataset(std::move(p.loaded.records), c.ratios, c.seed, c.thresholds_on);
    for (const std::string& w : p.data.warnings) ctx.warn(w);
    p.table = build_feature_table(p.data.records, schema);
  } else {
    p.data.records = std::move(p.loaded.records);
    p.table = build_feature_table(p.data.records, schema);
  }
  return p;
}

PipelineFit fit_and_warn(const Context& ctx, const Prepared& p) {
  PipelineFit fit = fit_pipeline(p.data, p.table, ctx.config.pipeline());
  fit.model.metadata.config_echo = ctx.config.echo(false);
  for (const std::string& w : fit.warnings) ctx.warn(w);
  return fit;
}

/// The artifact at --model, checked against the data it is evaluated on.
LengthLogDModel load_matching_model(const Context& ctx, const Prepared& p) {
  LengthLogDModel m = load_model_file(ctx.config.model);
  if (m.metadata.dataset_fingerprint != dataset_fingerprint(p.data.records) || !(m.thresholds == p.data.thresholds)) {
    throw DataError(fmt::format(
        "model {} was not trained on this input with this seed and split; train it again or pass the same settings",
        ctx.config.model.string()));
  }
  for (const FeatureEntry& e : m.schema.entries()) {
    if (!p.table.schema.index_of(e.name)) throw DataError(fmt::format("input lacks model column '{}'", e.name));
  }
  return m;
}

std::string weights_text(const FixedWeights& w) { return fmt::format("LR {:.6f}  RF {:.6f}  XGB {:.6f}", w.lr, w.rf, w.xgb); }

std::string training_report(const PipelineFit& fit, const StratifiedDataset& data) {
  const LengthLogDModel& m = fit.model;
  std::string r;
  r += fmt::format("records: {}\n", data.records.size());
  r += fmt::format("dataset fingerprint: {}\n", m.metadata.dataset_fingerprint);
  r += fmt::format("split: train {} / val {} / test {}\n", data.indices(Split::kTrain).size(),
                   data.indices(Split::kVal).size(), data.indices(Split::kTest).size());
  r += fmt::format("length thresholds ({}): q33 = {}  q66 = {}\n", threshold_policy_name(data.policy),
                   format_double(m.thresholds.q33), format_double(m.thresholds.q66));
  r += fmt::format("features: {}\n", m.schema.size());
  for (FeatureGroup g : kAllGroups) r += fmt::format("  {}: {}\n", group_name(g), m.schema.count(g));
  for (Category c : kCategories) {
    const auto ci = static_cast<std::size_t>(c);
    const CategoryFitInfo& info = fit.info[ci];
    const CategoryModel& cm = m.model_for(c);
    r += fmt::format("\n[{}]\n", category_name(c));
    r += fmt::format("training rows: {}{}\n", info.n_train, info.merged_fallback ? " (merged training split)" : "");
    r += fmt::format("validation rows: {}\n", info.n_val);
    r += fmt::format("LR lambda: {}\n", format_double(info.chosen.lr.lambda));
    r += fmt::format("RF: trees {} max_depth {} min_leaf {} m_features {}\n", info.chosen.rf.n_trees,
                     info.chosen.rf.max_depth, info.chosen.rf.min_leaf, cm.bases.rf.m_features);
    r += fmt::format("XGB: rounds {} eta {} max_depth {} min_leaf {} subsample {}\n", info.chosen.xgb.rounds,
                     format_double(info.chosen.xgb.eta), info.chosen.xgb.max_depth, info.chosen.xgb.min_leaf,
                     format_double(info.chosen.xgb.subsample));
    r += fmt::format("base MAE ({}): LR {:.6f}  RF {:.6f}  XGB {:.6f}\n", info.oof_weights ? "out-of-fold" : "validation",
                     info.base_errors[0], info.base_errors[1], info.base_errors[2]);
    r += fmt::format("inverse-error weights: {}\n", weights_text(cm.fixed));
    r += fmt::format("adaptive alpha: {}\n", format_double(cm.adaptive_alpha));
    r += fmt::format("fixed weights: {}\n", weights_text(cm.weights));
    r += fmt::format("meta: lambda {}  intercept {:.6f}  LR {:.6f}  RF {:.6f}  XGB {:.6f}\n",
                     format_double(cm.meta.lambda), cm.meta.intercept, cm.meta.weights(0), cm.meta.weights(1),
                     cm.meta.weights(2));
    if (!std::isnan(info.val_mae[0])) {
      r += fmt::format("validation MAE: stacking {:.6f}  fixed {:.6f}\n", info.val_mae[0], info.val_mae[1]);
    }
  }
  if (!fit.warnings.empty()) {
    r += "\nwarnings:\n";
    for (const std::string& w : fit.warnings) r += "  " + w + "\n";
  }
  return r;
}

int cmd_featurize(const Context& ctx) {
  Prepared p = prepare_data(ctx, false);
  const FeatureSchema& schema = p.table.schema;
  std::vector<std::string> header{"id"};
  for (const FeatureEntry& e : schema.entries()) header.push_back(e.name);
  std::string csv = csv_line(header);
  for (std::size_t i = 0; i < p.data.records.size(); ++i) {
    std::vector<std::string> row{p.data.records[i].id};
    for (Eigen::Index j = 0; j < p.table.x.cols(); ++j) {
      const double v = p.table.x(static_cast<Eigen::Index>(i), j);
      row.push_back(std::isnan(v) ? std::string() : format_double(v));
    }
    csv += csv_line(row);
  }
  write(ctx, "features.csv", csv);
  write(ctx, "schema.txt", schema.to_text());
  ctx.out << fmt::format("featurized {} records x {} features into {}\n", p.data.records.size(), schema.size(),
                         ctx.config.output.string());
  return 0;
}

int cmd_train(const Context& ctx) {
  Prepared p = prepare_data(ctx);
  const PipelineFit fit = fit_and_warn(ctx, p);
  save_model_file(fit.model, ctx.config.output / "model.json");
  write(ctx, "split_assignment.csv", p.data.assignment_csv());
  write(ctx, "training_report.txt", training_report(fit, p.data));
  const std::vector<std::size_t> test = p.data.indices(Split::kTest);
  if (test.empty()) {
    ctx.warn("the test split is empty; no test metrics written");
  } else {
    const PipelineEval ev = evaluate_pipeline(fit.model, p.data.records, p.table, test);
    write_table(ctx, "metrics", ev.table());
    if (ctx.config.figures) write(ctx, "scatter.csv", ev.scatter(p.data.records).to_csv());
    ctx.out << ev.table().to_text();
  }
  ctx.out << fmt::format("model written to {}\n", (ctx.config.output / "model.json").string());
  return 0;
}

int cmd_predict(const Context& ctx) {
  const RunConfig& c = ctx.config;
  if (c.model.empty()) throw ConfigError("--model is required");
  if (c.input.empty() == c.smiles.empty()) throw ConfigError("give exactly one of --input or --smiles");
  const LengthLogDModel model = load_model_file(c.model);
  std::optional<EnsembleMode> mode;
  if (c.mode != "both") mode = parse_mode(c.mode);

  struct Query {
    std::size_t line = 0;
    std::string id;
    std::string smiles;
    ExternalValues external;
  };
  std::vector<Query> queries;
  if (!c.smiles.empty()) {
    queries.push_back({1, "query", c.smiles, c.external});
  } else {
    const CsvTable csv = parse_csv(read_text_file(c.input));
    std::optional<std::size_t> id_col, smiles_col;
    std::vector<std::size_t> ext_cols;
    for (std::size_t j = 0; j < csv.header.size(); ++j) {
      std::string h(trim(csv.header[j]));
      std::transform(h.begin(), h.end(), h.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      if (h == "id") {
        id_col = j;
      } else if (h == "smiles") {
        smiles_col = j;
      } else if (h != "logd" && h != "date") {
        ext_cols.push_back(j);
      }
    }
    if (!smiles_col) throw DataError("prediction input needs a smiles column");
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      const auto& row = csv.rows[i];
      Query q;
      q.line = csv.row_lines[i];
      q.id = id_col ? std::string(trim(row[*id_col])) : fmt::format("row{}", i + 1);
      q.smiles = std::string(trim(row[*smiles_col]));
      for (std::size_t j : ext_cols) {
        double v = 0.0;
        if (parse_double(row[j], v)) q.external[std::string(trim(csv.header[j]))] = v;
      }
      queries.push_back(std::move(q));
    }
  }

  std::string preds = csv_line({"id", "smiles_length", "category", "logd_pred", "LR", "RF", "XGB"});
  std::string errors = csv_line({"line", "id", "error"});
  std::size_t ok = 0;
  for (const Query& q : queries) {
    try {
      const Prediction pr = predict_logd(model, q.smiles, q.external, mode);
      preds += csv_line({q.id, std::to_string(pr.smiles_length), std::string(category_name(pr.category)),
                         format_double(pr.logd), format_double(pr.bases[0]), format_double(pr.bases[1]),
                         format_double(pr.bases[2])});
      ++ok;
    } catch (const DataError& e) {
      errors += csv_line({std::to_string(q.line), q.id, e.what()});
      ctx.err << fmt::format("error: {} (line {}): {}\n", q.id, q.line, e.what());
    }
  }
  write(ctx, "predictions.csv", preds);
  write(ctx, "prediction_errors.csv", errors);
  ctx.out << fmt::format("predicted {} of {} rows\n", ok, queries.size());
  if (ok == 0 && !queries.empty()) return 3;
  return 0;
}

int cmd_evaluate(const Context& ctx) {
  Prepared p = prepare_data(ctx);
  LengthLogDModel model;
  if (!ctx.config.model.empty()) {
    model = load_matching_model(ctx, p);
  } else {
    model = fit_and_warn(ctx, p).model;
  }
  const std::vector<std::size_t> test = p.data.indices(Split::kTest);
  if (test.empty()) throw DataError("the test split is empty; evaluation needs test ratio > 0");
  const PipelineEval ev = evaluate_pipeline(model, p.data.records, p.table, test);
  write_table(ctx, "metrics", ev.table());
  if (ctx.config.figures) write(ctx, "scatter.csv", ev.scatter(p.data.records).to_csv());
  const ComparisonResult cmp = run_baseline_comparison(p.data, p.table, ctx.config.pipeline(), model);
  write_table(ctx, "comparison", cmp.table());
  ctx.out << ev.table().to_text() << '\n' << cmp.table().to_text();
  return 0;
}

int cmd_cv(const Context& ctx) {
  Prepared p = prepare_data(ctx, false);
  CvOptions o;
  o.k = ctx.config.kfolds;
  o.repeats = ctx.config.repeats;
  o.seed = ctx.config.seed;
  o.val_fraction = ctx.config.cv_val_fraction;
  o.policy = ctx.config.thresholds_on;
  const CvResult r = cross_validate(p.data.records, p.table, ctx.config.pipeline(), o);
  for (const std::string& w : r.warnings) ctx.warn(w);
  write_table(ctx, "cv", r.table());
  ctx.out << r.table().to_text();
  return 0;
}

int cmd_ablate(const Context& ctx) {
  Prepared p = prepare_data(ctx);
  const PipelineConfig pc = ctx.config.pipeline();
  const PipelineFit fit = fit_and_warn(ctx, p);
  const AblationResult a = run_ablation(p.data, p.table, pc, ctx.config.presets, kLearnerKinds, &fit);
  write_table(ctx, "ablation", a.table());
  ctx.out << a.table().to_text();
  return 0;
}

int cmd_importance(const Context& ctx) {
  Prepared p = prepare_data(ctx);
  const LengthLogDModel model = ctx.config.model.empty() ? fit_and_warn(ctx, p).model : load_matching_model(ctx, p);
  const Category c = ctx.config.importance_category;
  const CategoryModel& cm = model.model_for(c);
  std::vector<std::size_t> rows = p.data.indices(Split::kVal, c);
  if (rows.empty()) {
    ctx.warn(fmt::format("no {} validation rows; permutation importance uses training rows", category_name(c)));
    rows = p.data.indices(Split::kTrain, c);
  }
  if (rows.empty()) throw DataError(fmt::format("no {} records to analyse", category_name(c)));
  const Eigen::MatrixXd x = apply_scaler(cm.scaler, select_features(p.table, model, rows));
  const Eigen::VectorXd y = targets(p.data.records, rows);
  const ImportanceReport rep = feature_importance(cm.bases.rf, model.schema, x, y, ctx.config.top_k,
                                                  derive_seed(ctx.config.seed, "importance"),
                                                  ctx.config.importance_shuffles);
  write_table(ctx, "importance_top", rep.top_table());
  write_table(ctx, "importance_shares", rep.share_table());
  ReportTable all;
  all.header = {"feature", "group", "source", "impurity", "permutation"};
  for (const ImportanceEntry& e : rep.features) {
    all.rows.push_back({e.name, std::string(group_name(e.group)), std::string(bucket_name(bucket_of(e.group))),
                        e.impurity, e.permutation});
  }
  write(ctx, "importance_all.csv", all.to_csv());
  ctx.out << rep.top_table().to_text() << '\n' << rep.share_table().to_text();
  return 0;
}

int cmd_synth(const Context& ctx) {
  write(ctx, "synthetic.csv", generate_synthetic_csv(ctx.config.synth));
  ctx.out << fmt::format("wrote {} synthetic records to {}\n", 3 * ctx.config.synth.per_band,
                         (ctx.config.output / "synthetic.csv").string());
  return 0;
}

struct Command {
  std::string_view name;
  std::string_view help;
  int (*run)(const Context&);
};

constexpr Command kCommands[] = {
    {"featurize", "write the feature matrix, schema sidecar and cleaning report", cmd_featurize},
    {"train", "fit the stratified ensemble and write the model and test metrics", cmd_train},
    {"predict", "predict logD for a CSV of SMILES or a single --smiles", cmd_predict},
    {"evaluate", "test-split metrics per category and the pooled baseline comparison", cmd_evaluate},
    {"cv", "repeated k-fold cross-validation of the whole pipeline", cmd_cv},
    {"ablate", "feature-group ablation grid", cmd_ablate},
    {"importance", "impurity and permutation importance of one category's forest", cmd_importance},
    {"synth", "write the synthetic pseudo-peptide dataset", cmd_synth},
};

int dispatch(const RunConfig& config, std::ostream& out, std::ostream& err) {
  for (const Command& cmd : kCommands) {
    if (cmd.name != config.command) continue;
    prepare_output(config);
    write_text_file(config.output / "config.txt", config.echo());
    return cmd.run(Context{config, out, err});
  }
  throw ConfigError(config.command.empty() ? "no command given (try --help)"
                                           : fmt::format("unknown command '{}'", config.command));
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Length-stratified peptide logD prediction", "lengthlogd"};
  app.require_subcommand(0, 1);
  Settings flags;
  std::string config_path;
  app.add_option("--config", config_path, "settings file of key = value lines; flags override it");
  for (const KeySpec& k : kKeys) {
    if (k.key == "command") continue;
    const std::string key(k.key);
    if (k.key == "figures" || k.key == "synth_shuffle") {
      app.add_flag_function(
          flag_of(k.key), [&flags, key](std::int64_t) { flags[key] = "true"; }, std::string(k.help));
      continue;
    }
    app.add_option_function<std::string>(
        flag_of(k.key), [&flags, key](const std::string& v) { flags[key] = v; },
        fmt::format("{} (default: {})", k.help, k.fallback.empty() ? "none" : k.fallback));
  }
  for (const Command& cmd : kCommands) app.add_subcommand(std::string(cmd.name), std::string(cmd.help))->fallthrough();

  std::vector<const char*> argv{"lengthlogd"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    Settings values;
    if (!config_path.empty()) values = parse_config_text(read_text_file(config_path));
    for (const auto& [k, v] : flags) values[k] = v;
    if (!app.get_subcommands().empty()) values["command"] = app.get_subcommands().front()->get_name();
    const RunConfig config = make_run_config(values);
    return dispatch(config, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lengthlogd
