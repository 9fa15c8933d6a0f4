#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lengthlogd/dataset.hpp"
#include "lengthlogd/ensemble.hpp"
#include "lengthlogd/evalsuite.hpp"
#include "lengthlogd/synthetic.hpp"

namespace lengthlogd {

/// Raw `key -> value` settings as read from a config file or flags.
using Settings = std::map<std::string, std::string, std::less<>>;

/// Every setting key, in echo order. Flags are the keys with '_' written
/// as '-', e.g. thresholds_on <-> --thresholds-on.
std::span<const std::string_view> config_keys();
/// Default value text of a key.
std::string_view config_default(std::string_view key);

/// `key = value` lines; blank lines and lines starting with '#' are
/// skipped. Throws ConfigError on malformed lines or unknown keys.
Settings parse_config_text(std::string_view text);

struct RunConfig {
  std::string command;
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path model;
  std::string smiles;
  ExternalValues external;  // for a single --smiles
  std::uint64_t seed = 0;
  SplitRatios ratios;
  ThresholdPolicy thresholds_on = ThresholdPolicy::kTrain;
  std::string mode = "stacking";  // stacking, fixed or both
  double alpha = 1.5;
  int kfolds = 5;
  int repeats = 3;
  double cv_val_fraction = 0.15;
  std::vector<AblationPreset> presets;
  std::size_t top_k = 20;
  Category importance_category = Category::kLong;
  int importance_shuffles = 10;
  MissingPolicy missing = MissingPolicy::kRejectColumn;
  SchemaOptions schema;
  BaseGrids grids;
  std::vector<double> meta_lambdas;
  SyntheticOptions synth;
  bool figures = false;

  Settings settings;  // effective values of every key, defaults included

  /// `key = value` for every key. Without paths, the I/O keys are left out
  /// (that form is stored in model artifacts).
  std::string echo(bool with_paths = true) const;
  PipelineConfig pipeline() const;
};

/// Defaults overlaid with `values`, then validated. Throws ConfigError.
RunConfig make_run_config(const Settings& values);

/// Entry point: `lengthlogd <command> [flags]` or `lengthlogd --config FILE`.
/// Returns the process exit code: 0 ok, 1 internal error, 2 configuration,
/// 3 data, 4 I/O.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace lengthlogd
