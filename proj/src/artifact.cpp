#include "lengthlogd/artifact.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "lengthlogd/csv.hpp"
#include "lengthlogd/errors.hpp"

namespace lengthlogd {

using nlohmann::json;

namespace {

constexpr std::string_view kFormatName = "lengthlogd-model";

json vec(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json ridge_json(const RidgeModel& m) {
  return {{"weights", vec(m.weights)}, {"intercept", m.intercept}, {"lambda", m.lambda}};
}

RidgeModel ridge_from(const json& j) {
  return {to_vec(j.at("weights")), j.at("intercept").get<double>(), j.at("lambda").get<double>()};
}

json tree_json(const RegressionTree& t) {
  return {{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left}, {"right", t.right},
          {"value", t.value},     {"gain", t.gain},           {"samples", t.samples}};
}

RegressionTree tree_from(const json& j, int n_features) {
  RegressionTree t;
  j.at("feature").get_to(t.feature);
  j.at("threshold").get_to(t.threshold);
  j.at("left").get_to(t.left);
  j.at("right").get_to(t.right);
  j.at("value").get_to(t.value);
  j.at("gain").get_to(t.gain);
  j.at("samples").get_to(t.samples);
  const std::size_t n = t.feature.size();
  if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.value.size() != n ||
      t.gain.size() != n || t.samples.size() != n) {
    throw DataError("tree node arrays are empty or of unequal length");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (t.feature[k] < 0) continue;
    const auto child_ok = [&](int c) { return c > static_cast<int>(k) && c < static_cast<int>(n); };
    if (t.feature[k] >= n_features || !child_ok(t.left[k]) || !child_ok(t.right[k])) {
      throw DataError(fmt::format("tree node {} has an out-of-range feature or child", k));
    }
  }
  return t;
}

json trees_json(const std::vector<RegressionTree>& trees) {
  json arr = json::array();
  for (const auto& t : trees) arr.push_back(tree_json(t));
  return arr;
}

std::vector<RegressionTree> trees_from(const json& j, int n_features) {
  std::vector<RegressionTree> out;
  for (const auto& t : j) out.push_back(tree_from(t, n_features));
  return out;
}

json weights_json(const FixedWeights& w) { return json::array({w.lr, w.rf, w.xgb}); }

FixedWeights weights_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw DataError("ensemble weights must have three entries");
  return {v[0], v[1], v[2]};
}

json category_json(const CategoryModel& m) {
  return {{"category", category_name(m.category)},
          {"mode", mode_name(m.mode)},
          {"scaler", {{"mean", vec(m.scaler.mean)}, {"scale", vec(m.scaler.scale)}}},
          {"lr", ridge_json(m.bases.lr)},
          {"rf", {{"n_features", m.bases.rf.n_features}, {"m_features", m.bases.rf.m_features},
                  {"trees", trees_json(m.bases.rf.trees)}}},
          {"xgb", {{"base_score", m.bases.xgb.base_score}, {"eta", m.bases.xgb.eta},
                   {"n_features", m.bases.xgb.n_features}, {"trees", trees_json(m.bases.xgb.trees)}}},
          {"meta", ridge_json(m.meta)},
          {"fixed_weights", weights_json(m.fixed)},
          {"adaptive_alpha", m.adaptive_alpha},
          {"weights", weights_json(m.weights)}};
}

CategoryModel category_from(const json& j, int p) {
  CategoryModel m;
  m.category = parse_category(j.at("category").get<std::string>());
  m.mode = parse_mode(j.at("mode").get<std::string>());
  m.scaler.mean = to_vec(j.at("scaler").at("mean"));
  m.scaler.scale = to_vec(j.at("scaler").at("scale"));
  m.bases.lr = ridge_from(j.at("lr"));
  const json& rf = j.at("rf");
  m.bases.rf.n_features = rf.at("n_features").get<int>();
  m.bases.rf.m_features = rf.at("m_features").get<int>();
  m.bases.rf.trees = trees_from(rf.at("trees"), p);
  const json& xgb = j.at("xgb");
  m.bases.xgb.base_score = xgb.at("base_score").get<double>();
  m.bases.xgb.eta = xgb.at("eta").get<double>();
  m.bases.xgb.n_features = xgb.at("n_features").get<int>();
  m.bases.xgb.trees = trees_from(xgb.at("trees"), p);
  m.meta = ridge_from(j.at("meta"));
  m.fixed = weights_from(j.at("fixed_weights"));
  m.adaptive_alpha = j.at("adaptive_alpha").get<double>();
  m.weights = weights_from(j.at("weights"));
  if (m.scaler.mean.size() != p || m.scaler.scale.size() != p || m.bases.lr.weights.size() != p ||
      m.bases.rf.n_features != p || m.bases.xgb.n_features != p) {
    throw DataError(fmt::format("category {} does not match the {}-column schema", category_name(m.category), p));
  }
  if (m.meta.weights.size() != 3) throw DataError("meta-learner must have three weights");
  if (m.bases.rf.trees.empty()) throw DataError("forest has no trees");
  return m;
}

}  // namespace

std::string save_model(const LengthLogDModel& model) {
  json entries = json::array();
  for (const FeatureEntry& e : model.schema.entries()) entries.push_back({e.name, group_name(e.group)});
  json imputation = json::object();
  for (const auto& [name, v] : model.imputation) imputation[name] = v;
  json categories = json::array();
  for (const CategoryModel& c : model.categories) categories.push_back(category_json(c));
  const json doc = {
      {"format", kFormatName},
      {"version", LengthLogDModel::kFormatVersion},
      {"schema",
       {{"morgan_radius", model.schema.morgan_radius()},
        {"morgan_bits", model.schema.morgan_bits()},
        {"entries", entries}}},
      {"thresholds", {{"q33", model.thresholds.q33}, {"q66", model.thresholds.q66}}},
      {"impute_missing", model.impute_missing},
      {"imputation", imputation},
      {"metadata",
       {{"seed", model.metadata.seed},
        {"dataset_fingerprint", model.metadata.dataset_fingerprint},
        {"n_records", model.metadata.n_records},
        {"config", model.metadata.config_echo}}},
      {"categories", categories}};
  return doc.dump(1) + "\n";
}

LengthLogDModel load_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("model file is not valid JSON: {}", e.what()));
  }
  try {
    if (doc.at("format").get<std::string>() != kFormatName) throw DataError("not a lengthlogd model file");
    const int version = doc.at("version").get<int>();
    if (version != LengthLogDModel::kFormatVersion) {
      throw DataError(fmt::format("unsupported model format version {} (this build reads {})", version,
                                  LengthLogDModel::kFormatVersion));
    }
    LengthLogDModel m;
    const json& schema = doc.at("schema");
    std::vector<FeatureEntry> entries;
    for (const auto& e : schema.at("entries")) {
      entries.push_back({e.at(0).get<std::string>(), parse_group(e.at(1).get<std::string>())});
    }
    m.schema = FeatureSchema(std::move(entries), schema.at("morgan_radius").get<int>(), schema.at("morgan_bits").get<int>());
    m.thresholds = {doc.at("thresholds").at("q33").get<double>(), doc.at("thresholds").at("q66").get<double>()};
    m.impute_missing = doc.at("impute_missing").get<bool>();
    for (const auto& [name, v] : doc.at("imputation").items()) m.imputation.emplace(name, v.get<double>());
    const json& meta = doc.at("metadata");
    m.metadata.seed = meta.at("seed").get<std::uint64_t>();
    m.metadata.dataset_fingerprint = meta.at("dataset_fingerprint").get<std::string>();
    m.metadata.n_records = meta.at("n_records").get<std::size_t>();
    m.metadata.config_echo = meta.at("config").get<std::string>();
    const json& cats = doc.at("categories");
    if (cats.size() != 3) throw DataError("model must hold exactly three category models");
    const int p = static_cast<int>(m.schema.size());
    for (std::size_t i = 0; i < 3; ++i) {
      CategoryModel c = category_from(cats.at(i), p);
      if (c.category != kCategories[i]) throw DataError("category models are out of order");
      m.categories[i] = std::move(c);
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed model file: {}", e.what()));
  }
}

void save_model_file(const LengthLogDModel& model, const std::filesystem::path& path) {
  write_text_file(path, save_model(model));
}

LengthLogDModel load_model_file(const std::filesystem::path& path) { return load_model(read_text_file(path)); }

}  // namespace lengthlogd
