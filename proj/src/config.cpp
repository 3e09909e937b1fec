// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "wbr/error.hpp"
#include "wbr/experiment.hpp"

namespace wbr {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMnistFiles[4] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                        "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};

/// Reads typed values from one table and rejects keys nobody asked for.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  std::string field(std::string_view key) const { return name_ + "." + std::string(key); }

  const toml::node* raw(std::string_view key) {
    seen_.insert(std::string(key));
    return table_ ? table_->get(key) : nullptr;
  }

  std::optional<std::int64_t> integer(std::string_view key) {
    const toml::node* n = raw(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::int64_t>()) return *v;
    throw ConfigError("expected an integer", field(key));
  }

  std::optional<std::size_t> count(std::string_view key) {
    auto v = integer(key);
    if (v && *v < 0) throw ConfigError("must be non-negative", field(key));
    return v ? std::optional<std::size_t>(static_cast<std::size_t>(*v)) : std::nullopt;
  }

  std::optional<double> number(std::string_view key) {
    const toml::node* n = raw(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<double>()) return *v;
    if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
    throw ConfigError("expected a number", field(key));
  }

  std::optional<std::string> string(std::string_view key) {
    const toml::node* n = raw(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::string>()) return *v;
    throw ConfigError("expected a string", field(key));
  }

  std::optional<bool> boolean(std::string_view key) {
    const toml::node* n = raw(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<bool>()) return *v;
    throw ConfigError("expected true or false", field(key));
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [key, _] : *table_) {
      if (!seen_.contains(std::string(key.str()))) {
        throw ConfigError("unknown key", field(key.str()));
      }
    }
  }

 private:
  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

fs::path resolve_input(const std::string& raw, const fs::path& base_dir) {
  const fs::path p(raw);
  if (p.is_absolute()) return p.lexically_normal();
  const fs::path local = (base_dir / p).lexically_normal();
  if (fs::exists(local)) return local;
  if (const char* root = std::getenv("WBR_DATA_DIR"); root && *root) {
    const fs::path from_env = (fs::path(root) / p).lexically_normal();
    if (fs::exists(from_env)) return from_env;
  }
  return local;
}

/// Default MNIST directory: <config dir>/mnist, else $WBR_DATA_DIR/mnist.
fs::path default_mnist_dir(const fs::path& base_dir) { return resolve_input("mnist", base_dir); }

/// "none" or a positive threshold.
std::optional<double> clip_threshold(Section& s, std::string_view key) {
  const toml::node* n = s.raw(key);
  if (!n) return std::nullopt;
  if (auto text = n->value_exact<std::string>()) {
    if (*text == "none") return std::nullopt;
  } else if (auto v = n->value<double>(); v && *v > 0.0 && std::isfinite(*v)) {
    return *v;
  }
  throw ConfigError("must be a positive number or \"none\"", s.field(key));
}

template <typename Value>
void set_dotted(toml::table& root, std::string_view key, Value&& value) {
  toml::table* table = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part(key.substr(start, dot == std::string_view::npos ? key.npos : dot - start));
    if (part.empty()) throw ConfigError("empty key component", "--set " + std::string(key));
    if (dot == std::string_view::npos) {
      table->insert_or_assign(part, std::forward<Value>(value));
      return;
    }
    if (!table->contains(part)) table->insert(part, toml::table{});
    table = table->get(part)->as_table();
    if (!table) throw ConfigError("is not a table", std::string(key.substr(0, dot)));
    start = dot + 1;
  }
}

void apply_override(toml::table& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("expected key=value, got '" + assignment + "'", "--set");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  try {
    toml::table parsed = toml::parse("v = " + text);
    if (const toml::node* v = parsed.get("v"); v && !v->is_table()) {
      set_dotted(root, key, *v);
      return;
    }
  } catch (const toml::parse_error&) {
  }
  set_dotted(root, key, text);
}

nlohmann::json json_from_toml(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = json_from_toml(v);
    return j;
  }
  if (const auto* a = node.as_array()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : *a) j.push_back(json_from_toml(v));
    return j;
  }
  if (auto v = node.value_exact<std::string>()) return *v;
  if (auto v = node.value_exact<std::int64_t>()) return *v;
  if (auto v = node.value_exact<double>()) return *v;
  if (auto v = node.value_exact<bool>()) return *v;
  throw ConfigError("unsupported TOML value type");
}

void append_toml(const nlohmann::json& j, toml::array& out);

void insert_toml(const std::string& key, const nlohmann::json& j, toml::table& out) {
  if (j.is_object()) {
    toml::table t;
    for (const auto& [k, v] : j.items()) insert_toml(k, v, t);
    out.insert_or_assign(key, std::move(t));
  } else if (j.is_array()) {
    toml::array a;
    for (const auto& v : j) append_toml(v, a);
    out.insert_or_assign(key, std::move(a));
  } else if (j.is_string()) {
    out.insert_or_assign(key, j.get<std::string>());
  } else if (j.is_boolean()) {
    out.insert_or_assign(key, j.get<bool>());
  } else if (j.is_number_integer()) {
    out.insert_or_assign(key, j.get<std::int64_t>());
  } else if (j.is_number_float()) {
    out.insert_or_assign(key, j.get<double>());
  } else if (!j.is_null()) {
    throw FormatError("cannot express JSON value of key '" + key + "' in TOML");
  }
}

void append_toml(const nlohmann::json& j, toml::array& out) {
  if (j.is_number_integer()) {
    out.push_back(j.get<std::int64_t>());
  } else if (j.is_number_float()) {
    out.push_back(j.get<double>());
  } else if (j.is_string()) {
    out.push_back(j.get<std::string>());
  } else if (j.is_boolean()) {
    out.push_back(j.get<bool>());
  } else {
    throw FormatError("only scalar arrays are supported in configs");
  }
}

toml::table to_table(const ExperimentConfig& cfg) {
  toml::table dataset;
  if (cfg.dataset.kind == DatasetSpec::Kind::kMnist) {
    dataset.insert("kind", "mnist");
    dataset.insert("train_images", cfg.dataset.train_images.string());
    dataset.insert("train_labels", cfg.dataset.train_labels.string());
    dataset.insert("test_images", cfg.dataset.test_images.string());
    dataset.insert("test_labels", cfg.dataset.test_labels.string());
  } else {
    dataset.insert("kind", "features");
    dataset.insert("train", cfg.dataset.train_features.string());
    dataset.insert("test", cfg.dataset.test_features.string());
  }
  dataset.insert("input_norm", std::string(to_string(cfg.dataset.input_norm)));

  toml::table scenario;
  scenario.insert("base", static_cast<std::int64_t>(cfg.base));
  scenario.insert("increment", static_cast<std::int64_t>(cfg.increment));
  if (cfg.order_seed) scenario.insert("order_seed", static_cast<std::int64_t>(*cfg.order_seed));

  toml::table model;
  model.insert("hidden_layers", static_cast<std::int64_t>(cfg.hidden_layers));
  model.insert("hidden_width", static_cast<std::int64_t>(cfg.hidden_width));

  toml::table train;
  auto put_clip = [&train](const char* key, const ClipPolicy& p) {
    if (auto t = p.threshold()) {
      train.insert(key, *t);
    } else {
      train.insert(key, "none");
    }
  };
  train.insert("lr", cfg.train.lr);
  train.insert("epochs", static_cast<std::int64_t>(cfg.train.epochs_per_task));
  train.insert("batch_size", static_cast<std::int64_t>(cfg.train.batch_size));
  train.insert("momentum", cfg.train.momentum);
  put_clip("alpha", cfg.train.clip_new);
  put_clip("beta", cfg.train.clip_memory);
  train.insert("clip_mode", std::string(to_string(cfg.clip_mode)));
  train.insert("importance", std::string(to_string(cfg.train.importance_mode)));
  train.insert("joint_loss", cfg.train.joint_loss);

  toml::table experiment;
  experiment.insert("method", std::string(to_string(cfg.method)));
  toml::array seeds;
  for (auto s : cfg.seeds) seeds.push_back(static_cast<std::int64_t>(s));
  experiment.insert("seeds", std::move(seeds));
  experiment.insert("output_dir", cfg.output_dir.string());
  experiment.insert("checkpoint", cfg.checkpoint);

  return toml::table{{"dataset", std::move(dataset)},
                     {"scenario", std::move(scenario)},
                     {"model", std::move(model)},
                     {"train", std::move(train)},
                     {"experiment", std::move(experiment)}};
}

ExperimentConfig from_table(const toml::table& root, const fs::path& base_dir) {
  static const std::set<std::string> kSections = {"dataset", "scenario", "model", "train",
                                                  "experiment"};
  for (const auto& [key, node] : root) {
    const std::string name(key.str());
    if (!kSections.contains(name)) throw ConfigError("unknown section", name);
    if (!node.is_table()) throw ConfigError("must be a table", name);
  }
  auto section = [&root](const char* name) { return Section(root[name].as_table(), name); };
  ExperimentConfig cfg;

  Section ds = section("dataset");
  const std::string kind = ds.string("kind").value_or("mnist");
  cfg.dataset.input_norm = InputNorm::kUnit;
  if (auto norm = ds.string("input_norm")) {
    if (*norm == "unit") {
      cfg.dataset.input_norm = InputNorm::kUnit;
    } else if (*norm == "standard") {
      cfg.dataset.input_norm = InputNorm::kStandard;
    } else {
      throw ConfigError("expected \"unit\" or \"standard\", got '" + *norm + "'",
                        "dataset.input_norm");
    }
  }
  if (kind == "mnist") {
    cfg.dataset.kind = DatasetSpec::Kind::kMnist;
    const fs::path dir = ds.string("dir") ? resolve_input(*ds.string("dir"), base_dir)
                                          : default_mnist_dir(base_dir);
    fs::path* targets[4] = {&cfg.dataset.train_images, &cfg.dataset.train_labels,
                            &cfg.dataset.test_images, &cfg.dataset.test_labels};
    const char* keys[4] = {"train_images", "train_labels", "test_images", "test_labels"};
    for (int i = 0; i < 4; ++i) {
      auto explicit_path = ds.string(keys[i]);
      *targets[i] = explicit_path ? resolve_input(*explicit_path, base_dir) : dir / kMnistFiles[i];
    }
  } else if (kind == "features") {
    cfg.dataset.kind = DatasetSpec::Kind::kFeatures;
    for (auto [key, target] : {std::pair{"train", &cfg.dataset.train_features},
                               std::pair{"test", &cfg.dataset.test_features}}) {
      auto p = ds.string(key);
      if (!p) throw ConfigError("required when kind = \"features\"", ds.field(key));
      *target = resolve_input(*p, base_dir);
    }
  } else {
    throw ConfigError("expected \"mnist\" or \"features\", got '" + kind + "'", "dataset.kind");
  }
  ds.finish();

  Section sc = section("scenario");
  cfg.base = sc.count("base").value_or(0);
  cfg.increment = sc.count("increment").value_or(1);
  if (cfg.increment == 0) throw ConfigError("must be at least 1", "scenario.increment");
  if (auto s = sc.count("order_seed")) cfg.order_seed = *s;
  sc.finish();

  Section md = section("model");
  cfg.hidden_layers = md.count("hidden_layers").value_or(0);
  cfg.hidden_width = md.count("hidden_width").value_or(32);
  if (cfg.hidden_width == 0) throw ConfigError("must be at least 1", "model.hidden_width");
  md.finish();

  Section tr = section("train");
  cfg.train.lr = tr.number("lr").value_or(cfg.train.lr);
  cfg.train.epochs_per_task = tr.count("epochs").value_or(cfg.train.epochs_per_task);
  cfg.train.batch_size = tr.count("batch_size").value_or(cfg.train.batch_size);
  cfg.train.momentum = tr.number("momentum").value_or(cfg.train.momentum);
  if (auto mode = tr.string("clip_mode")) {
    try {
      cfg.clip_mode = parse_clip_mode(*mode);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), "train.clip_mode");
    }
    if (cfg.clip_mode == ClipMode::kNone) {
      throw ConfigError("use alpha = \"none\" / beta = \"none\" to disable clipping",
                        "train.clip_mode");
    }
  }
  const auto alpha = clip_threshold(tr, "alpha");
  const auto beta = clip_threshold(tr, "beta");
  cfg.train.clip_new = alpha ? ClipPolicy(cfg.clip_mode, *alpha) : ClipPolicy::none();
  cfg.train.clip_memory = beta ? ClipPolicy(cfg.clip_mode, *beta) : ClipPolicy::none();
  if (auto imp = tr.string("importance")) {
    try {
      cfg.train.importance_mode = parse_importance_mode(*imp);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), "train.importance");
    }
  }
  cfg.train.joint_loss = tr.boolean("joint_loss").value_or(false);
  tr.finish();
  cfg.train.validate();

  Section ex = section("experiment");
  const std::string method = ex.string("method").value_or("wbr");
  if (method == "wbr") {
    cfg.method = Method::kWbr;
  } else if (method == "finetune") {
    cfg.method = Method::kFinetune;
  } else if (method == "simplecil") {
    cfg.method = Method::kSimpleCil;
  } else {
    throw ConfigError("expected \"wbr\", \"finetune\" or \"simplecil\", got '" + method + "'",
                      "experiment.method");
  }
  if (const toml::node* seeds = ex.raw("seeds")) {
    const toml::array* arr = seeds->as_array();
    if (!arr || arr->empty()) {
      throw ConfigError("expected a non-empty array of integers", "experiment.seeds");
    }
    cfg.seeds.clear();
    for (const auto& s : *arr) {
      auto v = s.value_exact<std::int64_t>();
      if (!v || *v < 0) throw ConfigError("seeds must be non-negative integers", "experiment.seeds");
      const auto seed = static_cast<std::uint64_t>(*v);
      if (std::find(cfg.seeds.begin(), cfg.seeds.end(), seed) != cfg.seeds.end()) {
        throw ConfigError("duplicate seed " + std::to_string(seed), "experiment.seeds");
      }
      cfg.seeds.push_back(seed);
    }
  }
  if (auto out = ex.string("output_dir")) {
    if (out->empty()) throw ConfigError("must not be empty", "experiment.output_dir");
    cfg.output_dir = *out;
  }
  cfg.checkpoint = ex.boolean("checkpoint").value_or(false);
  ex.finish();
  return cfg;
}

}  // namespace

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::kWbr: return "wbr";
    case Method::kFinetune: return "finetune";
    case Method::kSimpleCil: return "simplecil";
  }
  return "?";
}

std::string_view to_string(InputNorm norm) noexcept {
  return norm == InputNorm::kStandard ? "standard" : "unit";
}

TrainConfig ExperimentConfig::train_config(std::uint64_t seed) const {
  TrainConfig t = train;
  t.seed = seed;
  t.replay_enabled = method == Method::kWbr;
  return t;
}

std::vector<std::size_t> ExperimentConfig::layer_dims(std::size_t input_dim,
                                                      std::size_t num_classes) const {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden_layers, hidden_width);
  dims.push_back(num_classes);
  return dims;
}

ExperimentConfig parse_experiment_config(std::string_view toml_text, const fs::path& base_dir,
                                         std::span<const std::string> overrides) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str(), "config");
  }
  for (const auto& o : overrides) apply_override(root, o);
  return from_table(root, base_dir);
}

ExperimentConfig load_experiment_config(const fs::path& path,
                                        std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'", "--config");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str(), fs::absolute(path).parent_path(), overrides);
}

std::string to_toml(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << to_table(cfg) << "\n";
  return out.str();
}

nlohmann::json to_json(const ExperimentConfig& cfg) { return json_from_toml(to_table(cfg)); }

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("expected an object", "config");
  toml::table root;
  for (const auto& [k, v] : j.items()) insert_toml(k, v, root);
  return from_table(root, fs::current_path());
}

}  // namespace wbr
