#include "mtl/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mtl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || *end != '\0' || errno == ERANGE) throw ConfigError("key '" + key + "': '" + t + "' is not a number");
  return v;
}

long to_long(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (t.empty() || *end != '\0' || errno == ERANGE) throw ConfigError("key '" + key + "': '" + t + "' is not an integer");
  return v;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.values_.count(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const std::string* ConfigFile::find(const std::string& key) const {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string ConfigFile::get(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  return v ? to_double(key, *v) : fallback;
}

long ConfigFile::get_int(const std::string& key, long fallback) const {
  const auto* v = find(key);
  return v ? to_long(key, *v) : fallback;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("key '" + key + "': '" + *v + "' is not a boolean");
}

std::vector<std::string> ConfigFile::get_list(const std::string& key, const std::vector<std::string>& fallback) const {
  const auto* v = find(key);
  return v ? split(*v) : fallback;
}

std::vector<double> ConfigFile::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split(*v)) out.push_back(to_double(key, item));
  return out;
}

std::vector<long> ConfigFile::get_ints(const std::string& key, const std::vector<long>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<long> out;
  for (const auto& item : split(*v)) out.push_back(to_long(key, item));
  return out;
}

std::vector<std::string> ConfigFile::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) out.push_back(k);
  }
  return out;
}

std::string ConfigFile::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

HydraSpec ExperimentConfig::network() const {
  HydraSpec spec;
  spec.backbone = backbone;
  spec.slope = slope;
  for (const auto& task : data.tasks) {
    std::vector<Index> head{backbone.back()};
    head.insert(head.end(), head_hidden.begin(), head_hidden.end());
    head.push_back(task.def.output_width());
    spec.heads.push_back(std::move(head));
  }
  return spec;
}

HydraSpec ExperimentConfig::single_task_network(int task) const {
  HydraSpec full = network();
  HydraSpec spec;
  spec.backbone = full.backbone;
  spec.slope = full.slope;
  spec.heads.push_back(full.heads.at(static_cast<std::size_t>(task)));
  return spec;
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> kSuites{"landscape", "invariance", "gradsim", "synth-mtl", "ood"};
  if (!suite.empty() && !kSuites.count(suite)) {
    throw ConfigError("unknown suite '" + suite + "' (landscape | invariance | gradsim | synth-mtl | ood)");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (lrs.empty()) throw ConfigError("lr must not be empty");
  for (double lr : lrs) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be > 0");
  }
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (methods.empty() || optimizers.empty()) throw ConfigError("methods and optimizers must not be empty");
  if (backbone.size() < 2) throw ConfigError("net.backbone needs at least an input and an output width");
  if (backbone.front() != data.input_dim) {
    throw ConfigError("net.backbone input width " + std::to_string(backbone.front()) + " differs from data.input_dim " +
                      std::to_string(data.input_dim));
  }
  if (probe_every < 1) throw ConfigError("probe_every must be >= 1");
  if (max_items < 2) throw ConfigError("max_items must be >= 2");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  if (trajectory_stride < 1) throw ConfigError("trajectory_stride must be >= 1");
  for (int s : severities) {
    if (s < 1 || s > 5) throw ConfigError("severities must lie in 1..5");
  }
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_experiment(const ConfigFile& file) {
  ExperimentConfig c;
  c.suite = file.get("suite", "");
  c.methods = file.get_list("methods", c.methods);
  c.optimizers = file.get_list("optimizers", c.optimizers);
  c.hyper.beta1 = file.get_double("beta1", c.hyper.beta1);
  c.hyper.beta2 = file.get_double("beta2", c.hyper.beta2);
  c.hyper.eps = file.get_double("eps", c.hyper.eps);
  c.hyper.momentum = file.get_double("momentum", c.hyper.momentum);
  c.cagrad_c = file.get_double("cagrad_c", c.cagrad_c);
  c.lrs = file.get_doubles("lr", c.lrs);
  c.budget = file.get_int("budget", c.budget);
  c.batch_size = file.get_int("batch_size", c.batch_size);
  c.seeds.clear();
  for (long s : file.get_ints("seeds", {0})) {
    if (s < 0) throw ConfigError("seeds must be non-negative");
    c.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  c.backbone.clear();
  for (long w : file.get_ints("net.backbone", {8, 32, 32})) c.backbone.push_back(w);
  c.head_hidden.clear();
  for (long w : file.get_ints("net.head_hidden", {})) c.head_hidden.push_back(w);
  c.slope = file.get_double("net.slope", c.slope);

  c.data.input_dim = file.get_int("data.input_dim", c.backbone.empty() ? 8 : c.backbone.front());
  c.data.train_size = file.get_int("data.train", c.data.train_size);
  c.data.val_size = file.get_int("data.val", c.data.val_size);
  c.data.test_size = file.get_int("data.test", c.data.test_size);
  const auto kinds = file.get_list("data.tasks", {"regression", "regression"});
  const auto task_scales = file.get_doubles("data.scales", std::vector<double>(kinds.size(), 1.0));
  const auto noise = file.get_doubles("data.noise", std::vector<double>(kinds.size(), 0.0));
  const auto classes = file.get_ints("data.classes", std::vector<long>(kinds.size(), 3));
  const auto loss_scales = file.get_doubles("data.loss_scales", std::vector<double>(kinds.size(), 1.0));
  if (task_scales.size() != kinds.size() || noise.size() != kinds.size() || classes.size() != kinds.size() ||
      loss_scales.size() != kinds.size()) {
    throw ConfigError("data.scales, data.noise, data.classes and data.loss_scales need one entry per task in data.tasks");
  }
  c.data.tasks.clear();
  for (std::size_t t = 0; t < kinds.size(); ++t) {
    SyntheticTask task;
    task.def.kind = parse_task_kind(kinds[t]);
    task.def.classes = task.def.kind == TaskKind::kRegressionL1 ? 1 : static_cast<int>(classes[t]);
    task.def.loss_scale = loss_scales[t];
    task.scale = task_scales[t];
    task.noise = noise[t];
    c.data.tasks.push_back(task);
  }
  c.out_dir = file.get("out", c.out_dir);

  c.tolerance = file.get_double("landscape.tolerance", c.tolerance);
  c.trajectory_stride = file.get_int("landscape.trajectory_stride", c.trajectory_stride);
  c.invariance_cases = file.get_list("invariance.cases", c.invariance_cases);
  c.backbone_modes = file.get_list("invariance.backbone", c.backbone_modes);
  c.scales = file.get_doubles("invariance.scales", c.scales);
  c.rlw_weights = file.get_doubles("invariance.rlw_weights", c.rlw_weights);
  c.probe_every = file.get_int("gradsim.probe_every", c.probe_every);
  c.max_items = static_cast<std::size_t>(file.get_int("gradsim.max_items", static_cast<long>(c.max_items)));
  c.batch_mean = file.get_bool("gradsim.batch_mean", c.batch_mean);
  c.stl_optimizer = file.get("stl.optimizer", c.stl_optimizer);
  c.stl_lr = file.get_double("stl.lr", c.stl_lr);
  c.corruptions = file.get_list("ood.corruptions", c.corruptions);
  c.severities.clear();
  for (long s : file.get_ints("ood.severities", {1, 2, 3, 4, 5})) c.severities.push_back(static_cast<int>(s));
  c.finetune_epochs = file.get_int("ood.finetune_epochs", c.finetune_epochs);

  const auto unused = file.unused_keys();
  if (!unused.empty()) {
    std::string msg = "unknown config key(s):";
    for (const auto& k : unused) msg += " '" + k + "'";
    throw ConfigError(msg);
  }
  c.source = file;
  c.validate();
  return c;
}

}  // namespace mtl
