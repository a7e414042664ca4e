#include "roinet/runconfig.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "roinet/errors.hpp"

namespace roinet {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

double parse_float(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not true/false");
}

}  // namespace

GenConfig RunConfig::gen_config() const {
  GenConfig g;
  g.size = size;
  g.class_counts = {count_normal, count_blotch, count_alternaria};
  g.clutter = clutter;
  g.palette_overlap = palette_overlap;
  g.spots_min = spots_min;
  g.spots_max = spots_max;
  g.spot_radius_min = spot_radius_min;
  g.spot_radius_max = spot_radius_max;
  g.master_seed = seed;
  return g;
}

void RunConfig::validate() const {
  gen_config().validate();
  if (split_ratio <= 0.0 || split_ratio >= 1.0)
    throw ConfigError("split_ratio must lie strictly between 0 and 1");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("momentum must lie in [0,1)");
  if (epochs_roi < 0 || epochs_cls < 0 || epochs_e2e < 0)
    throw ConfigError("epoch counts must be non-negative");
  if (lr_roi < 0.0 || lr_cls < 0.0 || lr_e2e < 0.0)
    throw ConfigError("learning rates must be non-negative");
  if (class_weight_mode != "inverse" && class_weight_mode != "none")
    throw ConfigError("class_weight_mode must be 'inverse' or 'none'");
  if (gmm_components < 1) throw ConfigError("gmm_components must be positive");
  if (gmm_iterations < 1) throw ConfigError("gmm_iterations must be positive");
  if (svm_lambda <= 0.0) throw ConfigError("svm_lambda must be positive");
  if (svm_epochs < 1) throw ConfigError("svm_epochs must be positive");
  if (cluster_thresholds < 1)
    throw ConfigError("cluster_thresholds must be positive");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"size", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.size = static_cast<int>(parse_int(k, v)); }},
      {"count_normal", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.count_normal = static_cast<int>(parse_int(k, v)); }},
      {"count_blotch", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.count_blotch = static_cast<int>(parse_int(k, v)); }},
      {"count_alternaria", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.count_alternaria = static_cast<int>(parse_int(k, v)); }},
      {"clutter", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.clutter = parse_float(k, v); }},
      {"palette_overlap", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.palette_overlap = parse_float(k, v); }},
      {"spots_min", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.spots_min = static_cast<int>(parse_int(k, v)); }},
      {"spots_max", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.spots_max = static_cast<int>(parse_int(k, v)); }},
      {"spot_radius_min", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.spot_radius_min = parse_float(k, v); }},
      {"spot_radius_max", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.spot_radius_max = parse_float(k, v); }},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"split_ratio", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.split_ratio = parse_float(k, v); }},
      {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.batch_size = static_cast<int>(parse_int(k, v)); }},
      {"momentum", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.momentum = parse_float(k, v); }},
      {"epochs_roi", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.epochs_roi = static_cast<int>(parse_int(k, v)); }},
      {"lr_roi", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.lr_roi = parse_float(k, v); }},
      {"epochs_cls", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.epochs_cls = static_cast<int>(parse_int(k, v)); }},
      {"lr_cls", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.lr_cls = parse_float(k, v); }},
      {"epochs_e2e", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.epochs_e2e = static_cast<int>(parse_int(k, v)); }},
      {"lr_e2e", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.lr_e2e = parse_float(k, v); }},
      {"class_weight_mode", [](RunConfig& c, const std::string&, const std::string& v) {
         c.class_weight_mode = v; }},
      {"stage_b_ground_truth", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.stage_b_ground_truth = parse_bool(k, v); }},
      {"gmm_components", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.gmm_components = static_cast<int>(parse_int(k, v)); }},
      {"gmm_iterations", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.gmm_iterations = static_cast<int>(parse_int(k, v)); }},
      {"svm_lambda", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.svm_lambda = parse_float(k, v); }},
      {"svm_epochs", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.svm_epochs = static_cast<int>(parse_int(k, v)); }},
      {"cluster_thresholds", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.cluster_thresholds = static_cast<int>(parse_int(k, v)); }},
  };

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
    it->second(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string default_config_text() {
  RunConfig d;
  std::ostringstream os;
  os << "# Dataset generation\n";
  os << "size = " << d.size << "                    # image extent, multiple of 16\n";
  os << "count_normal = " << d.count_normal << "          # healthy samples\n";
  os << "count_blotch = " << d.count_blotch << "          # blotch-disease samples\n";
  os << "count_alternaria = " << d.count_alternaria << "      # alternaria-spot samples\n";
  os << "clutter = " << d.clutter << "               # distractor/blob density scale\n";
  os << "palette_overlap = " << d.palette_overlap << "       # 0..1 blotch-vs-leaf color overlap\n";
  os << "spots_min = " << d.spots_min << "             # spots per diseased leaf, lower bound\n";
  os << "spots_max = " << d.spots_max << "            # upper bound\n";
  os << "spot_radius_min = " << d.spot_radius_min << "   # spot radius, fraction of size\n";
  os << "spot_radius_max = " << d.spot_radius_max << "\n";
  os << "\n# Training protocol\n";
  os << "seed = " << d.seed << "               # master seed for everything\n";
  os << "split_ratio = " << d.split_ratio << "         # train fraction per class\n";
  os << "batch_size = " << d.batch_size << "\n";
  os << "momentum = " << d.momentum << "\n";
  os << "epochs_roi = " << d.epochs_roi << "           # segmentation pretraining\n";
  os << "lr_roi = " << d.lr_roi << "\n";
  os << "epochs_cls = " << d.epochs_cls << "           # classifier pretraining\n";
  os << "lr_cls = " << d.lr_cls << "\n";
  os << "epochs_e2e = " << d.epochs_e2e << "           # end-to-end fine-tuning\n";
  os << "lr_e2e = " << d.lr_e2e << "\n";
  os << "class_weight_mode = " << d.class_weight_mode
     << "  # pixel-loss weights: inverse | none\n";
  os << "stage_b_ground_truth = " << (d.stage_b_ground_truth ? "true" : "false")
     << "  # classifier pretraining on GT masks instead of predictions\n";
  os << "\n# Baselines\n";
  os << "gmm_components = " << d.gmm_components << "\n";
  os << "gmm_iterations = " << d.gmm_iterations << "\n";
  os << "svm_lambda = " << d.svm_lambda << "\n";
  os << "svm_epochs = " << d.svm_epochs << "\n";
  os << "cluster_thresholds = " << d.cluster_thresholds
     << "    # threshold sweep resolution\n";
  return os.str();
}

}  // namespace roinet
