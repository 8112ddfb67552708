#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "pixsub/cascade.hpp"
#include "pixsub/degrade.hpp"
#include "pixsub/metrics.hpp"
#include "pixsub/refine.hpp"

namespace pixsub {

// Flat key=value run configuration. Every key is declared up front (stage
// settings via the "stage<N>.<field>" pattern); anything else is rejected so
// typos fail loudly instead of silently using a default.
class RunConfig {
 public:
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"scale", "2"},
        {"seed", "0"},
        {"degrade.mode", "bicubic"},
        {"degrade.sigma", "0"},
        {"degrade.kernel_size", "0"},
        {"degrade.noise_level", "0"},
        {"cascade.T", "3"},
        {"cascade.kernel_sigma", "0"},
        {"cascade.kernel_size", "0"},
        {"cascade.shared_weights", "0"},
        {"net.features", "16"},
        {"net.blocks", "2"},
        {"train.lr", "1e-4"},
        {"train.beta1", "0.9"},
        {"train.beta2", "0.999"},
        {"train.eps", "1e-8"},
        {"train.epochs", "1"},
        {"train.patch", "48"},
        {"train.seed", "0"},
        {"train.loss", "l1"},
        {"train.lambda", "0.01"},
        {"eval.protocol", "y-channel-shaved"},
        {"eval.residual", "float"},
        {"io.input", ""},
        {"io.output", ""},
        {"io.hr", ""},
        {"io.lr", ""},
        {"io.sr", ""},
        {"io.out_dir", ""},
        {"io.weights", ""},
        {"io.log", ""},
        {"sr.trace", "0"},
        {"sr.check", "0"},
    };
    return d;
  }

  // "stage<N>.<field>" -> default for that field, or nullptr if not a stage key.
  static const char* stage_key_default(const std::string& key) {
    if (key.rfind("stage", 0) != 0) return nullptr;
    size_t i = 5;
    if (i >= key.size() || !std::isdigit(static_cast<unsigned char>(key[i]))) return nullptr;
    while (i < key.size() && std::isdigit(static_cast<unsigned char>(key[i]))) ++i;
    if (key[5] == '0') return nullptr;  // stages are numbered from 1
    if (i >= key.size() || key[i] != '.') return nullptr;
    const std::string field = key.substr(i + 1);
    if (field == "kind") return "bicubic";
    if (field == "iters") return "10";
    if (field == "step") return "1.0";
    if (field == "lambda_prior") return "0.01";
    if (field == "weights") return "";
    return nullptr;
  }

  static bool known_key(const std::string& key) {
    return defaults().count(key) != 0 || stage_key_default(key) != nullptr;
  }

  bool is_set(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  // key=value lines, '#' comments, blank lines ignored.
  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: " + t);
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + " has no key");
      set(key, value);
    }
  }

  std::string get(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    auto dit = defaults().find(key);
    if (dit != defaults().end()) return dit->second;
    if (const char* sd = stage_key_default(key)) return sd;
    throw ConfigError("unknown config key '" + key + "'");
  }

  int get_int(const std::string& key) const {
    const std::string v = get(key);
    char* end = nullptr;
    const long n = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
      throw ConfigError("config key '" + key + "' is not an integer: '" + v + "'");
    return static_cast<int>(n);
  }

  double get_double(const std::string& key) const {
    const std::string v = get(key);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size())
      throw ConfigError("config key '" + key + "' is not a number: '" + v + "'");
    return d;
  }

  bool get_bool(const std::string& key) const {
    const std::string v = get(key);
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
  }

  // Every declared key with its effective value, plus any stage keys that were
  // set. Parsing the output reproduces this configuration.
  std::string dump() const {
    std::ostringstream os;
    for (const auto& [key, dflt] : defaults()) {
      auto it = values_.find(key);
      os << key << "=" << (it != values_.end() ? it->second : dflt) << "\n";
    }
    for (const auto& [key, value] : values_)
      if (stage_key_default(key)) os << key << "=" << value << "\n";
    return os.str();
  }

  DegradeSpec degrade_spec() const {
    DegradeSpec spec;
    const std::string mode = get("degrade.mode");
    if (mode == "gaussian-decimate")
      spec.mode = DegradeMode::GaussianDecimate;
    else if (mode == "bicubic")
      spec.mode = DegradeMode::Bicubic;
    else
      throw ConfigError("degrade.mode must be gaussian-decimate or bicubic, got '" + mode + "'");
    spec.sigma = get_double("degrade.sigma");
    if (spec.sigma < 0.0) throw ConfigError("degrade.sigma must be >= 0");
    spec.kernel_size = get_int("degrade.kernel_size");
    spec.scale = ScaleFactor(get_int("scale"));
    spec.noise_level = get_double("degrade.noise_level");
    if (spec.noise_level < 0.0 || spec.noise_level > 0.1)
      throw ConfigError("degrade.noise_level must be in [0, 0.1]");
    return spec;
  }

  RefinerSpec stage_spec(int stage) const {
    const std::string p = "stage" + std::to_string(stage) + ".";
    RefinerSpec spec;
    const std::string kind = get(p + "kind");
    if (kind == "bicubic")
      spec.kind = RefinerKind::Bicubic;
    else if (kind == "ibp")
      spec.kind = RefinerKind::Ibp;
    else if (kind == "gradprior")
      spec.kind = RefinerKind::GradPrior;
    else if (kind == "toynet")
      spec.kind = RefinerKind::ToyNet;
    else
      throw ConfigError(p + "kind must be bicubic, ibp, gradprior or toynet, got '" + kind + "'");
    spec.iters = get_int(p + "iters");
    if (spec.iters < 1) throw ConfigError(p + "iters must be >= 1");
    spec.step = get_double(p + "step");
    if (spec.step <= 0.0) throw ConfigError(p + "step must be > 0");
    spec.lambda_prior = get_double(p + "lambda_prior");
    if (spec.lambda_prior < 0.0) throw ConfigError(p + "lambda_prior must be >= 0");
    spec.weights_path = get(p + "weights");
    return spec;
  }

  CascadeConfig cascade_config() const {
    CascadeConfig cfg;
    cfg.stages_count = get_int("cascade.T");
    if (cfg.stages_count < 1 || cfg.stages_count > 8)
      throw ConfigError("cascade.T must be in [1, 8]");
    cfg.degrade = degrade_spec();
    for (int t = 1; t <= cfg.stages_count; ++t) cfg.stages.push_back(stage_spec(t));
    cfg.kernel_sigma = get_double("cascade.kernel_sigma");
    if (cfg.kernel_sigma < 0.0) throw ConfigError("cascade.kernel_sigma must be >= 0");
    cfg.kernel_size = get_int("cascade.kernel_size");
    cfg.shared_weights = get_bool("cascade.shared_weights");
    cfg.net_features = get_int("net.features");
    if (cfg.net_features < 1) throw ConfigError("net.features must be >= 1");
    cfg.net_blocks = get_int("net.blocks");
    if (cfg.net_blocks < 0) throw ConfigError("net.blocks must be >= 0");
    return cfg;
  }

  TrainOptions train_options() const {
    TrainOptions opts;
    opts.lr = get_double("train.lr");
    if (opts.lr <= 0.0) throw ConfigError("train.lr must be > 0");
    opts.beta1 = get_double("train.beta1");
    opts.beta2 = get_double("train.beta2");
    if (opts.beta1 < 0.0 || opts.beta1 >= 1.0 || opts.beta2 < 0.0 || opts.beta2 >= 1.0)
      throw ConfigError("adam betas must be in [0, 1)");
    opts.eps = get_double("train.eps");
    if (opts.eps <= 0.0) throw ConfigError("train.eps must be > 0");
    opts.epochs = get_int("train.epochs");
    if (opts.epochs < 0) throw ConfigError("train.epochs must be >= 0");
    opts.seed = static_cast<std::uint64_t>(get_int("train.seed"));
    return opts;
  }

  EvalProtocol eval_protocol() const {
    const std::string p = get("eval.protocol");
    if (p == "y-channel-shaved") return EvalProtocol::YChannelShaved;
    if (p == "rgb-full") return EvalProtocol::RgbFull;
    throw ConfigError("eval.protocol must be y-channel-shaved or rgb-full, got '" + p + "'");
  }

 private:
  static std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace pixsub
