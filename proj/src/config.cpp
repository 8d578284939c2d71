#include "snn/config.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "snn/io.hpp"

namespace snn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::string& path) { return parse(read_file(path)); }

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

real Config::get_real(const std::string& key, real fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_real(it->second, "config key " + key);
}

long long Config::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_int(it->second, "config key " + key);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config key " + key + ": expected true/false, got '" + it->second +
                           "'");
}

void Config::require_known_keys(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::runtime_error("unknown config key: " + key);
  }
}

std::string Config::echo() const {
  std::ostringstream os;
  for (const auto& [key, value] : values_) os << key << '=' << value << '\n';
  return os.str();
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "seed", "epochs", "stop_after", "batch_size", "lr", "min_lr", "T",
      "lif.tau", "lif.u_th", "lif.u_reset", "lif.alpha",
      "loss.kind", "loss.eta", "loss.mu", "loss.lambda", "loss.delta", "loss.epsilon",
      "loss.phi",
      "adam.beta1", "adam.beta2", "adam.eps",
      "net.hidden", "net.norm",
      "data.kind", "data.path", "data.test_path", "data.split_ratio", "data.split_seed",
      "synth.classes", "synth.neurons", "synth.base_rate", "synth.peak_rate", "synth.window",
      "synth.noise", "synth.count", "synth.seed", "synth.label_noise",
      "events.height", "events.width",
      "diag.cadence", "diag.fisher_samples",
      "metrics.timing",
  };
  return keys;
}

TrainConfig parse_train_config(const Config& cfg) {
  cfg.require_known_keys(train_config_keys());
  TrainConfig tc;
  tc.raw = cfg;

  tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  tc.epochs = static_cast<std::size_t>(cfg.get_int("epochs", 10));
  tc.stop_after = static_cast<std::size_t>(cfg.get_int("stop_after", 0));
  tc.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", 64));
  tc.lr = cfg.get_real("lr", real(1e-3));
  tc.min_lr = cfg.get_real("min_lr", 0);
  tc.T = static_cast<std::size_t>(cfg.get_int("T", 10));
  if (tc.epochs == 0 || tc.batch_size == 0 || tc.T == 0)
    throw std::runtime_error("config: epochs, batch_size and T must be positive");

  const real tau = cfg.get_real("lif.tau", real(2.0));
  if (!(tau >= 1)) throw std::runtime_error("config: lif.tau must be >= 1");
  tc.lif.gamma = real(1) / tau;
  tc.lif.u_th = cfg.get_real("lif.u_th", real(1.0));
  tc.lif.u_reset = cfg.get_real("lif.u_reset", real(0.0));
  tc.lif.alpha = cfg.get_real("lif.alpha", real(1.0));
  tc.lif.validate();

  const std::string kind = cfg.get_str("loss.kind", "trt");
  if (kind == "sdt_ce") tc.loss.kind = LossKind::SdtCe;
  else if (kind == "sdt_mse") tc.loss.kind = LossKind::SdtMse;
  else if (kind == "tet") tc.loss.kind = LossKind::Tet;
  else if (kind == "trt") tc.loss.kind = LossKind::Trt;
  else throw std::runtime_error("config: loss.kind must be sdt_ce|sdt_mse|tet|trt");
  tc.loss.eta = cfg.get_real("loss.eta", real(0.05));
  tc.loss.mu = cfg.get_real("loss.mu", real(0.0));
  tc.loss.lambda = cfg.get_real("loss.lambda", real(1e-5));
  tc.loss.delta = cfg.get_real("loss.delta", real(0.25));
  tc.loss.epsilon = cfg.get_real("loss.epsilon", real(1e-5));
  tc.loss.phi = cfg.get_real("loss.phi", real(0.0));
  tc.loss.validate();

  tc.beta1 = cfg.get_real("adam.beta1", real(0.9));
  tc.beta2 = cfg.get_real("adam.beta2", real(0.999));
  tc.adam_eps = cfg.get_real("adam.eps", real(1e-8));

  tc.hidden.clear();
  {
    std::istringstream hs(cfg.get_str("net.hidden", "64"));
    std::string tok;
    while (std::getline(hs, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      const long long w = parse_int(tok, "config key net.hidden");
      if (w <= 0) throw std::runtime_error("config: net.hidden entries must be positive");
      tc.hidden.push_back(static_cast<std::size_t>(w));
    }
  }
  tc.net_norm = cfg.get_bool("net.norm", true);

  tc.data_kind = cfg.get_str("data.kind", "synth");
  if (tc.data_kind != "synth" && tc.data_kind != "csv" && tc.data_kind != "events")
    throw std::runtime_error("config: data.kind must be synth|csv|events");
  tc.data_path = cfg.get_str("data.path", "");
  tc.data_test_path = cfg.get_str("data.test_path", "");
  tc.split_ratio = cfg.get_real("data.split_ratio", real(0.9));
  tc.split_seed = static_cast<std::uint64_t>(cfg.get_int("data.split_seed",
                                                         static_cast<long long>(tc.seed)));

  tc.synth.classes = static_cast<std::size_t>(cfg.get_int("synth.classes", 10));
  tc.synth.neurons = static_cast<std::size_t>(cfg.get_int("synth.neurons", 40));
  tc.synth.T = tc.T;
  tc.synth.base_rate = cfg.get_real("synth.base_rate", real(0.05));
  tc.synth.peak_rate = cfg.get_real("synth.peak_rate", real(0.9));
  tc.synth.window = static_cast<std::size_t>(cfg.get_int("synth.window", 3));
  tc.synth.noise_rate = cfg.get_real("synth.noise", real(0.02));
  tc.synth.seed = static_cast<std::uint64_t>(cfg.get_int("synth.seed",
                                                         static_cast<long long>(tc.seed)));
  tc.synth_count = static_cast<std::size_t>(cfg.get_int("synth.count", 1200));
  tc.label_noise = cfg.get_real("synth.label_noise", real(0.0));

  tc.events_out_h = static_cast<std::size_t>(cfg.get_int("events.height", 48));
  tc.events_out_w = static_cast<std::size_t>(cfg.get_int("events.width", 48));

  tc.diag_cadence = static_cast<std::size_t>(cfg.get_int("diag.cadence", 0));
  tc.fisher_samples = static_cast<std::size_t>(cfg.get_int("diag.fisher_samples", 32));
  tc.metrics_timing = cfg.get_bool("metrics.timing", true);
  return tc;
}

}  // namespace snn
