#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snn/data.hpp"
#include "snn/neuron.hpp"
#include "snn/objectives.hpp"
#include "snn/tensor.hpp"

namespace snn {

/// Flat key=value configuration with dotted keys (lif.tau=2.0). '#' starts
/// a comment, blank lines are skipped, later assignments win. echo() is the
/// canonical serialization (sorted keys), used verbatim inside checkpoints.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& fallback) const;
  real get_real(const std::string& key, real fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws listing the offending key if anything is outside `known`.
  void require_known_keys(const std::vector<std::string>& known) const;

  std::string echo() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Everything one training run needs; defaults follow the common
/// experiment settings (Adam 1e-3 with betas 0.9/0.999, batch 64, cosine
/// annealing to 0, tau 2, u_th 1, u_reset 0, alpha 1).
struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t epochs = 10;
  std::size_t stop_after = 0;  // halt after this many epochs (0 = run all);
                               // the lr schedule still spans `epochs`
  std::size_t batch_size = 64;
  real lr = 1e-3;
  real min_lr = 0;
  std::size_t T = 10;
  LifParams lif{0.5, 1.0, 0.0, 1.0};
  LossConfig loss;
  real beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  std::vector<std::size_t> hidden = {64};
  bool net_norm = true;

  std::string data_kind = "synth";  // synth | csv | events
  std::string data_path, data_test_path;
  real split_ratio = 0.9;
  std::uint64_t split_seed = 1;
  SyntheticTaskSpec synth;
  std::size_t synth_count = 1200;
  real label_noise = 0;  // applied to the train split only
  std::size_t events_out_h = 48, events_out_w = 48;

  std::size_t diag_cadence = 0;  // epochs between Fisher profiles; 0 = off
  std::size_t fisher_samples = 32;
  bool metrics_timing = true;

  Config raw;  // the canonical key=value source, echoed into checkpoints
};

const std::vector<std::string>& train_config_keys();

/// Parse + validate a TrainConfig out of raw key=value settings. Unknown
/// keys are an error.
TrainConfig parse_train_config(const Config& cfg);

}  // namespace snn
