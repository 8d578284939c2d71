#pragma once

#include <optional>
#include <string>
#include <vector>

#include "snn/checkpoint.hpp"
#include "snn/config.hpp"
#include "snn/data.hpp"
#include "snn/diagnostics.hpp"
#include "snn/network.hpp"

namespace snn {

struct AdamConfig {
  real beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// Per-parameter first/second moment accumulators plus the shared step
/// counter. Laid out exactly like Parameters.
struct AdamState {
  std::vector<LayerParams> m, v;
  std::size_t step = 0;
};

AdamState init_adam(const Parameters& params);

/// Standard bias-corrected Adam update, applied in a fixed parameter order.
void adam_step(Parameters& params, const Gradients& grads, AdamState& state,
               const AdamConfig& cfg, real lr);

/// min_lr + (base_lr - min_lr) * (1 + cos(pi * epoch / total)) / 2.
real cosine_lr(std::size_t epoch, std::size_t total_epochs, real base_lr, real min_lr);

struct MetricsRecord {
  std::size_t epoch = 0;  // 1-based
  real lr = 0;
  real train_total = 0, train_ce = 0, train_mse = 0, train_reg = 0;
  real test_loss = 0, test_acc = 0;
  bool has_ic = false;
  real ic = 0;
  real seconds = 0;
};

std::string metrics_header();
std::string metrics_row(const MetricsRecord& r);

/// Time-major batch [T,B,flat_features] for the given sample indices;
/// static datasets are replicated across the T steps.
Tensor assemble_batch(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t T);
std::vector<int> gather_labels(const Dataset& data, const std::vector<std::size_t>& idx);

/// Dense LIF stack from config: hidden widths with optional tdBN, then the
/// non-spiking affine readout.
NetworkSpec make_dense_spec(const TrainConfig& cfg, std::size_t in_features,
                            std::size_t classes);

struct EpochStats {
  real total = 0, ce = 0, mse = 0, reg = 0;
};

/// One pass over the training set: shuffled batches (remainder kept),
/// forward in training mode, loss-specific output cotangents through the
/// backward pass merged with the penalty's weight gradient, then an Adam
/// update per batch. Returns sample-weighted epoch means. A non-finite
/// loss aborts with diagnostics.
EpochStats train_epoch(Model& model, const Dataset& train, const TrainConfig& cfg,
                       AdamState& opt, Rng& rng, real lr);

/// Test criterion: cross-entropy on time-averaged logits, plus accuracy of
/// argmax over those logits. Inference-mode normalization, no side effects.
std::pair<real, real> evaluate(const Model& model, const Dataset& test,
                               std::size_t batch_size);

struct TrainResult {
  std::vector<MetricsRecord> history;
  std::vector<FisherProfile> fisher;
  Model model;
};

/// The full training driver: builds (or resumes) the model, runs epochs
/// with cosine-annealed Adam, evaluates each epoch, tracks Fisher profiles
/// on the configured cadence, and persists config echo, metrics.csv,
/// fisher.csv and checkpoints under run_dir. Pass an empty run_dir to keep
/// everything in memory.
TrainResult run_training(const TrainConfig& cfg, const std::string& run_dir,
                         const std::optional<Checkpoint>& resume = std::nullopt);

/// Model/optimizer state to and from checkpoint arrays.
Checkpoint make_checkpoint(const TrainConfig& cfg, const Model& model, const AdamState& opt,
                           std::size_t epoch, std::uint64_t rng_state);
void restore_from_checkpoint(const Checkpoint& ck, Model& model, AdamState& opt);

/// Datasets per the config's data section: synthetic generation, CSV
/// loading or event binning, followed by the seeded split and optional
/// train-side label noise.
DatasetSplit build_datasets(const TrainConfig& cfg);

}  // namespace snn
