#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snn/rng.hpp"
#include "snn/tensor.hpp"

namespace snn {

struct EventRecord {
  long long t = 0;  // microseconds
  std::size_t x = 0, y = 0;
  int polarity = 0;  // 0 or 1
};

/// Sorted event stream with its sensor extents. Loaded from CSV with a
/// one-line header `width=W,height=H` followed by `t,x,y,p` records;
/// the loader sorts by timestamp and rejects out-of-extent coordinates
/// with the offending line number.
struct EventStream {
  std::vector<EventRecord> events;
  std::size_t width = 0, height = 0;
};

EventStream load_event_csv(const std::string& path);

/// Split the stream's time range into T equal blocks (the last one closed
/// on the right) and accumulate per-polarity spike counts, spatially
/// reduced onto out_h x out_w by block-sum pooling. Every in-bounds event
/// lands in exactly one output cell, so the tensor total equals the event
/// count. Result is [T,2,out_h,out_w].
Tensor bin_events(const EventStream& ev, std::size_t T, std::size_t out_h, std::size_t out_w);

/// Uniform container for both static and temporal data.
/// temporal: inputs [N,T,features...]; static: inputs [N,features...].
struct Dataset {
  Tensor inputs;
  std::vector<int> labels;
  std::size_t classes = 0;
  bool temporal = false;

  std::size_t count() const { return inputs.rank() ? inputs.shape()[0] : 0; }
  std::vector<std::size_t> feature_shape() const;
};

/// Image/spike-train CSV: one-line header
/// `classes=N,temporal=0|1,channels=C,height=H,width=W`, then rows
/// `label,p1,...,pk` with integer pixels in [0,255], k = C*H*W.
/// Pixels normalize to [0,1]; when temporal=1 the channel axis is the
/// time axis and features per step are H*W.
Dataset load_csv_images(const std::string& path);
void save_csv_images(const std::string& path, const Dataset& data);

/// Replicate a static sample at every timestep; the first layer's
/// affine + LIF performs the spike conversion downstream.
Tensor direct_encode(const Tensor& image, std::size_t T);

/// Bernoulli spike-train classification task. Each class elevates the
/// firing rate of its own neuron group inside a class-specific time
/// window; a uniform noise rate is added everywhere. Labels cycle
/// round-robin so classes stay balanced.
struct SyntheticTaskSpec {
  std::size_t classes = 10;
  std::size_t neurons = 40;
  std::size_t T = 10;
  real base_rate = 0.05;
  real peak_rate = 0.9;
  std::size_t window = 3;
  real noise_rate = 0.02;
  std::uint64_t seed = 1;

  void validate() const;
  /// Expected Bernoulli rate for (class, timestep, neuron), after clamping.
  real rate(std::size_t cls, std::size_t t, std::size_t neuron) const;
};

Dataset synth_generate(const SyntheticTaskSpec& spec, std::size_t count);

struct DatasetSplit {
  Dataset train, test;
};

/// Fisher-Yates permutation of 0..n-1 driven by the given generator.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

/// Seeded shuffle then prefix/suffix split; train gets round(N*ratio).
DatasetSplit split_dataset(const Dataset& data, real train_ratio, std::uint64_t seed);

/// Reassign round(fraction*N) labels (chosen by seeded shuffle) to a
/// uniformly random different class. Used to build noisy-label variants.
void inject_label_noise(Dataset& data, real fraction, Rng& rng);

/// Event dataset from an index CSV (`classes=N` header, then
/// `relative_path,label` rows). Each stream is binned to [T,2,H,W] and
/// normalized by its own peak count.
Dataset load_event_dataset(const std::string& index_path, std::size_t T, std::size_t out_h,
                           std::size_t out_w);

}  // namespace snn
