#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "logsy/encoder.hpp"
#include "logsy/log_ingest.hpp"
#include "logsy/objective.hpp"
#include "logsy/tokenizer.hpp"

namespace logsy {

struct OptimConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 100;
  std::size_t patience = 3;
  double min_rel_improvement = 1e-4;
  std::uint64_t seed = 0;
  /// Worker threads for per-sample gradients. 1 is the bit-reproducible
  /// reference mode; with more threads the loss agrees to ~1e-9.
  std::size_t threads = 1;
  LossConfig loss;

  void validate() const;
};

struct EncodedExample {
  TokenSequence seq;
  int y = 0;
};

struct BatchGradient {
  double loss = 0.0;  // mean over the batch
  ModelParams grads;  // d(mean loss)/d(params)
};

/// Exact reverse-mode gradient of the mean hypersphere loss over `batch`.
/// `dropout_seeds` is either empty (eval mode) or holds one seed per example.
BatchGradient compute_batch_gradient(const ModelParams& params,
                                     std::span<const EncodedExample> batch,
                                     const LossConfig& loss,
                                     std::span<const std::uint64_t> dropout_seeds = {},
                                     std::size_t threads = 1);

/// Mean loss only, same conventions as compute_batch_gradient.
double batch_loss(const ModelParams& params, std::span<const EncodedExample> batch,
                  const LossConfig& loss,
                  std::span<const std::uint64_t> dropout_seeds = {});

struct AdamState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const ModelParams& params);
};

/// Bias-corrected Adam with decoupled weight decay: every parameter is first
/// shrunk by (1 - lr * wd), then moved by the Adam delta.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const OptimConfig& cfg);

struct EpochStat {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double wall_time_s = 0.0;
};

struct TrainReport {
  std::vector<EpochStat> epochs;
  std::size_t stopped_epoch = 0;
  std::string params_checksum;  // crc32 of the float64 weight payload
  std::vector<std::string> warnings;

  /// One JSON object per line: {"epoch", "loss", "wall_time_s"}.
  std::string to_jsonl() const;
};

using EpochCallback = std::function<void(const EpochStat&)>;

/// Minibatch loop over already-encoded examples, updating `params` in place.
/// Stops after max_epochs or when the epoch loss fails to improve by
/// min_rel_improvement (relative) for `patience` consecutive epochs.
TrainReport optimize(ModelParams& params, std::span<const EncodedExample> examples,
                     const OptimConfig& cfg, const EpochCallback& on_epoch = {});

struct TrainResult {
  Vocabulary vocab;
  ModelParams params;
  TrainReport report;
  std::string dataset_digest;  // crc32 over the training texts and labels
};

/// Tokenizes the training set, builds the vocabulary from it, initializes a
/// model from optim.seed and optimizes it.
TrainResult train(const Dataset& dataset, const ModelConfig& model_cfg,
                  const OptimConfig& optim_cfg, const EpochCallback& on_epoch = {});

std::vector<EncodedExample> encode_examples(std::span<const TrainingExample> examples,
                                            const Vocabulary& vocab,
                                            std::size_t max_len);

struct FineTuneConfig {
  OptimConfig optim;
  std::size_t epochs = 5;
};

/// Continues optimization from trained params on a labeled set (target
/// normals with y=0 plus operator-labeled anomalies with y=1). Without any
/// y=1 example this is a no-op with a warning. `report`, if given, receives
/// the epoch log.
ModelParams fine_tune(const ModelParams& params, const Vocabulary& vocab,
                      const Dataset& labeled, const FineTuneConfig& cfg,
                      TrainReport* report = nullptr);

std::string params_checksum(const ModelParams& params);

}  // namespace logsy
