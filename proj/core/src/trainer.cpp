#include "logsy/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>
#include <type_traits>

#include <json.hpp>

#include "tensor_bytes.hpp"

namespace logsy {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

template <typename Params>
auto tensors_of(Params& p) {
  using Ptr = std::conditional_t<std::is_const_v<Params>, const Matrix*, Matrix*>;
  std::vector<Ptr> out;
  p.for_each_tensor([&out](const std::string&, auto& m) { out.push_back(&m); });
  return out;
}

void warn(TrainReport* report, const std::string& message) {
  std::cerr << "warning: " << message << '\n';
  if (report) report->warnings.push_back(message);
}

struct PartialGradient {
  double loss_sum = 0.0;
  ModelParams grads;
};

void accumulate_range(const ModelParams& params,
                      std::span<const EncodedExample* const> batch,
                      std::span<const std::uint64_t> seeds, std::size_t begin,
                      std::size_t end, double scale, const LossConfig& loss,
                      PartialGradient& out) {
  for (std::size_t i = begin; i < end; ++i) {
    const auto& ex = *batch[i];
    std::optional<std::uint64_t> seed;
    if (!seeds.empty()) seed = seeds[i];
    const ForwardTrace trace = trace_forward(ex.seq, params, seed);
    out.loss_sum += sample_loss(trace.z, ex.y, loss);
    const Vector dz = sample_loss_gradient(trace.z, ex.y, loss) * scale;
    backward(trace, params, dz, out.grads);
  }
}

BatchGradient batch_gradient_impl(const ModelParams& params,
                                  std::span<const EncodedExample* const> batch,
                                  const LossConfig& loss,
                                  std::span<const std::uint64_t> seeds,
                                  std::size_t threads) {
  if (batch.empty()) throw std::invalid_argument("batch gradient: empty batch");
  if (!seeds.empty() && seeds.size() != batch.size()) {
    throw std::invalid_argument("batch gradient: one dropout seed per example required");
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, batch.size());

  std::vector<PartialGradient> parts(workers);
  for (auto& p : parts) p.grads = params.zeros_like();

  if (workers == 1) {
    accumulate_range(params, batch, seeds, 0, batch.size(), scale, loss, parts[0]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(batch.size(), w * chunk);
      const std::size_t end = std::min(batch.size(), begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          accumulate_range(params, batch, seeds, begin, end, scale, loss, parts[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  BatchGradient result;
  result.grads = std::move(parts[0].grads);
  double loss_sum = parts[0].loss_sum;
  if (workers > 1) {
    auto total = tensors_of(result.grads);
    for (std::size_t w = 1; w < workers; ++w) {
      loss_sum += parts[w].loss_sum;
      auto part = tensors_of(parts[w].grads);
      for (std::size_t i = 0; i < total.size(); ++i) *total[i] += *part[i];
    }
  }
  result.loss = loss_sum * scale;
  return result;
}

std::vector<const EncodedExample*> pointers_to(std::span<const EncodedExample> batch) {
  std::vector<const EncodedExample*> out;
  out.reserve(batch.size());
  for (const auto& e : batch) out.push_back(&e);
  return out;
}

}  // namespace

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0) || !(weight_decay >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw std::invalid_argument("optim config: invalid Adam hyperparameters");
  }
  if (batch_size == 0 || max_epochs == 0 || patience == 0 || threads == 0) {
    throw std::invalid_argument("optim config: batch size, epochs, patience and threads must be positive");
  }
  if (!(min_rel_improvement >= 0.0)) {
    throw std::invalid_argument("optim config: min_rel_improvement must be >= 0");
  }
  loss.validate();
}

BatchGradient compute_batch_gradient(const ModelParams& params,
                                     std::span<const EncodedExample> batch,
                                     const LossConfig& loss,
                                     std::span<const std::uint64_t> dropout_seeds,
                                     std::size_t threads) {
  const auto ptrs = pointers_to(batch);
  return batch_gradient_impl(params, ptrs, loss, dropout_seeds, threads);
}

double batch_loss(const ModelParams& params, std::span<const EncodedExample> batch,
                  const LossConfig& loss, std::span<const std::uint64_t> dropout_seeds) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::optional<std::uint64_t> seed;
    if (!dropout_seeds.empty()) seed = dropout_seeds[i];
    total += sample_loss(trace_forward(batch[i].seq, params, seed).z, batch[i].y, loss);
  }
  return total / static_cast<double>(batch.size());
}

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
               const OptimConfig& cfg) {
  auto p = tensors_of(params);
  auto g = tensors_of(grads);
  auto m = tensors_of(state.first_moment);
  auto v = tensors_of(state.second_moment);
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw std::invalid_argument("adam_step: parameter structure mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  const double shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]->rows() != p[i]->rows() || g[i]->cols() != p[i]->cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    m[i]->array() = cfg.beta1 * m[i]->array() + (1.0 - cfg.beta1) * g[i]->array();
    v[i]->array() = cfg.beta2 * v[i]->array() + (1.0 - cfg.beta2) * g[i]->array().square();
    p[i]->array() = p[i]->array() * shrink -
                    cfg.learning_rate * (m[i]->array() / bias1) /
                        ((v[i]->array() / bias2).sqrt() + cfg.adam_eps);
  }
}

std::string TrainReport::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::json j = {{"epoch", e.epoch}, {"loss", e.loss}, {"wall_time_s", e.wall_time_s}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

TrainReport optimize(ModelParams& params, std::span<const EncodedExample> examples,
                     const OptimConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainReport report;
  if (examples.empty()) throw std::invalid_argument("train: empty training set");
  const bool has_positive = std::any_of(examples.begin(), examples.end(),
                                        [](const EncodedExample& e) { return e.y == 1; });
  if (!has_positive) {
    warn(&report,
         "training set has no y=1 (auxiliary) samples; the hypersphere loss is "
         "minimized by mapping every message to the centre (collapse)");
  }

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(mix(cfg.seed, 0x5348554646ull));
  AdamState state = AdamState::for_params(params);
  const bool dropout_on = params.config.dropout > 0.0;

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss_sum = 0.0;
    std::vector<const EncodedExample*> batch;
    std::vector<std::uint64_t> seeds;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      seeds.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&examples[order[i]]);
        if (dropout_on) seeds.push_back(mix(mix(cfg.seed, global_step), i - start));
      }
      ++global_step;
      BatchGradient bg;
      try {
        bg = batch_gradient_impl(params, batch, cfg.loss, seeds, cfg.threads);
      } catch (const NonFiniteError& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(global_step) + ": " + e.what());
      }
      if (!std::isfinite(bg.loss)) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(global_step) + ": loss is not finite");
      }
      epoch_loss_sum += bg.loss * static_cast<double>(batch.size());
      adam_step(params, bg.grads, state, cfg);
    }

    EpochStat stat;
    stat.epoch = epoch;
    stat.loss = epoch_loss_sum / static_cast<double>(examples.size());
    stat.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stat);
    report.stopped_epoch = epoch;
    if (on_epoch) on_epoch(stat);

    if (stat.loss < best * (1.0 - cfg.min_rel_improvement)) {
      best = stat.loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  report.params_checksum = params_checksum(params);
  return report;
}

std::vector<EncodedExample> encode_examples(std::span<const TrainingExample> examples,
                                            const Vocabulary& vocab,
                                            std::size_t max_len) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    out.push_back({encode_message(e.record.raw_text, vocab, max_len), e.y});
  }
  return out;
}

TrainResult train(const Dataset& dataset, const ModelConfig& model_cfg,
                  const OptimConfig& optim_cfg, const EpochCallback& on_epoch) {
  model_cfg.validate();
  if (dataset.train.empty()) throw std::invalid_argument("train: empty training set");

  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(dataset.train.size());
  std::string digest_input;
  for (const auto& e : dataset.train) {
    tokens.push_back(preprocess(e.record.raw_text));
    digest_input += std::to_string(e.y);
    digest_input += '\t';
    digest_input += e.record.raw_text;
    digest_input += '\n';
  }

  TrainResult result;
  result.vocab = build_vocab(tokens);
  result.dataset_digest = detail::hex32(detail::crc32_of(digest_input));

  std::vector<EncodedExample> encoded;
  encoded.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    encoded.push_back({encode(tokens[i], result.vocab, model_cfg.max_len), dataset.train[i].y});
  }

  result.params = init_params(model_cfg, result.vocab.size(), mix(optim_cfg.seed, 0x494E4954ull));
  result.report = optimize(result.params, encoded, optim_cfg, on_epoch);
  return result;
}

ModelParams fine_tune(const ModelParams& params, const Vocabulary& vocab,
                      const Dataset& labeled, const FineTuneConfig& cfg,
                      TrainReport* report) {
  if (labeled.count_class(1) == 0) {
    warn(report, "fine_tune: no labeled anomalies supplied; parameters left unchanged");
    return params;
  }
  if (cfg.epochs == 0) return params;
  OptimConfig optim = cfg.optim;
  optim.max_epochs = cfg.epochs;
  optim.patience = cfg.epochs;  // run every requested epoch
  const auto encoded = encode_examples(labeled.train, vocab, params.config.max_len);
  ModelParams tuned = params;
  TrainReport r = optimize(tuned, encoded, optim);
  if (report) {
    for (auto& w : r.warnings) report->warnings.push_back(std::move(w));
    report->epochs = std::move(r.epochs);
    report->stopped_epoch = r.stopped_epoch;
    report->params_checksum = r.params_checksum;
  }
  return tuned;
}

std::string params_checksum(const ModelParams& params) {
  return detail::hex32(detail::crc32_of(detail::params_payload(params)));
}

}  // namespace logsy
