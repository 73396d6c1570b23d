#include <benchmark/benchmark.h>

#include <random>

#include "logsy/baseline_pca.hpp"
#include "logsy/detector.hpp"
#include "logsy/synthetic.hpp"
#include "logsy/tokenizer.hpp"
#include "logsy/trainer.hpp"

using namespace logsy;

namespace {

struct Fixture {
  SyntheticCorpus corpus;
  Vocabulary vocab;
  ModelParams params;
  std::vector<EncodedExample> batch;

  Fixture() {
    SyntheticSpec spec;
    spec.train_normal = 2000;
    spec.auxiliary_count = 2000;
    corpus = gen_synthetic(spec);
    std::vector<std::vector<std::string>> docs;
    for (const auto& r : corpus.target) docs.push_back(preprocess(r.raw_text));
    vocab = build_vocab(docs);
    params = init_params(ModelConfig{}, vocab.size(), 1);
    for (std::size_t i = 0; i < 64; ++i) {
      batch.push_back({encode(preprocess(corpus.target[i].raw_text), vocab), 0});
      batch.push_back({encode(preprocess(corpus.auxiliary[i].raw_text), vocab), 1});
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Preprocess(benchmark::State& state) {
  const auto& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(preprocess(f.corpus.target[i++ % f.corpus.target.size()].raw_text));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Preprocess);

void BM_PreprocessLong(benchmark::State& state) {
  std::string msg;
  for (int i = 0; i < 80; ++i) msg += "Kernel cache flush on /var/lib/node-" + std::to_string(i) + " the ";
  for (auto _ : state) benchmark::DoNotOptimize(preprocess(msg));
}
BENCHMARK(BM_PreprocessLong);

void BM_Forward(benchmark::State& state) {
  const auto& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(forward(f.batch[i++ % f.batch.size()].seq, f.params));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Forward);

void BM_BatchGradient(benchmark::State& state) {
  const auto& f = fixture();
  const std::size_t threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_batch_gradient(f.params, f.batch, LossConfig{}, {}, threads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}
BENCHMARK(BM_BatchGradient)->Arg(1)->Arg(2)->UseRealTime();

void BM_AdamStep(benchmark::State& state) {
  const auto& f = fixture();
  ModelParams p = f.params;
  const BatchGradient g = compute_batch_gradient(p, f.batch, LossConfig{});
  AdamState s = AdamState::for_params(p);
  const OptimConfig cfg;
  for (auto _ : state) adam_step(p, g.grads, s, cfg);
}
BENCHMARK(BM_AdamStep);

void BM_SerializeBundle(benchmark::State& state) {
  const auto& f = fixture();
  ModelBundle b;
  b.vocab = f.vocab;
  b.params = f.params;
  for (auto _ : state) benchmark::DoNotOptimize(deserialize_bundle(serialize_bundle(b)));
}
BENCHMARK(BM_SerializeBundle);

void BM_TfidfPca(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<std::vector<std::string>> docs;
  for (std::size_t i = 0; i < f.corpus.train_window; ++i) docs.push_back(preprocess(f.corpus.target[i].raw_text));
  for (auto _ : state) {
    auto [model, vectors] = tfidf_fit_transform(docs);
    benchmark::DoNotOptimize(pca_fit(vectors, model.dimension()));
  }
}
BENCHMARK(BM_TfidfPca)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
