#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logsy/baseline_pca.hpp"
#include "logsy/detector.hpp"
#include "logsy/log_ingest.hpp"
#include "logsy/metrics.hpp"
#include "logsy/trainer.hpp"

namespace logsy {

struct ExperimentConfig {
  ModelConfig model;
  OptimConfig optim;
  std::size_t auxiliary_count = 1000;  // m
};

/// One trained model and its evaluation on the target test window.
struct LogsyRun {
  ModelBundle bundle;
  TrainReport report;
  std::vector<double> test_scores;  // A(x) per test record, in order
  SweepResult sweep;                // oracle best-F1 sweep on the test labels
};

/// Packs a training result into a bundle with metadata filled in.
ModelBundle make_bundle(TrainResult trained, const ExperimentConfig& cfg,
                        double train_fraction);

/// A(x) for every record.
std::vector<double> score_records(const ModelBundle& bundle, std::span<const LogRecord> records);

/// Scores paired with labels, skipping records whose label is Unknown.
std::vector<ScoredLabel> labeled(std::span<const LogRecord> records,
                                 std::span<const double> scores);

/// build_training_set + train + score + sweep.
LogsyRun run_logsy(const TargetSplit& split, std::span<const LogRecord> auxiliary,
                   const ExperimentConfig& cfg);

struct GridRow {
  double train_fraction = 0.0;
  std::size_t auxiliary_count = 0;
  double label_fraction = 0.0;
  std::size_t labeled_anomalies = 0;
  MetricsReport metrics;  // at the best-F1 threshold
  std::size_t epochs = 0;
};

/// Trains one fresh model per train fraction (time-ordered split each time).
std::vector<GridRow> run_split_grid(std::span<const LogRecord> target,
                                    std::span<const LogRecord> auxiliary,
                                    std::span<const double> fractions,
                                    const ExperimentConfig& cfg);

/// Trains one fresh model per auxiliary sample count m.
std::vector<GridRow> run_aux_ablation(const TargetSplit& split,
                                      std::span<const LogRecord> auxiliary,
                                      std::span<const std::size_t> m_values,
                                      const ExperimentConfig& cfg);

/// Pre-trains on normal + auxiliary data, then fine-tunes on the target normals
/// plus the given fraction of the train window's labeled anomalies. Every row
/// trains from scratch; fraction 0 reports the pre-trained model.
std::vector<GridRow> run_label_ablation(const TargetSplit& split,
                                        std::span<const LogRecord> auxiliary,
                                        std::span<const double> label_fractions,
                                        const ExperimentConfig& cfg,
                                        const FineTuneConfig& fine_tune_cfg);

/// Fine-tunes an already trained bundle with a fraction of the split's
/// train-window anomalies and re-evaluates it.
LogsyRun fine_tune_run(const ModelBundle& base, const TargetSplit& split, double label_fraction,
                       const FineTuneConfig& fine_tune_cfg);

/// CSV with header id,label,z0..z{d-1},score and one row per record.
void export_embeddings(const ModelBundle& bundle, std::span<const LogRecord> records,
                       const std::filesystem::path& path);

std::string grid_to_csv(std::span<const GridRow> rows);
std::string grid_to_json(std::span<const GridRow> rows);

}  // namespace logsy
