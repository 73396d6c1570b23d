#include "logsy/experiments.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "logsy/objective.hpp"

namespace logsy {

namespace {

GridRow row_from(const LogsyRun& run, double fraction, std::size_t m) {
  GridRow row;
  row.train_fraction = fraction;
  row.auxiliary_count = m;
  row.metrics = run.sweep.best;
  row.epochs = run.report.stopped_epoch;
  return row;
}

double window_fraction(const TargetSplit& split) {
  return static_cast<double>(split.train.size()) /
         static_cast<double>(split.train.size() + split.test.size());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ModelBundle make_bundle(TrainResult trained, const ExperimentConfig& cfg,
                        double train_fraction) {
  ModelBundle b;
  b.vocab = std::move(trained.vocab);
  b.params = std::move(trained.params);
  b.metadata.seed = cfg.optim.seed;
  b.metadata.train_fraction = train_fraction;
  b.metadata.auxiliary_count = cfg.auxiliary_count;
  b.metadata.dataset_digest = trained.dataset_digest;
  return b;
}

std::vector<double> score_records(const ModelBundle& bundle, std::span<const LogRecord> records) {
  std::vector<double> scores;
  scores.reserve(records.size());
  for (const auto& r : records) scores.push_back(anomaly_score(embed_message(r.raw_text, bundle)));
  return scores;
}

std::vector<ScoredLabel> labeled(std::span<const LogRecord> records,
                                 std::span<const double> scores) {
  std::vector<ScoredLabel> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::Unknown) continue;
    out.push_back({scores[i], records[i].label == Label::Anomaly});
  }
  return out;
}

LogsyRun run_logsy(const TargetSplit& split, std::span<const LogRecord> auxiliary,
                   const ExperimentConfig& cfg) {
  const Dataset ds =
      build_training_set(split.train, auxiliary, cfg.auxiliary_count, cfg.optim.seed);
  TrainResult trained = train(ds, cfg.model, cfg.optim);
  LogsyRun run;
  run.report = std::move(trained.report);
  run.bundle = make_bundle(std::move(trained), cfg, window_fraction(split));
  run.test_scores = score_records(run.bundle, split.test);
  run.sweep = sweep_threshold(labeled(split.test, run.test_scores));
  return run;
}

std::vector<GridRow> run_split_grid(std::span<const LogRecord> target,
                                    std::span<const LogRecord> auxiliary,
                                    std::span<const double> fractions,
                                    const ExperimentConfig& cfg) {
  std::vector<GridRow> rows;
  for (const double f : fractions) {
    SplitSpec spec;
    spec.train_fraction = f;
    const TargetSplit split = time_ordered_split(target, spec);
    rows.push_back(row_from(run_logsy(split, auxiliary, cfg), f, cfg.auxiliary_count));
  }
  return rows;
}

std::vector<GridRow> run_aux_ablation(const TargetSplit& split,
                                      std::span<const LogRecord> auxiliary,
                                      std::span<const std::size_t> m_values,
                                      const ExperimentConfig& cfg) {
  std::vector<GridRow> rows;
  for (const std::size_t m : m_values) {
    ExperimentConfig cell = cfg;
    cell.auxiliary_count = m;
    rows.push_back(row_from(run_logsy(split, auxiliary, cell), window_fraction(split), m));
  }
  return rows;
}

LogsyRun fine_tune_run(const ModelBundle& base, const TargetSplit& split, double label_fraction,
                       const FineTuneConfig& fine_tune_cfg) {
  const auto labeled_pool = anomalies_in(split.train);
  Dataset labeled_set = build_training_set(split.train, {}, 0, fine_tune_cfg.optim.seed);
  labeled_set = inject_expert_labels(std::move(labeled_set), labeled_pool, label_fraction);

  LogsyRun run;
  run.bundle = base;
  run.bundle.params = fine_tune(base.params, base.vocab, labeled_set, fine_tune_cfg, &run.report);
  run.bundle.metadata.extra["fine_tune_label_fraction"] = format_double(label_fraction);
  run.bundle.metadata.extra["fine_tune_labeled_anomalies"] =
      std::to_string(labeled_set.count_class(1));
  run.test_scores = score_records(run.bundle, split.test);
  run.sweep = sweep_threshold(labeled(split.test, run.test_scores));
  return run;
}

std::vector<GridRow> run_label_ablation(const TargetSplit& split,
                                        std::span<const LogRecord> auxiliary,
                                        std::span<const double> label_fractions,
                                        const ExperimentConfig& cfg,
                                        const FineTuneConfig& fine_tune_cfg) {
  const std::size_t pool = anomalies_in(split.train).size();
  std::vector<GridRow> rows;
  for (const double fraction : label_fractions) {
    const LogsyRun base = run_logsy(split, auxiliary, cfg);
    const std::size_t count =
        static_cast<std::size_t>(fraction * static_cast<double>(pool));
    GridRow row;
    if (count == 0) {
      row = row_from(base, window_fraction(split), cfg.auxiliary_count);
    } else {
      row = row_from(fine_tune_run(base.bundle, split, fraction, fine_tune_cfg),
                     window_fraction(split), cfg.auxiliary_count);
      row.epochs = base.report.stopped_epoch;
    }
    row.label_fraction = fraction;
    row.labeled_anomalies = count;
    rows.push_back(row);
  }
  return rows;
}

void export_embeddings(const ModelBundle& bundle, std::span<const LogRecord> records,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write embeddings: " + path.string());
  out << "id,label";
  for (std::size_t k = 0; k < bundle.config().d; ++k) out << ",z" << k;
  out << ",score\n";
  for (const auto& r : records) {
    const EmbeddingVector z = embed_message(r.raw_text, bundle);
    out << r.seq_index << ',' << to_string(r.label);
    for (Eigen::Index k = 0; k < z.size(); ++k) out << ',' << format_double(z(k));
    out << ',' << format_double(anomaly_score(z)) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string grid_to_csv(std::span<const GridRow> rows) {
  std::ostringstream out;
  out << "train_fraction,auxiliary_count,label_fraction,labeled_anomalies,threshold,"
         "tp,fp,tn,fn,precision,recall,f1,accuracy,epochs\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << format_double(r.train_fraction) << ',' << r.auxiliary_count << ','
        << format_double(r.label_fraction) << ',' << r.labeled_anomalies << ','
        << format_double(m.threshold) << ',' << m.tp << ',' << m.fp << ',' << m.tn << ','
        << m.fn << ',' << format_double(m.precision) << ',' << format_double(m.recall) << ','
        << format_double(m.f1) << ',' << format_double(m.accuracy) << ',' << r.epochs << '\n';
  }
  return out.str();
}

std::string grid_to_json(std::span<const GridRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  double f1_sum = 0.0;
  for (const auto& r : rows) {
    arr.push_back({{"train_fraction", r.train_fraction},
                   {"auxiliary_count", r.auxiliary_count},
                   {"label_fraction", r.label_fraction},
                   {"labeled_anomalies", r.labeled_anomalies},
                   {"epochs", r.epochs},
                   {"metrics", nlohmann::json::parse(r.metrics.to_json())}});
    f1_sum += r.metrics.f1;
  }
  nlohmann::json doc = {{"rows", arr}};
  if (!rows.empty()) doc["mean_f1"] = f1_sum / static_cast<double>(rows.size());
  return doc.dump(2);
}

}  // namespace logsy
