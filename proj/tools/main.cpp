#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli_support.hpp"
#include "logsy/baseline_pca.hpp"
#include "logsy/detector.hpp"
#include "logsy/experiments.hpp"
#include "logsy/log_ingest.hpp"
#include "logsy/objective.hpp"
#include "logsy/synthetic.hpp"
#include "logsy/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace logsy;
using namespace logsy::cli;

namespace {

struct Common {
  std::string out = default_out_dir().string();
  std::optional<std::string> config;  // informational, already expanded
};

struct Data {
  std::string target;
  std::string target_format = "dash";
  std::vector<std::string> aux;
  std::string aux_format = "dash";
  std::optional<double> train_frac;
};

struct Options {
  Common common;
  Data data;
  ModelConfig model;
  OptimConfig optim;
  std::size_t m = 1000;
  std::string model_path;
  std::string input;
  std::string input_format = "none";
  std::string sweep_format = "dash";
  std::optional<double> threshold;
  double validation_frac = 0.0;
  bool csv = false;
  bool store = false;
  double label_frac = 0.02;
  std::size_t ft_epochs = 5;
  double variance = 0.95;
  std::optional<std::size_t> k;
  bool fit_all = false;
  std::vector<std::size_t> m_values{0, 1, 10, 100, 1000};
  std::vector<double> label_fracs{0.0, 0.01, 0.02, 0.05, 0.1};
  std::vector<double> fractions{0.1, 0.2, 0.4, 0.6, 0.8};
  std::string spec;
  std::optional<std::uint64_t> synth_seed;
};

// ---- flag groups ----------------------------------------------------------

void out_flags(Registry& r, Options& o) {
  r.option("out", o.common.out, "output directory (default $LOGSY_OUT_DIR or ./out)");
  r.app()->add_option("--config", o.common.config, "flat JSON file of flag values");
}

void model_flags(Registry& r, Options& o) {
  r.option("d", o.model.d, "embedding width");
  r.option("heads", o.model.heads, "attention heads, must divide d");
  r.option("layers", o.model.layers, "encoder layers");
  r.option("max-len", o.model.max_len, "tokens per message including the leading EMBEDDING token");
  r.option("ffn-width", o.model.ffn_width, "feed-forward hidden width");
  r.option("dropout", o.model.dropout, "dropout rate during training");
}

void optim_flags(Registry& r, Options& o) {
  r.option("lr", o.optim.learning_rate, "Adam learning rate");
  r.option("weight-decay", o.optim.weight_decay, "decoupled weight decay");
  r.option("batch-size", o.optim.batch_size, "minibatch size");
  r.option("max-epochs", o.optim.max_epochs, "epoch cap");
  r.option("patience", o.optim.patience, "early-stopping patience in epochs");
  r.option("min-rel-improvement", o.optim.min_rel_improvement, "relative loss improvement that resets patience");
  r.option("seed", o.optim.seed, "seed for initialization, sampling, shuffling and dropout");
  r.option("threads", o.optim.threads, "gradient worker threads (1 = bit-reproducible)");
}

void target_flags(Registry& r, Options& o) {
  r.option("target", o.data.target, "labeled target log")->required();
  r.option("target-format", o.data.target_format, "dash | csv | none")
      ->check(CLI::IsMember({"dash", "csv", "none"}));
  r.option("train-frac", o.data.train_frac, "leading share of the target log used for training");
}

void aux_flags(Registry& r, Options& o) {
  r.list("aux", o.data.aux, "auxiliary log files (repeatable or comma separated)");
  r.option("aux-format", o.data.aux_format, "dash | csv | none")
      ->check(CLI::IsMember({"dash", "csv", "none"}));
  r.option("m", o.m, "auxiliary samples drawn into the training set");
}

void model_path_flag(Registry& r, Options& o) {
  r.option("model", o.model_path, "model bundle file")->required();
}

// ---- helpers --------------------------------------------------------------

fs::path out_dir(const Options& o) {
  fs::path dir = o.common.out;
  fs::create_directories(dir);
  return dir;
}

void echo_config(const Options& o, const Registry& r, const std::string& command) {
  json j = r.resolved();
  j["command"] = command;
  write_text(out_dir(o) / "config.json", j.dump(2) + "\n");
}

std::vector<LogRecord> load(const std::string& path, const std::string& format, Origin origin,
                            const std::string& what) {
  require_file(path, what);
  LoadedLog log = load_labeled_log(path, parse_label_format(format), origin);
  if (log.malformed_labels > 0)
    std::cerr << "warning: " << path << ": " << log.malformed_labels
              << " lines with malformed labels treated as unknown\n";
  return std::move(log.records);
}

std::vector<LogRecord> load_aux(const Options& o) {
  std::vector<LogRecord> all;
  for (const auto& p : o.data.aux) {
    auto recs = load(p, o.data.aux_format, Origin::Auxiliary, "auxiliary log");
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return all;
}

// Resolves --train-frac (flag, else the given default) before splitting.
TargetSplit split_target(Options& o, double default_fraction) {
  const auto target = load(o.data.target, o.data.target_format, Origin::Target, "target log");
  if (!o.data.train_frac) o.data.train_frac = default_fraction;
  SplitSpec spec;
  spec.train_fraction = *o.data.train_frac;
  return time_ordered_split(target, spec);
}

ModelBundle load_model(const Options& o) {
  require_file(o.model_path, "model file");
  return load_bundle(o.model_path);
}

ExperimentConfig experiment(const Options& o) {
  ExperimentConfig cfg;
  cfg.model = o.model;
  cfg.optim = o.optim;
  cfg.auxiliary_count = o.m;
  return cfg;
}

EpochCallback progress() {
  return [](const EpochStat& s) {
    std::fprintf(stderr, "epoch %zu  loss %.6g  %.2fs\n", s.epoch, s.loss, s.wall_time_s);
  };
}

json metrics_json(const MetricsReport& m) { return json::parse(m.to_json()); }

// First share of the test window, set aside for threshold selection.
std::size_t validation_size(std::size_t test_size, double fraction) {
  return static_cast<std::size_t>(fraction * static_cast<double>(test_size));
}

double bundle_validation_fraction(const ModelBundle& b) {
  const auto it = b.metadata.extra.find("validation_fraction");
  return it == b.metadata.extra.end() ? 0.0 : std::stod(it->second);
}

std::optional<SweepResult> try_sweep(const std::vector<ScoredLabel>& scored) {
  bool pos = false, neg = false;
  for (const auto& s : scored) (s.anomaly ? pos : neg) = true;
  if (!pos || !neg) return std::nullopt;
  return sweep_threshold(scored);
}

json sweep_json(const SweepResult& s, bool with_curve) {
  json j{{"best_threshold", s.best_threshold}, {"best", metrics_json(s.best)}};
  if (with_curve) {
    j["curve"] = json::array();
    for (const auto& m : s.curve) j["curve"].push_back(metrics_json(m));
  }
  return j;
}

// ---- subcommands ----------------------------------------------------------

int cmd_train(Options& o, const Registry& r) {
  if (o.threshold && o.validation_frac > 0.0)
    throw UsageError("--threshold and --validation-frac are mutually exclusive");
  const TargetSplit split = split_target(o, 0.2);
  const auto aux = load_aux(o);
  echo_config(o, r, "train");

  std::vector<LogRecord> validation(split.test.begin(),
                                    split.test.begin() + static_cast<std::ptrdiff_t>(
                                        validation_size(split.test.size(), o.validation_frac)));

  const Dataset ds = build_training_set(split.train, aux, o.m, o.optim.seed);
  std::cerr << "training on " << ds.count_class(0) << " target and " << ds.count_class(1)
            << " auxiliary samples\n";
  TrainResult trained = train(ds, o.model, o.optim, progress());
  const TrainReport report = trained.report;
  ModelBundle bundle = make_bundle(std::move(trained), experiment(o), *o.data.train_frac);

  if (o.threshold) {
    bundle.threshold = *o.threshold;
    bundle.metadata.threshold_source = "explicit";
  } else if (!validation.empty()) {
    bundle.metadata.extra["validation_fraction"] = json(o.validation_frac).dump();
    const auto sweep = try_sweep(labeled(validation, score_records(bundle, validation)));
    if (sweep) {
      bundle.threshold = sweep->best_threshold;
      bundle.metadata.threshold_source = "validation-sweep";
    } else {
      std::cerr << "warning: validation slice lacks one of the classes; no threshold stored\n";
    }
  }

  const fs::path dir = out_dir(o);
  save_bundle(bundle, dir / "model.bundle");
  write_text(dir / "train_report.jsonl", report.to_jsonl());
  json summary{{"model", (dir / "model.bundle").string()},
               {"epochs", report.stopped_epoch},
               {"final_loss", report.epochs.empty() ? 0.0 : report.epochs.back().loss},
               {"params_checksum", report.params_checksum},
               {"threshold", bundle.threshold ? json(*bundle.threshold) : json(nullptr)}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_finetune(Options& o, const Registry& r) {
  const ModelBundle base = load_model(o);
  const TargetSplit split = split_target(o, base.metadata.train_fraction);
  echo_config(o, r, "finetune");
  FineTuneConfig ft{o.optim, o.ft_epochs};
  LogsyRun run = fine_tune_run(base, split, o.label_frac, ft);
  if (run.bundle.threshold) {
    std::cerr << "warning: stored threshold dropped after fine-tuning; re-run sweep\n";
    run.bundle.threshold.reset();
    run.bundle.metadata.threshold_source.clear();
  }
  const fs::path dir = out_dir(o);
  save_bundle(run.bundle, dir / "model.bundle");
  write_text(dir / "finetune_report.jsonl", run.report.to_jsonl());
  json summary{{"model", (dir / "model.bundle").string()},
               {"labeled_anomalies", run.bundle.metadata.extra["fine_tune_labeled_anomalies"]},
               {"oracle", sweep_json(run.sweep, false)}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_score(Options& o, const Registry&) {
  const ModelBundle bundle = load_model(o);
  if (!o.threshold && !bundle.threshold)
    throw UsageError("the model has no stored threshold; pass --threshold");
  const auto records = load(o.input, o.input_format, Origin::Target, "input log");
  if (o.csv) std::cout << "id,score,is_anomaly\n";
  for (const auto& rec : records) {
    const AnomalyVerdict v = score_message(rec.raw_text, bundle, o.threshold);
    if (o.csv) {
      std::printf("%llu,%.17g,%d\n", static_cast<unsigned long long>(rec.seq_index), v.score,
                  v.is_anomaly ? 1 : 0);
    } else {
      std::cout << json{{"id", rec.seq_index}, {"score", v.score}, {"is_anomaly", v.is_anomaly}}.dump()
                << "\n";
    }
  }
  std::fflush(stdout);
  return 0;
}

int cmd_eval(Options& o, const Registry& r) {
  const ModelBundle bundle = load_model(o);
  const TargetSplit split = split_target(o, bundle.metadata.train_fraction);
  echo_config(o, r, "eval");
  const std::size_t skip = validation_size(split.test.size(), bundle_validation_fraction(bundle));
  const std::span<const LogRecord> test(split.test.data() + skip, split.test.size() - skip);
  const auto scores = score_records(bundle, test);
  const auto scored = labeled(test, scores);

  json result{{"evaluated_records", test.size()},
              {"labeled_records", scored.size()},
              {"validation_records_skipped", skip}};
  const std::optional<double> threshold = o.threshold ? o.threshold : bundle.threshold;
  if (threshold) {
    std::vector<Outcome> outcomes;
    for (const auto& s : scored) outcomes.push_back({s.score > *threshold, s.anomaly});
    MetricsReport m = compute_metrics(outcomes);
    m.threshold = *threshold;
    result["at_threshold"] = metrics_json(m);
    result["threshold_mode"] = o.threshold ? "explicit" : bundle.metadata.threshold_source;
  }
  if (const auto sweep = try_sweep(scored)) {
    result["oracle"] = sweep_json(*sweep, false);
    result["oracle"]["threshold_mode"] = "oracle-sweep";
  } else {
    std::cerr << "warning: test window lacks one of the classes; no oracle sweep\n";
  }
  write_text(out_dir(o) / "metrics.json", result.dump(2) + "\n");
  std::cout << result.dump() << "\n";
  return 0;
}

int cmd_sweep(Options& o, const Registry& r) {
  ModelBundle bundle = load_model(o);
  const auto records = load(o.input, o.sweep_format, Origin::Target, "input log");
  echo_config(o, r, "sweep");
  const auto scored = labeled(records, score_records(bundle, records));
  const auto sweep = try_sweep(scored);
  if (!sweep) throw std::runtime_error("sweep needs labeled normal and anomalous records");
  const fs::path dir = out_dir(o);
  write_text(dir / "sweep.json", sweep_json(*sweep, true).dump(2) + "\n");
  if (o.store) {
    bundle.threshold = sweep->best_threshold;
    bundle.metadata.threshold_source = "validation-sweep";
    save_bundle(bundle, dir / "model.bundle");
  }
  std::cout << sweep_json(*sweep, false).dump() << "\n";
  return 0;
}

PcaOptions pca_options(const Options& o) {
  PcaOptions p;
  p.variance_fraction = o.variance;
  p.fixed_k = o.k;
  p.fit_normals_only = !o.fit_all;
  return p;
}

json pca_json(const PcaEvaluation& e) {
  json j = sweep_json(e.sweep, false);
  j["k"] = e.k;
  j["dimension"] = e.dimension;
  return j;
}

int cmd_baseline_pca(Options& o, const Registry& r) {
  const TargetSplit split = split_target(o, 0.2);
  echo_config(o, r, "baseline-pca");
  const json result{{"tfidf", pca_json(pca_with_tfidf(split.train, split.test, pca_options(o)))}};
  write_text(out_dir(o) / "baseline_pca.json", result.dump(2) + "\n");
  std::cout << result.dump() << "\n";
  return 0;
}

int cmd_pca_embed(Options& o, const Registry& r) {
  const ModelBundle bundle = load_model(o);
  const TargetSplit split = split_target(o, bundle.metadata.train_fraction);
  echo_config(o, r, "pca-embed");
  const json result{
      {"embeddings", pca_json(pca_with_embeddings(bundle, split.train, split.test, pca_options(o)))},
      {"tfidf", pca_json(pca_with_tfidf(split.train, split.test, pca_options(o)))}};
  write_text(out_dir(o) / "pca_embed.json", result.dump(2) + "\n");
  std::cout << result.dump() << "\n";
  return 0;
}

void write_grid(const Options& o, const std::string& stem, const std::vector<GridRow>& rows) {
  const fs::path dir = out_dir(o);
  write_text(dir / (stem + ".csv"), grid_to_csv(rows));
  write_text(dir / (stem + ".json"), grid_to_json(rows));
  std::cout << grid_to_csv(rows);
}

int cmd_ablate_aux(Options& o, const Registry& r) {
  const TargetSplit split = split_target(o, 0.2);
  const auto aux = load_aux(o);
  echo_config(o, r, "ablate-aux");
  write_grid(o, "ablate_aux", run_aux_ablation(split, aux, o.m_values, experiment(o)));
  return 0;
}

int cmd_ablate_labels(Options& o, const Registry& r) {
  const TargetSplit split = split_target(o, 0.2);
  const auto aux = load_aux(o);
  echo_config(o, r, "ablate-labels");
  const FineTuneConfig ft{o.optim, o.ft_epochs};
  write_grid(o, "ablate_labels", run_label_ablation(split, aux, o.label_fracs, experiment(o), ft));
  return 0;
}

int cmd_split_grid(Options& o, const Registry& r) {
  const auto target = load(o.data.target, o.data.target_format, Origin::Target, "target log");
  const auto aux = load_aux(o);
  echo_config(o, r, "split-grid");
  write_grid(o, "split_grid", run_split_grid(target, aux, o.fractions, experiment(o)));
  return 0;
}

int cmd_gen_synthetic(Options& o, const Registry& r) {
  SyntheticSpec spec;
  if (!o.spec.empty()) {
    require_file(o.spec, "synthetic spec");
    std::ifstream in(o.spec);
    std::stringstream text;
    text << in.rdbuf();
    spec = synthetic_spec_from_json(text.str());
  }
  if (o.synth_seed) spec.seed = *o.synth_seed;
  spec.validate();
  echo_config(o, r, "gen-synthetic");
  const SyntheticCorpus corpus = gen_synthetic(spec);
  write_synthetic(corpus, spec, out_dir(o));
  std::cout << json{{"target_records", corpus.target.size()},
                    {"auxiliary_records", corpus.auxiliary.size()},
                    {"train_window", corpus.train_window},
                    {"train_fraction", corpus.train_fraction()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_export(Options& o, const Registry& r) {
  const ModelBundle bundle = load_model(o);
  const auto records = load(o.input, o.input_format, Origin::Target, "input log");
  echo_config(o, r, "export-embeddings");
  const fs::path path = out_dir(o) / "embeddings.csv";
  export_embeddings(bundle, records, path);
  std::cout << path.string() << "\n";
  return 0;
}

struct Command {
  CLI::App* app;
  Registry registry;
  int (*run)(Options&, const Registry&);
};

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Logsy: log anomaly detection with a hyperspherical transformer", "logsy"};
  app.require_subcommand(1);
  std::vector<Command> commands;

  auto add = [&](const std::string& name, const std::string& help,
                 int (*run)(Options&, const Registry&), auto&& define) {
    CLI::App* sub = app.add_subcommand(name, help);
    commands.push_back({sub, Registry(sub), run});
    Registry& reg = commands.back().registry;
    out_flags(reg, o);
    define(reg);
  };

  commands.reserve(16);
  add("train", "train a model on target normals plus auxiliary samples", cmd_train, [&](Registry& r) {
    target_flags(r, o);
    aux_flags(r, o);
    model_flags(r, o);
    optim_flags(r, o);
    r.option("threshold", o.threshold, "store this threshold in the bundle");
    r.option("validation-frac", o.validation_frac,
             "leading share of the test window used to sweep and store a threshold")
        ->check(CLI::Range(0.0, 1.0));
  });
  add("finetune", "fine-tune a model with a fraction of labeled target anomalies", cmd_finetune,
      [&](Registry& r) {
        model_path_flag(r, o);
        target_flags(r, o);
        optim_flags(r, o);
        r.option("label-frac", o.label_frac, "share of the train window's anomalies revealed")
            ->check(CLI::Range(0.0, 1.0));
        r.option("ft-epochs", o.ft_epochs, "fine-tuning epochs");
      });
  add("score", "score every line of a log", cmd_score, [&](Registry& r) {
    model_path_flag(r, o);
    r.option("input", o.input, "log to score")->required();
    r.option("input-format", o.input_format, "dash | csv | none")
        ->check(CLI::IsMember({"dash", "csv", "none"}));
    r.option("threshold", o.threshold, "overrides the stored threshold");
    r.flag("csv", o.csv, "write CSV instead of JSON lines");
  });
  add("eval", "evaluate a model on the target test window", cmd_eval, [&](Registry& r) {
    model_path_flag(r, o);
    target_flags(r, o);
    r.option("threshold", o.threshold, "overrides the stored threshold");
  });
  add("sweep", "best-F1 threshold sweep over a labeled log", cmd_sweep, [&](Registry& r) {
    model_path_flag(r, o);
    r.option("input", o.input, "labeled log")->required();
    r.option("input-format", o.sweep_format, "dash | csv")->check(CLI::IsMember({"dash", "csv"}));
    r.flag("store", o.store, "write a copy of the bundle with the swept threshold to the output dir");
  });
  add("baseline-pca", "PCA on TF-IDF vectors of the target train window", cmd_baseline_pca,
      [&](Registry& r) {
        target_flags(r, o);
        r.option("variance", o.variance, "retained variance fraction")->check(CLI::Range(0.0, 1.0));
        r.option("k", o.k, "fixed number of components");
        r.flag("fit-all", o.fit_all, "fit on every train record, ignoring labels");
      });
  add("pca-embed", "PCA on model embeddings, next to the TF-IDF baseline", cmd_pca_embed,
      [&](Registry& r) {
        model_path_flag(r, o);
        target_flags(r, o);
        r.option("variance", o.variance, "retained variance fraction")->check(CLI::Range(0.0, 1.0));
        r.option("k", o.k, "fixed number of components");
        r.flag("fit-all", o.fit_all, "fit on every train record, ignoring labels");
      });
  add("ablate-aux", "one fresh model per auxiliary sample count", cmd_ablate_aux, [&](Registry& r) {
    target_flags(r, o);
    aux_flags(r, o);
    model_flags(r, o);
    optim_flags(r, o);
    r.list("m-values", o.m_values, "auxiliary sample counts");
  });
  add("ablate-labels", "fine-tuning with growing shares of labeled anomalies", cmd_ablate_labels,
      [&](Registry& r) {
        target_flags(r, o);
        aux_flags(r, o);
        model_flags(r, o);
        optim_flags(r, o);
        r.list("label-fracs", o.label_fracs, "label fractions");
        r.option("ft-epochs", o.ft_epochs, "fine-tuning epochs");
      });
  add("split-grid", "one fresh model per train fraction", cmd_split_grid, [&](Registry& r) {
    target_flags(r, o);
    aux_flags(r, o);
    model_flags(r, o);
    optim_flags(r, o);
    r.list("fractions", o.fractions, "train fractions");
  });
  add("gen-synthetic", "write a deterministic synthetic target/auxiliary corpus", cmd_gen_synthetic,
      [&](Registry& r) {
        r.option("spec", o.spec, "JSON corpus spec");
        r.option("seed", o.synth_seed, "overrides the spec seed");
      });
  add("export-embeddings", "write z and A(x) for every line as CSV", cmd_export, [&](Registry& r) {
    model_path_flag(r, o);
    r.option("input", o.input, "log to embed")->required();
    r.option("input-format", o.input_format, "dash | csv | none")
        ->check(CLI::IsMember({"dash", "csv", "none"}));
  });

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(args);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
    o.model.validate();
    o.optim.validate();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      return c.run(o, c.registry);
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}
