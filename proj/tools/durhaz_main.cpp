// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

// durhaz command-line tool: corpus synthesis and ingestion, training of the
// four duration systems, median/quantile generation, metric reports, and
// duration histograms, all driven by one flat key=value config file.
//
// Exit codes: 0 success, 2 usage/config-value error, 3 data error,
// 4 numerical failure during training.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <thread>

#include "durhaz/config.hpp"
#include "durhaz/eval.hpp"
#include "durhaz/generate.hpp"

namespace fs = std::filesystem;
using namespace durhaz;

namespace {

// ---------------------------------------------------------------------------
// Config wiring
// ---------------------------------------------------------------------------

struct SeedOverride {
  bool set = false;
  std::uint64_t value = 0;
};

std::uint64_t resolve_seed(const Config& cfg, const std::string& key,
                           const SeedOverride& cli_seed) {
  if (cli_seed.set) return cli_seed.value;
  return cfg.get_u64(key, cfg.get_u64("seed", 1));
}

PhoneClassTable class_table_from_config(const Config& cfg) {
  PhoneClassTable table = default_class_table();
  for (const char* cls :
       {"vowel", "plosive", "fricative", "nasal", "affricate", "glide_liquid",
        "silence", "other"}) {
    const auto labels = cfg.get_string(std::string("classes.") + cls, "");
    for (const auto& label : split_ws(labels)) {
      table.table[label] = *phonetic_class_from_string(cls);
    }
  }
  for (const auto& [key, value] : cfg.with_prefix("corpus.phone.")) {
    const std::string label = key.substr(std::string("corpus.phone.").size());
    const auto toks = split_ws(value);
    if (toks.empty()) throw ParseError("config key '" + key + "': empty value");
    const auto cls = phonetic_class_from_string(toks[0]);
    if (!cls) {
      throw ParseError("config key '" + key + "': unknown phonetic class '" + toks[0] + "'");
    }
    table.table[label] = *cls;
  }
  return table;
}

CorpusSpec corpus_spec_from_config(const Config& cfg, const SeedOverride& cli_seed) {
  CorpusSpec spec;
  spec.utterance_count = static_cast<int>(cfg.get_int("corpus.utterance_count", 100));
  spec.phones_min = static_cast<int>(cfg.get_int("corpus.phones_min", 5));
  spec.phones_max = static_cast<int>(cfg.get_int("corpus.phones_max", 15));
  spec.cap = static_cast<int>(cfg.get_int("corpus.cap", kDefaultCap));
  spec.seed = resolve_seed(cfg, "corpus.seed", cli_seed);
  for (const auto& [key, value] : cfg.with_prefix("corpus.phone.")) {
    PhoneSpec ph;
    ph.label = key.substr(std::string("corpus.phone.").size());
    const auto toks = split_ws(value);
    if (toks.size() < 2) {
      throw ParseError("config key '" + key + "': expected '<class> <descriptor>'");
    }
    const auto cls = phonetic_class_from_string(toks[0]);
    if (!cls) {
      throw ParseError("config key '" + key + "': unknown phonetic class '" + toks[0] + "'");
    }
    ph.phonetic_class = *cls;
    std::string desc;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      if (i > 1) desc += ' ';
      desc += toks[i];
    }
    ph.duration = parse_duration_spec(desc);
    spec.inventory.push_back(std::move(ph));
  }
  if (spec.inventory.empty()) {
    throw ParseError("config defines no corpus.phone.<label> entries");
  }
  return spec;
}

TrainConfig train_config_from_config(const Config& cfg, const SeedOverride& cli_seed) {
  TrainConfig tc;
  tc.learning_rate = cfg.get_double("train.learning_rate", 0.05);
  tc.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", 25));
  tc.patience = static_cast<int>(cfg.get_int("train.patience", 5));
  tc.seed = resolve_seed(cfg, "train.seed", cli_seed);
  tc.init_scale = cfg.get_double("train.init_scale", 0.1);
  tc.clip_norm = cfg.get_double("train.clip_norm", 0.0);
  return tc;
}

NetArch arch_from_config(const Config& cfg, SystemKind kind) {
  NetArch arch = default_arch(kind);
  arch.dense_widths = cfg.get_int_list("train.dense_widths", arch.dense_widths);
  arch.recurrent_width =
      static_cast<int>(cfg.get_int("train.recurrent_width", arch.recurrent_width));
  return arch;
}

CounterEncoding counter_from_config(const Config& cfg) {
  CounterEncoding enc;
  enc.divisor = cfg.get_double("train.counter_divisor", 100.0);
  return enc;
}

AlignmentOptions alignment_options(const Config& cfg, const PhoneClassTable* table) {
  AlignmentOptions opts;
  opts.shift_100ns = frame_shift_100ns(cfg.get_double("frame_shift_ms", 5.0));
  opts.classes = table;
  return opts;
}

// ---------------------------------------------------------------------------
// Command implementations
// ---------------------------------------------------------------------------

int cmd_synth_data(const std::string& config_path, const std::string& out_dir,
                   const SeedOverride& cli_seed) {
  const Config cfg = Config::from_file(config_path);
  const CorpusSpec spec = corpus_spec_from_config(cfg, cli_seed);
  const long long shift = frame_shift_100ns(cfg.get_double("frame_shift_ms", 5.0));

  SynthCorpus synth = synth_corpus(spec);
  fs::create_directories(out_dir);

  std::vector<std::pair<std::string, std::string>> files;  // name -> content
  for (const auto& u : synth.corpus.utterances) {
    files.emplace_back(u.id + ".lab", format_alignment(u, shift));
    files.emplace_back(u.id + ".csv", format_feature_file(u));
  }
  files.emplace_back("ground_truth.csv", format_ground_truth(synth.truth));

  std::sort(files.begin(), files.end());
  std::string manifest = "file,fnv1a64\n";
  for (const auto& [name, content] : files) {
    write_text_file((fs::path(out_dir) / name).string(), content);
    manifest += name + "," + fnv1a64_hex(content) + "\n";
  }
  write_text_file((fs::path(out_dir) / "manifest.csv").string(), manifest);

  std::printf("synth-data: %d utterances, %zu files -> %s\n", spec.utterance_count,
              files.size(), out_dir.c_str());
  return 0;
}

struct TrainJob {
  SystemKind kind;
  std::string model_path;
  std::string curve_path;
};

void run_train_job(const TrainJob& job, const PreparedData& prepared, const Config& cfg,
                   const TrainConfig& tc, std::mutex& io_mutex) {
  const NetArch arch = arch_from_config(cfg, job.kind);
  TrainedModel model;
  if (is_phone_system(job.kind)) {
    model =
        train_phone_system(job.kind, prepared.train, prepared.dev, prepared.norm, tc, arch);
  } else {
    model = train_frame_system(job.kind, prepared.train, prepared.dev, prepared.norm, tc,
                               arch, counter_from_config(cfg));
  }
  save_model_file(model, job.model_path);
  write_text_file(job.curve_path, format_learning_curve(model.history));

  std::lock_guard<std::mutex> lock(io_mutex);
  std::printf("trained %s: epochs=%zu best_epoch=%d dev_loss=%s model=%s\n",
              to_string(job.kind), model.history.size(), model.best_epoch + 1,
              fmt_double(model.history[model.best_epoch].dev_loss).c_str(),
              job.model_path.c_str());
}

int cmd_train(const std::string& config_path, const std::string& corpus_dir,
              const std::string& system, const std::string& out_path,
              const SeedOverride& cli_seed, int max_epochs_flag, int jobs) {
  const Config cfg = Config::from_file(config_path);
  const PhoneClassTable table = class_table_from_config(cfg);
  const Corpus raw = load_corpus(corpus_dir, alignment_options(cfg, &table));

  TrainConfig tc = train_config_from_config(cfg, cli_seed);
  if (max_epochs_flag >= 0) {
    if (max_epochs_flag == 0) throw InvalidArgumentError("--max-epochs must be >= 1");
    tc.max_epochs = max_epochs_flag;
    tc.patience = std::min(tc.patience, tc.max_epochs);
  }
  const double dev_fraction = cfg.get_double("train.dev_fraction", 0.05);
  const PreparedData prepared =
      prepare_training_data(raw, dev_fraction, derive_seed(tc.seed, "split"));
  if (prepared.dev_clamps.clamped_values > 0) {
    std::fprintf(stderr, "note: %zu/%zu dev feature values clamped to the training range\n",
                 prepared.dev_clamps.clamped_values, prepared.dev_clamps.total_values);
  }

  std::vector<TrainJob> tasks;
  if (system == "all") {
    fs::create_directories(out_path);
    for (auto kind : {SystemKind::PhoneDNN, SystemKind::PhoneLSTM,
                      SystemKind::FrameLSTMInternal, SystemKind::FrameLSTMExternal}) {
      const std::string base = (fs::path(out_path) / to_string(kind)).string();
      tasks.push_back({kind, base + ".model", base + ".curve.csv"});
    }
  } else {
    const auto kind = system_kind_from_string(system);
    if (!kind) {
      throw InvalidArgumentError(
          "unknown system '" + system +
          "' (expected phone-dnn, phone-lstm, frame-lstm-i, frame-lstm-e, or all)");
    }
    tasks.push_back({*kind, out_path, out_path + ".curve.csv"});
  }

  std::mutex io_mutex;
  if (jobs > 1 && tasks.size() > 1) {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(tasks.size());
    std::size_t next = 0;
    std::mutex next_mutex;
    const int n_workers = std::min<int>(jobs, static_cast<int>(tasks.size()));
    for (int w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        while (true) {
          std::size_t mine;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= tasks.size()) return;
            mine = next++;
          }
          try {
            run_train_job(tasks[mine], prepared, cfg, tc, io_mutex);
          } catch (...) {
            errors[mine] = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  } else {
    for (const auto& task : tasks) run_train_job(task, prepared, cfg, tc, io_mutex);
  }
  return 0;
}

int cmd_generate(const std::string& model_path, const std::string& corpus_dir,
                 const std::string& out_path, const std::string& config_path,
                 double quantile_flag, int cap_flag, const std::string& dump_path) {
  Config cfg;
  if (!config_path.empty()) cfg = Config::from_file(config_path);
  const TrainedModel model = load_model_file(model_path);
  const PhoneClassTable table = class_table_from_config(cfg);
  Corpus corpus = load_corpus(corpus_dir, alignment_options(cfg, &table));

  if (corpus.feature_dim != model.normalisation.dim()) {
    throw DataError("corpus feature width " + std::to_string(corpus.feature_dim) +
                    " does not match the model's " +
                    std::to_string(model.normalisation.dim()));
  }
  const auto clamps = apply_normalisation(corpus, model.normalisation);
  if (clamps.clamped_values > 0) {
    std::fprintf(stderr, "note: %zu/%zu feature values clamped to the training range\n",
                 clamps.clamped_values, clamps.total_values);
  }

  if (!dump_path.empty() && is_phone_system(model.kind)) {
    throw InvalidArgumentError("--dump-hazards needs a frame-system model");
  }

  GenOptions opts;
  opts.quantile =
      quantile_flag >= 0 ? quantile_flag : cfg.get_double("generate.quantile", 0.5);
  opts.cap = cap_flag >= 0 ? cap_flag : static_cast<int>(cfg.get_int("generate.cap", kDefaultCap));
  check_gen_options(opts);

  std::vector<DurationRow> rows;
  std::string dump_csv = kHazardDumpHeader;
  for (const auto& u : corpus.utterances) {
    if (is_phone_system(model.kind)) {
      const auto durations = generate_phone_durations(model, u, opts);
      for (std::size_t p = 0; p < durations.size(); ++p) {
        rows.push_back({u.id, static_cast<int>(p), u.phones[p].label, durations[p], false});
      }
    } else {
      std::vector<HazardDumpRow> dump;
      const auto durations =
          generate_frame_durations(model, u, opts, dump_path.empty() ? nullptr : &dump);
      for (std::size_t p = 0; p < durations.size(); ++p) {
        rows.push_back({u.id, static_cast<int>(p), u.phones[p].label,
                        durations[p].frames, durations[p].truncated});
      }
      if (!dump_path.empty()) dump_csv += format_hazard_dump_csv(u.id, dump);
    }
  }
  write_text_file(out_path, format_durations_csv(rows));
  if (!dump_path.empty()) write_text_file(dump_path, dump_csv);
  std::printf("generate: %zu phones over %zu utterances -> %s (q=%s, cap=%d)\n",
              rows.size(), corpus.utterances.size(), out_path.c_str(),
              fmt_double(opts.quantile).c_str(), opts.cap);
  return 0;
}

int cmd_eval(const std::vector<std::string>& pred_paths, const std::string& corpus_dir,
             const std::string& out_path, const std::string& config_path) {
  Config cfg;
  if (!config_path.empty()) cfg = Config::from_file(config_path);
  const PhoneClassTable table = class_table_from_config(cfg);
  const Corpus corpus = load_corpus(corpus_dir, alignment_options(cfg, &table));

  std::vector<std::pair<std::string, MetricReport>> reports;
  std::vector<SystemMetrics> overall;
  for (const auto& path : pred_paths) {
    const std::string name = fs::path(path).stem().string();
    const auto rows = parse_durations_csv(read_text_file(path));
    std::map<std::string, std::vector<DurationRow>> by_utt;
    for (const auto& r : rows) by_utt[r.utterance].push_back(r);

    std::string missing;
    for (const auto& u : corpus.utterances) {
      if (by_utt.find(u.id) == by_utt.end()) missing += " " + u.id;
    }
    if (!missing.empty()) {
      throw DataError(name + ": predictions missing for utterances:" + missing);
    }
    if (by_utt.size() != corpus.utterances.size()) {
      std::string extra;
      std::set<std::string> known;
      for (const auto& u : corpus.utterances) known.insert(u.id);
      for (const auto& [id, unused] : by_utt) {
        if (!known.count(id)) extra += " " + id;
      }
      throw DataError(name + ": predictions for unknown utterances:" + extra);
    }

    std::vector<int> pred, ref;
    std::vector<PhoneticClass> classes;
    for (const auto& u : corpus.utterances) {
      const auto& urows = by_utt[u.id];
      if (urows.size() != u.phones.size()) {
        throw DataError(name + ": " + u.id + " has " + std::to_string(urows.size()) +
                        " predictions for " + std::to_string(u.phones.size()) + " phones");
      }
      for (std::size_t p = 0; p < u.phones.size(); ++p) {
        if (urows[p].phone != static_cast<int>(p)) {
          throw DataError(name + ": " + u.id + " rows out of order");
        }
        pred.push_back(urows[p].duration);
        ref.push_back(u.phones[p].ref_duration);
        classes.push_back(u.phones[p].phonetic_class);
      }
    }
    MetricReport report = duration_metrics(pred, ref, classes);
    overall.push_back({name, report.overall});
    reports.emplace_back(name, std::move(report));
  }

  write_text_file(out_path, format_metric_report_csv(reports));
  for (const auto& [name, report] : reports) {
    std::printf("%s: rmse=%s mae=%s corr=%s n=%zu\n", name.c_str(),
                fmt_double(report.overall.rmse).c_str(),
                fmt_double(report.overall.mae).c_str(),
                format_corr(report.overall.corr).c_str(), report.overall.n);
  }
  if (reports.size() >= 2) {
    const Comparison cmp = compare_systems(overall);
    write_text_file(out_path + ".compare.csv", format_comparison_csv(cmp));
    for (const auto& f : cmp.tradeoffs) {
      std::printf("tradeoff: %s beats %s on mae while %s beats %s on rmse\n",
                  f.better_mae.c_str(), f.better_rmse.c_str(), f.better_rmse.c_str(),
                  f.better_mae.c_str());
    }
  }
  return 0;
}

int cmd_hist(const std::string& corpus_dir, const std::string& out_path,
             const std::string& config_path, bool include_silence) {
  Config cfg;
  if (!config_path.empty()) cfg = Config::from_file(config_path);
  const PhoneClassTable table = class_table_from_config(cfg);
  const Corpus corpus = load_corpus(corpus_dir, alignment_options(cfg, &table));

  std::vector<int> durations;
  for (const auto& u : corpus.utterances) {
    for (const auto& ph : u.phones) {
      if (!include_silence && ph.phonetic_class == PhoneticClass::Silence) continue;
      durations.push_back(ph.ref_duration);
    }
  }
  if (durations.empty()) throw EmptyEvaluationError("no phones to histogram");
  const Histogram h = histogram(durations);
  write_text_file(out_path, format_histogram_csv(h));
  std::printf("hist: %zu durations, median=%d min=%d max=%d -> %s\n", durations.size(),
              h.median, h.min, h.max, out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"durhaz: non-parametric frame-level phone-duration modelling"};
  app.require_subcommand(1);

  SeedOverride cli_seed;
  app.add_option_function<std::uint64_t>(
         "--seed",
         [&](std::uint64_t v) {
           cli_seed.set = true;
           cli_seed.value = v;
         },
         "Master seed; overrides corpus.seed and train.seed from the config");

  std::string config_path, corpus_dir, out_path, model_path, system, dump_path;
  std::vector<std::string> pred_paths;
  double quantile = -1.0;  // sentinel: flag not given
  int cap = -1, max_epochs = -1, jobs = 1;
  bool include_silence = false;

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic corpus + ground truth");
  synth->fallthrough();
  synth->add_option("--config", config_path, "Config file")->required();
  synth->add_option("--out", out_path, "Output corpus directory")->required();

  auto* train = app.add_subcommand("train", "Train one system (or all four)");
  train->fallthrough();
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  train
      ->add_option("--system", system,
                   "phone-dnn | phone-lstm | frame-lstm-i | frame-lstm-e | all")
      ->required();
  train->add_option("--out", out_path, "Model file path (directory when --system all)")
      ->required();
  train->add_option("--max-epochs", max_epochs, "Override train.max_epochs");
  train->add_option("--jobs", jobs, "Parallel training runs for --system all");

  auto* gen = app.add_subcommand("generate", "Generate durations from a trained model");
  gen->fallthrough();
  gen->add_option("--model", model_path, "Model file")->required();
  gen->add_option("--corpus", corpus_dir, "Test corpus directory")->required();
  gen->add_option("--out", out_path, "Durations CSV path")->required();
  gen->add_option("--config", config_path, "Config file (class table, defaults)");
  gen->add_option("--quantile", quantile, "Generation quantile (default 0.5)");
  gen->add_option("--cap", cap, "Per-phone frame cap (default 300)");
  gen->add_option("--dump-hazards", dump_path, "Write per-frame hazard CSV here");

  auto* ev = app.add_subcommand("eval", "Metric report for one or more prediction files");
  ev->fallthrough();
  ev->add_option("--pred", pred_paths, "Durations CSV (repeat for multiple systems)")
      ->required();
  ev->add_option("--corpus", corpus_dir, "Reference corpus directory")->required();
  ev->add_option("--out", out_path, "Report CSV path")->required();
  ev->add_option("--config", config_path, "Config file (class table)");

  auto* hist = app.add_subcommand("hist", "Duration histogram of a corpus");
  hist->fallthrough();
  hist->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  hist->add_option("--out", out_path, "Histogram CSV path")->required();
  hist->add_option("--config", config_path, "Config file (class table)");
  hist->add_flag("--include-silence", include_silence, "Keep silence phones");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth_data(config_path, out_path, cli_seed);
    if (train->parsed()) {
      return cmd_train(config_path, corpus_dir, system, out_path, cli_seed, max_epochs,
                       jobs);
    }
    if (gen->parsed()) {
      return cmd_generate(model_path, corpus_dir, out_path, config_path, quantile, cap,
                          dump_path);
    }
    if (ev->parsed()) return cmd_eval(pred_paths, corpus_dir, out_path, config_path);
    if (hist->parsed()) return cmd_hist(corpus_dir, out_path, config_path, include_silence);
  } catch (const InvalidArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
