// Copyright (c) the durhaz authors.
// Licensed under the Apache License, Version 2.0; see
// http://www.apache.org/licenses/LICENSE-2.0 for the full text.

// End-to-end tests against the built command-line binary; its path arrives in
// the DURHAZ_CLI environment variable set by CTest.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "durhaz/datasets.hpp"
#include "durhaz/generate.hpp"
#include "test_util.hpp"

using namespace durhaz;
using durhaz_test::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

std::string cli_path() {
  const char* p = std::getenv("DURHAZ_CLI");
  REQUIRE_MESSAGE(p != nullptr, "DURHAZ_CLI must point at the built binary");
  return p;
}

RunResult run_cli(const std::string& args, const TempDir& tmp) {
  const std::string log = tmp.str("cli_log.txt");
  const std::string cmd = cli_path() + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  r.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return r;
}

const char* kGeoConfig =
    "seed = 11\n"
    "corpus.utterance_count = 10\n"
    "corpus.phones_min = 3\n"
    "corpus.phones_max = 6\n"
    "corpus.phone.a = vowel geometric 0.3\n"
    "corpus.phone.pau = silence pointmass 8\n";

const char* kConstConfig =
    "seed = 5\n"
    "corpus.utterance_count = 40\n"
    "corpus.phones_min = 2\n"
    "corpus.phones_max = 5\n"
    "corpus.phone.a = vowel pointmass 7\n"
    "corpus.phone.k = plosive pointmass 7\n"
    "train.learning_rate = 0.05\n"
    "train.max_epochs = 10\n"
    "train.patience = 10\n"
    "train.dev_fraction = 0.1\n"
    "train.dense_widths = 8\n"
    "train.recurrent_width = 4\n";

}  // namespace

TEST_CASE("synth-data: file counts, manifest, determinism, ground truth") {
  TempDir tmp("cli_synth");
  write_text_file(tmp.str("geo.cfg"), kGeoConfig);

  auto r1 = run_cli("synth-data --config " + tmp.str("geo.cfg") + " --out " + tmp.str("c1"), tmp);
  CHECK(r1.code == 0);

  // 10 utterances: 10 .lab + 10 .csv + ground_truth.csv = 21 manifest entries
  const auto manifest = read_text_file(tmp.str("c1") + "/manifest.csv");
  const auto lines = split_char(trim(manifest), '\n');
  CHECK(lines.size() == 22);  // header + 21 entries
  CHECK(manifest.find("ground_truth.csv,") != std::string::npos);

  // geometric(0.3): true median 2
  const auto truth = read_text_file(tmp.str("c1") + "/ground_truth.csv");
  CHECK(truth.find("a,median,2\n") != std::string::npos);
  CHECK(truth.find("pau,median,8\n") != std::string::npos);

  // byte-identical on a second run with the same seed
  auto r2 = run_cli("synth-data --config " + tmp.str("geo.cfg") + " --out " + tmp.str("c2"), tmp);
  CHECK(r2.code == 0);
  CHECK(read_text_file(tmp.str("c2") + "/manifest.csv") == manifest);
  for (const auto& line : lines) {
    if (line.rfind("file,", 0) == 0) continue;
    const auto name = split_char(line, ',')[0];
    CHECK(read_text_file(tmp.str("c1") + "/" + name) ==
          read_text_file(tmp.str("c2") + "/" + name));
  }

  // a different seed changes the corpus
  auto r3 = run_cli("synth-data --config " + tmp.str("geo.cfg") + " --seed 999 --out " +
                        tmp.str("c3"),
                    tmp);
  CHECK(r3.code == 0);
  CHECK(read_text_file(tmp.str("c3") + "/manifest.csv") != manifest);
}

TEST_CASE("train + generate: end-to-end constant oracle, exit codes") {
  TempDir tmp("cli_train");
  write_text_file(tmp.str("const.cfg"), kConstConfig);
  REQUIRE(run_cli("synth-data --config " + tmp.str("const.cfg") + " --out " + tmp.str("corpus"),
                  tmp)
              .code == 0);

  // missing corpus directory is a data error naming the path
  auto missing = run_cli("train --config " + tmp.str("const.cfg") + " --corpus " +
                             tmp.str("nowhere") + " --system phone-dnn --out " +
                             tmp.str("m.model"),
                         tmp);
  CHECK(missing.code == 3);
  CHECK(missing.output.find("nowhere") != std::string::npos);

  // unknown system is a usage error
  CHECK(run_cli("train --config " + tmp.str("const.cfg") + " --corpus " + tmp.str("corpus") +
                    " --system phone-rnn --out " + tmp.str("m.model"),
                tmp)
            .code == 2);

  // --max-epochs 1 trains exactly one epoch
  auto one = run_cli("train --config " + tmp.str("const.cfg") + " --corpus " +
                         tmp.str("corpus") + " --system phone-dnn --max-epochs 1 --out " +
                         tmp.str("one.model"),
                     tmp);
  CHECK(one.code == 0);
  const auto curve = read_text_file(tmp.str("one.model") + ".curve.csv");
  CHECK(split_char(trim(curve), '\n').size() == 2);  // header + 1 epoch

  // full training on constant durations, then generation emits that constant
  auto train = run_cli("train --config " + tmp.str("const.cfg") + " --corpus " +
                           tmp.str("corpus") + " --system phone-dnn --out " +
                           tmp.str("const.model"),
                       tmp);
  REQUIRE(train.code == 0);
  auto gen = run_cli("generate --model " + tmp.str("const.model") + " --corpus " +
                         tmp.str("corpus") + " --out " + tmp.str("pred.csv") + " --config " +
                         tmp.str("const.cfg"),
                     tmp);
  REQUIRE(gen.code == 0);
  CHECK(gen.output.find("q=0.5") != std::string::npos);  // documented default
  for (const auto& row : parse_durations_csv(read_text_file(tmp.str("pred.csv")))) {
    CHECK(row.duration == 7);
  }

  // evaluating those predictions against the same corpus: rmse 0, all classes
  auto ev = run_cli("eval --pred " + tmp.str("pred.csv") + " --corpus " + tmp.str("corpus") +
                        " --out " + tmp.str("report.csv") + " --config " + tmp.str("const.cfg"),
                    tmp);
  REQUIRE(ev.code == 0);
  const auto report = read_text_file(tmp.str("report.csv"));
  CHECK(report.find("pred,all,0,0,undefined,") != std::string::npos);
}

TEST_CASE("generate: silence oracle pausing and hazard dump consistency") {
  TempDir tmp("cli_gen");
  write_text_file(tmp.str("geo.cfg"), std::string(kGeoConfig) +
                                          "train.max_epochs = 3\n"
                                          "train.patience = 3\n"
                                          "train.dev_fraction = 0.2\n"
                                          "train.dense_widths = 8\n"
                                          "train.recurrent_width = 4\n");
  REQUIRE(run_cli("synth-data --config " + tmp.str("geo.cfg") + " --out " + tmp.str("corpus"),
                  tmp)
              .code == 0);
  REQUIRE(run_cli("train --config " + tmp.str("geo.cfg") + " --corpus " + tmp.str("corpus") +
                      " --system frame-lstm-e --out " + tmp.str("fe.model"),
                  tmp)
              .code == 0);
  auto gen = run_cli("generate --model " + tmp.str("fe.model") + " --corpus " +
                         tmp.str("corpus") + " --out " + tmp.str("pred.csv") +
                         " --dump-hazards " + tmp.str("haz.csv") + " --config " +
                         tmp.str("geo.cfg"),
                     tmp);
  REQUIRE(gen.code == 0);

  // silence phones pass their reference durations through (pointmass 8)
  const auto rows = parse_durations_csv(read_text_file(tmp.str("pred.csv")));
  int silences = 0;
  for (const auto& row : rows) {
    if (row.label == "pau") {
      CHECK(row.duration == 8);
      ++silences;
    }
  }
  CHECK(silences > 0);

  // the dumped survival mass crosses 0.5 exactly at each emitted duration
  std::map<std::pair<std::string, int>, std::vector<std::pair<double, double>>> by_phone;
  const auto haz = read_text_file(tmp.str("haz.csv"));
  bool header = true;
  for (const auto& line : split_char(trim(haz), '\n')) {
    if (header) {
      header = false;
      continue;
    }
    const auto f = split_char(line, ',');
    REQUIRE(f.size() == 5);
    by_phone[{f[0], std::stoi(f[2])}].emplace_back(std::stod(f[3]), std::stod(f[4]));
  }
  for (const auto& row : rows) {
    if (row.label == "pau") continue;  // oracle phones are not dumped
    const auto it = by_phone.find({row.utterance, row.phone});
    REQUIRE(it != by_phone.end());
    const auto& frames = it->second;
    CHECK(static_cast<int>(frames.size()) == row.duration);
    if (!row.truncated) {
      CHECK(frames.back().second <= 0.5);
      if (frames.size() > 1) CHECK(frames[frames.size() - 2].second > 0.5);
    }
  }

  // bad quantile is a usage error
  CHECK(run_cli("generate --model " + tmp.str("fe.model") + " --corpus " + tmp.str("corpus") +
                    " --out " + tmp.str("p2.csv") + " --quantile 1.5",
                tmp)
            .code == 2);
  // unknown flag is a usage error
  CHECK(run_cli("generate --definitely-not-a-flag", tmp).code == 2);
}

TEST_CASE("eval: id mismatch, crossover flag on constructed fixtures") {
  TempDir tmp("cli_eval");
  std::filesystem::create_directories(tmp.str("corpus"));
  // one-utterance corpus, four non-silence phones with durations 1,1,1,9
  write_text_file(tmp.str("corpus/u1.lab"),
                  "0 50000 a\n50000 100000 a\n100000 150000 a\n150000 600000 a\n");
  write_text_file(tmp.str("corpus/u1.csv"), "a,0.5\na,0.5\na,0.5\na,0.5\n");

  auto mkpred = [&](const std::string& name, std::vector<int> durations) {
    std::vector<DurationRow> rows;
    for (std::size_t p = 0; p < durations.size(); ++p) {
      rows.push_back({"u1", static_cast<int>(p), "a", durations[p], false});
    }
    write_text_file(tmp.str(name), format_durations_csv(rows));
  };
  // constant 1: mae 2, rmse 4; constant 3: mae 3, rmse sqrt(12) ~ 3.46
  mkpred("med.csv", {1, 1, 1, 1});
  mkpred("mean.csv", {3, 3, 3, 3});

  auto crossed = run_cli("eval --pred " + tmp.str("med.csv") + " --pred " +
                             tmp.str("mean.csv") + " --corpus " + tmp.str("corpus") +
                             " --out " + tmp.str("r.csv"),
                         tmp);
  REQUIRE(crossed.code == 0);
  CHECK(crossed.output.find("tradeoff: med beats mean on mae") != std::string::npos);
  const auto cmp = read_text_file(tmp.str("r.csv") + ".compare.csv");
  CHECK(cmp.find("tradeoff,mae_rmse,med,mean,") != std::string::npos);

  // uncrossed fixture: perfect predictions dominate, no flag
  mkpred("exact.csv", {1, 1, 1, 9});
  auto clean = run_cli("eval --pred " + tmp.str("exact.csv") + " --pred " +
                           tmp.str("mean.csv") + " --corpus " + tmp.str("corpus") +
                           " --out " + tmp.str("r2.csv"),
                       tmp);
  REQUIRE(clean.code == 0);
  CHECK(read_text_file(tmp.str("r2.csv") + ".compare.csv").find("tradeoff,") ==
        std::string::npos);

  // missing utterance: data error listing the id
  std::vector<DurationRow> wrong{{"u9", 0, "a", 1, false}};
  write_text_file(tmp.str("wrong.csv"), format_durations_csv(wrong));
  auto mismatch = run_cli("eval --pred " + tmp.str("wrong.csv") + " --corpus " +
                              tmp.str("corpus") + " --out " + tmp.str("r3.csv"),
                          tmp);
  CHECK(mismatch.code == 3);
  CHECK(mismatch.output.find("u1") != std::string::npos);
}

TEST_CASE("train --jobs: parallel system runs reproduce sequential outputs") {
  TempDir tmp("cli_jobs");
  write_text_file(tmp.str("const.cfg"), std::string(kConstConfig) +
                                            "train.max_epochs = 3\n"
                                            "train.patience = 3\n");
  REQUIRE(run_cli("synth-data --config " + tmp.str("const.cfg") + " --out " + tmp.str("corpus"),
                  tmp)
              .code == 0);
  REQUIRE(run_cli("train --config " + tmp.str("const.cfg") + " --corpus " + tmp.str("corpus") +
                      " --system all --out " + tmp.str("seq"),
                  tmp)
              .code == 0);
  REQUIRE(run_cli("train --config " + tmp.str("const.cfg") + " --corpus " + tmp.str("corpus") +
                      " --system all --jobs 4 --out " + tmp.str("par"),
                  tmp)
              .code == 0);
  for (const char* system : {"phone-dnn", "phone-lstm", "frame-lstm-i", "frame-lstm-e"}) {
    const std::string name = std::string(system) + ".model";
    CHECK(read_text_file(tmp.str("seq") + "/" + name) ==
          read_text_file(tmp.str("par") + "/" + name));
  }
}

TEST_CASE("hist: geometric corpus has modal duration 1") {
  TempDir tmp("cli_hist");
  std::string cfg(kGeoConfig);
  cfg.replace(cfg.find("corpus.utterance_count = 10"),
              std::string("corpus.utterance_count = 10").size(),
              "corpus.utterance_count = 80");
  write_text_file(tmp.str("geo.cfg"), cfg);
  REQUIRE(run_cli("synth-data --config " + tmp.str("geo.cfg") + " --out " + tmp.str("corpus"),
                  tmp)
              .code == 0);
  auto hist = run_cli("hist --corpus " + tmp.str("corpus") + " --out " + tmp.str("h.csv") +
                          " --config " + tmp.str("geo.cfg"),
                      tmp);
  REQUIRE(hist.code == 0);

  auto total_count = [&](const std::string& file) {
    std::size_t total = 0;
    for (const auto& line : split_char(trim(read_text_file(file)), '\n')) {
      const auto f = split_char(line, ',');
      if (f.size() != 2 || !isdigit(static_cast<unsigned char>(f[0][0]))) continue;
      total += std::stoul(f[1]);
    }
    return total;
  };
  std::size_t count_at_1 = 0, max_count = 0;
  for (const auto& line : split_char(trim(read_text_file(tmp.str("h.csv"))), '\n')) {
    const auto f = split_char(line, ',');
    if (f.size() != 2 || f[0] == "duration" || !isdigit(static_cast<unsigned char>(f[0][0]))) {
      continue;
    }
    const std::size_t c = std::stoul(f[1]);
    if (f[0] == "1") count_at_1 = c;
    max_count = std::max(max_count, c);
  }
  CHECK(count_at_1 > 0);
  CHECK(count_at_1 == max_count);

  // silence phones are excluded by default; the flag brings them back
  auto with_sil = run_cli("hist --corpus " + tmp.str("corpus") + " --out " +
                              tmp.str("h2.csv") + " --config " + tmp.str("geo.cfg") +
                              " --include-silence",
                          tmp);
  REQUIRE(with_sil.code == 0);
  CHECK(total_count(tmp.str("h2.csv")) > total_count(tmp.str("h.csv")));
}
