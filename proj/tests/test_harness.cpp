// Copyright 2026 The fedsnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedsnn/checkpoint.hpp"
#include "fedsnn/config.hpp"
#include "fedsnn/experiment.hpp"
#include "fedsnn/training.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fedsnn {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fedsnn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& text) { return std::size_t(std::count(text.begin(), text.end(), '\n')); }

std::string tiny_config(const fs::path& out, const std::string& extra = "", int rounds = 2) {
  return "synthetic_per_class = 10\n"
         "synthetic_val_per_class = 5\n"
         "synthetic_height = 8\n"
         "synthetic_width = 8\n"
         "layers = conv3x4,avgpool,linear\n"
         "timesteps = 4\n"
         "clients = 4\n"
         "participants = 2\n"
         "local_epochs = 1\n"
         "batch_size = 8\n"
         "record_wall_time = false\n"
         "output_dir = " +
         out.string() + "\nrounds = " + std::to_string(rounds) + "\n" + extra;
}

std::vector<std::string> problems_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

TEST(Config, EmptyFileGivesDefaults) {
  const ExperimentConfig c = parse_config("# nothing\n\n");
  EXPECT_EQ(c.dataset, DatasetKind::synthetic);
  EXPECT_EQ(c.model_kind, ModelKind::snn);
  EXPECT_EQ(c.federation.clients, 10);
  EXPECT_EQ(c.federation.participants, 5);
  EXPECT_EQ(c.snn.timesteps, 20);
  EXPECT_FLOAT_EQ(c.snn.leak, 0.9f);
  EXPECT_FLOAT_EQ(c.federation.sgd.momentum, 0.95f);
  EXPECT_TRUE(c.bntt);
  EXPECT_FALSE(c.data_seed.has_value());
  for (const ConfigKey& key : config_keys()) EXPECT_FALSE(key.help.empty()) << key.name;
}

TEST(Config, ParticipantsAboveClientsNamesTheConstraint) {
  const auto p = problems_of("clients = 3\nparticipants = 4\n");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NE(p[0].find("participants"), std::string::npos) << p[0];
  EXPECT_NE(p[0].find("clients"), std::string::npos) << p[0];
  EXPECT_NE(p[0].find("line 2"), std::string::npos) << p[0];
}

TEST(Config, DuplicateKeyNamesBothLines) {
  const auto p = problems_of("rounds = 3\nlr = 0.1\nrounds = 4\n");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NE(p[0].find("line 3"), std::string::npos) << p[0];
  EXPECT_NE(p[0].find("line 1"), std::string::npos) << p[0];
}

TEST(Config, ReportsEveryProblem) {
  const auto p = problems_of("bogus = 1\nrounds = many\nleak = 1.5\ntimesteps = 0\n");
  EXPECT_GE(p.size(), 4u);
  EXPECT_THROW(parse_config("bogus = 1"), ConfigError);
}

TEST(Config, ResolvedTextRoundTrips) {
  const ExperimentConfig c =
      parse_config("model_kind = ann\nalpha = 0.125\npartition = dirichlet\nlr = 0.03\nthreshold = 0.5,1.25\n"
                   "layers = conv3x8,avgpool,conv3x8,avgpool,linear\ndata_seed = 77\nlr_schedule = none\n");
  const std::string text = resolved_config_text(c);
  const ExperimentConfig back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(resolved_config_text(back), text);
  EXPECT_EQ(line_count(text), config_keys().size());
}

TEST(Config, LayerSyntax) {
  const auto layers = parse_layers("conv3x8,avgpool,linear32,linear", {1, 16, 16}, 4);
  ASSERT_EQ(layers.size(), 4u);
  EXPECT_EQ(layers[2].in, 8 * 8 * 8);
  EXPECT_EQ(layers[3].out, 4);
  EXPECT_EQ(format_layers(layers), "conv3x8,avgpool,linear32,linear4");
  EXPECT_THROW(parse_layers("conv3x8,pool,linear", {1, 16, 16}, 4), std::invalid_argument);
}

TEST(Checkpoint, RoundTripKeepsAccuracy) {
  const fs::path dir = scratch("ckpt");
  for (const char* kind : {"snn", "ann"}) {
    const ExperimentConfig c = parse_config(tiny_config(dir, std::string("model_kind = ") + kind + "\n"));
    const ExperimentData data = load_experiment_data(c);
    const RunOutcome out = run_single(c, data, dir);
    const Model loaded = load_checkpoint(dir / "model.ckpt");
    EXPECT_EQ(flatten(loaded).values, flatten(out.federation.model).values);
    EXPECT_EQ(bntt_buffers(loaded), bntt_buffers(out.federation.model));
    EXPECT_EQ(checkpoint_header(loaded), checkpoint_header(out.federation.model));
    const RngStream eval(5);
    EXPECT_EQ(evaluate_accuracy(loaded, data.validation, eval), evaluate_accuracy(out.federation.model, data.validation, eval));
  }
}

TEST(Checkpoint, RejectsDamage) {
  const fs::path dir = scratch("ckpt_bad");
  RngStream init(1);
  ModelSpec spec;
  spec.input_shape = {1, 4, 4};
  spec.class_count = 2;
  spec.layers = {LayerSpec::dense(16, 2)};
  save_checkpoint(build_model(spec, SnnConfig{}, init), dir / "m.ckpt");
  const std::string good = slurp(dir / "m.ckpt");
  const auto write = [&](const std::string& bytes) {
    std::ofstream(dir / "x.ckpt", std::ios::binary) << bytes;
    return dir / "x.ckpt";
  };
  EXPECT_NO_THROW(load_checkpoint(write(good)));
  EXPECT_THROW(load_checkpoint(write("NOTACKPT" + good.substr(8))), std::runtime_error);
  EXPECT_THROW(load_checkpoint(write(good.substr(0, good.size() - 3))), std::runtime_error);
  EXPECT_THROW(load_checkpoint(write(good + "x")), std::runtime_error);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), std::runtime_error);
}

TEST(Experiment, WritesArtifacts) {
  const fs::path dir = scratch("artifacts");
  run_experiment(parse_config(tiny_config(dir)));
  for (const char* f : {"metrics.csv", "energy.txt", "config.resolved", "model.ckpt"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const std::string csv = slurp(dir / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "round,val_accuracy,train_loss,n_survivors,participant_ids,wall_ms");
  EXPECT_EQ(parse_config(slurp(dir / "config.resolved")), parse_config(tiny_config(dir)));
  EXPECT_NE(slurp(dir / "energy.txt").find("ratio_ann_over_snn"), std::string::npos);
}

TEST(Experiment, RepeatRunsAreByteIdentical) {
  const fs::path a = scratch("repeat_a"), b = scratch("repeat_b");
  const std::string extra = "straggler_prob = 0.3\nnoise_strength = 0.01\npartition = dirichlet\n";
  run_experiment(parse_config(tiny_config(a, extra)));
  run_experiment(parse_config(tiny_config(b, extra + "workers = 3\n")));
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "model.ckpt"), slurp(b / "model.ckpt"));
}

TEST(Experiment, HundredRoundsHundredRows) {
  const fs::path dir = scratch("hundred");
  run_experiment(parse_config(tiny_config(dir, "model_kind = ann\nlr_schedule = none\n", 100)));
  EXPECT_EQ(line_count(slurp(dir / "metrics.csv")), 101u);
}

TEST(Experiment, RepetitionsSummary) {
  const fs::path dir = scratch("reps");
  const std::vector<double> acc = run_experiment(parse_config(tiny_config(dir, "repetitions = 3\nseed = 10\n")));
  ASSERT_EQ(acc.size(), 3u);
  const std::string summary = slurp(dir / "summary.csv");
  EXPECT_EQ(line_count(summary), 6u) << summary;
  EXPECT_NE(summary.find("\n2,12,"), std::string::npos) << summary;
  EXPECT_NE(summary.find("\nmean,,"), std::string::npos) << summary;
  EXPECT_NE(summary.find("\nstddev,,"), std::string::npos) << summary;
  // Every repetition trains on the same data.
  const ExperimentConfig r0 = parse_config(slurp(dir / "rep_0" / "config.resolved"));
  const ExperimentConfig r2 = parse_config(slurp(dir / "rep_2" / "config.resolved"));
  EXPECT_EQ(r2.federation.seed, 12u);
  EXPECT_EQ(load_experiment_data(r0).shards[1].indices, load_experiment_data(r2).shards[1].indices);
}

TEST(Experiment, SampleStddev) {
  EXPECT_EQ(sample_stddev({}), 0.0);
  EXPECT_EQ(sample_stddev({3.0}), 0.0);
  EXPECT_DOUBLE_EQ(sample_stddev({1.0, 2.0, 3.0, 4.0}), std::sqrt(5.0 / 3.0));
}

int cli(const std::string& args) {
  const int status = std::system((std::string(FEDSNN_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  std::ofstream(dir / "good.cfg") << tiny_config(dir / "out");
  std::ofstream(dir / "bad.cfg") << "clients = 2\nparticipants = 3\n";
  EXPECT_EQ(cli("validate " + (dir / "good.cfg").string()), 0);
  EXPECT_EQ(cli("validate " + (dir / "bad.cfg").string()), 1);
  EXPECT_EQ(cli("validate " + (dir / "absent.cfg").string()), 1);
  EXPECT_EQ(cli("frobnicate"), 1);
  EXPECT_EQ(cli("run " + (dir / "good.cfg").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.csv"));
  EXPECT_EQ(cli("energy " + (dir / "good.cfg").string() + " " + (dir / "out" / "model.ckpt").string()), 0);
  EXPECT_EQ(cli("energy " + (dir / "good.cfg").string() + " " + (dir / "bad.cfg").string()), 2);
}

}  // namespace
}  // namespace fedsnn
