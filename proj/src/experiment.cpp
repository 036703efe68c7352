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

#include "fedsnn/experiment.hpp"

#include "fedsnn/checkpoint.hpp"
#include "fedsnn/format.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace fedsnn {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out.flush()) throw std::runtime_error("cannot write '" + path.string() + "'");
}

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) out += (out.empty() ? "" : ";") + std::to_string(id);
  return out;
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  const RngStream root = RngStream(config.data_seed.value_or(config.federation.seed)).child(kDataStream);
  ExperimentData data;
  if (config.dataset == DatasetKind::cifar10) {
    data.train = load_cifar10(config.cifar10_path, CifarSplit::train);
    data.validation = load_cifar10(config.cifar10_path, CifarSplit::test);
  } else {
    RngStream train_stream = root.child(0);
    data.train = gen_synthetic(config.synthetic, train_stream);
    SyntheticParams val = config.synthetic;
    val.per_class = config.synthetic_val_per_class;
    RngStream val_stream = root.child(1);
    data.validation = gen_synthetic(val, val_stream);
  }
  RngStream part = root.child(2);
  data.shards = config.partition == PartitionKind::iid
                    ? partition_iid(data.train, config.federation.clients, part)
                    : partition_dirichlet(data.train, config.federation.clients, config.alpha, part);
  return data;
}

std::string metrics_csv(const std::vector<RoundMetrics>& rounds, bool record_wall_time) {
  std::string out = "round,val_accuracy,train_loss,n_survivors,participant_ids,wall_ms\n";
  for (const auto& m : rounds) {
    out += std::to_string(m.round) + "," + format_fixed(m.val_accuracy, 6) + "," +
           (std::isnan(m.train_loss) ? std::string("nan") : format_fixed(m.train_loss, 6)) + "," +
           std::to_string(m.survivors.size()) + "," + join_ids(m.survivors) + "," +
           format_fixed(record_wall_time ? m.wall_ms : 0.0, 3) + "\n";
  }
  return out;
}

EnergyReport experiment_energy(const Model& model, const Dataset& validation, std::uint64_t seed) {
  const RngStream eval = RngStream(seed).child(kEvalStream);
  SnnActivity activity{measure_spike_rate(model, validation, eval), model.snn.timesteps};
  return estimate_energy(model.spec, EnergyConstants{}, activity);
}

RunOutcome run_single(const ExperimentConfig& config, const ExperimentData& data, const std::filesystem::path& dir,
                      std::ostream* log) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.resolved", resolved_config_text(config));
  const ModelSpec spec = make_model_spec(config);
  const auto on_round = [&](const RoundMetrics& m) {
    if (!log) return;
    *log << "round " << m.round + 1 << "/" << config.federation.rounds << " val_accuracy "
         << format_fixed(m.val_accuracy, 4) << " survivors " << m.survivors.size()
         << (m.failed ? " (failed: no update)" : "") << "\n";
  };
  RunOutcome outcome{run_federation(config.federation, data.train, data.validation, data.shards, spec, config.snn,
                                    on_round),
                     std::nullopt};
  write_text(dir / "metrics.csv", metrics_csv(outcome.federation.rounds, config.record_wall_time));
  if (outcome.federation.model.is_snn()) {
    outcome.energy = experiment_energy(outcome.federation.model, data.validation, config.federation.seed);
    write_text(dir / "energy.txt", format_energy_report(*outcome.energy));
  }
  save_checkpoint(outcome.federation.model, dir / "model.ckpt");
  return outcome;
}

double sample_stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / double(values.size() - 1));
}

std::vector<double> run_experiment(const ExperimentConfig& config, std::ostream* log) {
  const ExperimentData data = load_experiment_data(config);
  const std::filesystem::path root = config.output_dir;
  if (config.repetitions == 1) {
    const RunOutcome out = run_single(config, data, root, log);
    return {out.federation.rounds.back().val_accuracy};
  }
  std::filesystem::create_directories(root);
  write_text(root / "config.resolved", resolved_config_text(config));
  std::vector<double> finals;
  std::string summary = "repetition,seed,final_val_accuracy\n";
  for (int i = 0; i < config.repetitions; ++i) {
    ExperimentConfig rep = config;
    rep.federation.seed = config.federation.seed + std::uint64_t(i);
    rep.data_seed = config.data_seed.value_or(config.federation.seed);
    if (log) *log << "repetition " << i << " seed " << rep.federation.seed << "\n";
    const RunOutcome out = run_single(rep, data, root / ("rep_" + std::to_string(i)), log);
    finals.push_back(out.federation.rounds.back().val_accuracy);
    summary += std::to_string(i) + "," + std::to_string(rep.federation.seed) + "," + format_fixed(finals.back(), 6) + "\n";
  }
  const double mean = std::accumulate(finals.begin(), finals.end(), 0.0) / double(finals.size());
  summary += "mean,," + format_fixed(mean, 6) + "\n";
  summary += "stddev,," + format_fixed(sample_stddev(finals), 6) + "\n";
  write_text(root / "summary.csv", summary);
  return finals;
}

}  // namespace fedsnn
