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

#pragma once

// Experiment lifecycle: data, partition, federated training, artifacts.
//
// Output directory contents for a single run:
//   metrics.csv      one row per round
//   energy.txt       SNN runs only; ANN twin energies alongside
//   config.resolved  every effective key, defaults included
//   model.ckpt       final global model
// With repetitions > 1 each run goes to rep_<i>/ with seed + i, and
// summary.csv holds the final accuracies with their mean and stddev.

#include "fedsnn/config.hpp"
#include "fedsnn/energy.hpp"
#include "fedsnn/federation.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fedsnn {

/// Data streams hang off a path disjoint from the federation streams and use
/// data_seed, which repetitions pin to the base seed.
inline constexpr std::uint64_t kDataStream = 4;

struct ExperimentData {
  Dataset train;
  Dataset validation;
  std::vector<ClientShard> shards;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

std::string metrics_csv(const std::vector<RoundMetrics>& rounds, bool record_wall_time);

/// Input spike rates on `validation` with the run's evaluation stream, then
/// the energy report of the SNN and its ANN twin.
EnergyReport experiment_energy(const Model& model, const Dataset& validation, std::uint64_t seed);

struct RunOutcome {
  FederationResult federation;
  std::optional<EnergyReport> energy;
};

/// One federated run with `config.federation.seed`, artifacts written to `dir`.
RunOutcome run_single(const ExperimentConfig& config, const ExperimentData& data, const std::filesystem::path& dir,
                      std::ostream* log = nullptr);

/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_stddev(const std::vector<double>& values);

/// All repetitions plus summary. Returns the final accuracy of each repetition.
std::vector<double> run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

}  // namespace fedsnn
