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

// fedsnn run <config> | validate <config> | energy <config> <checkpoint>
// Exit status: 0 success, 1 configuration error, 2 runtime error.

#include "fedsnn/checkpoint.hpp"
#include "fedsnn/config.hpp"
#include "fedsnn/experiment.hpp"
#include "fedsnn/format.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::string key_listing() {
  std::string out = "Config keys (key = default):\n";
  for (const auto& k : fedsnn::config_keys()) {
    std::string entry = "  " + std::string(k.name) + " = " + std::string(k.default_value);
    entry.resize(std::max<std::size_t>(entry.size() + 2, 36), ' ');
    out += entry + std::string(k.help) + "\n";
  }
  return out;
}

int run(const std::string& config_path) {
  const fedsnn::ExperimentConfig config = fedsnn::load_config_file(config_path);
  const auto finals = fedsnn::run_experiment(config, &std::cerr);
  for (std::size_t i = 0; i < finals.size(); ++i) {
    std::cout << "final_val_accuracy " << fedsnn::format_fixed(finals[i], 6) << "\n";
  }
  std::cout << "artifacts " << config.output_dir << "\n";
  return 0;
}

int validate(const std::string& config_path) {
  const fedsnn::ExperimentConfig config = fedsnn::load_config_file(config_path);
  std::cout << fedsnn::resolved_config_text(config);
  return 0;
}

int energy(const std::string& config_path, const std::string& checkpoint_path) {
  const fedsnn::ExperimentConfig config = fedsnn::load_config_file(config_path);
  const fedsnn::Model model = fedsnn::load_checkpoint(checkpoint_path);
  if (!model.is_snn()) throw std::runtime_error("energy: checkpoint holds an ANN; spike rates need an SNN");
  const fedsnn::ModelSpec expected = fedsnn::make_model_spec(config);
  if (expected.layers != model.spec.layers || expected.input_shape != model.spec.input_shape) {
    throw std::runtime_error("energy: checkpoint layers do not match the config's model");
  }
  const fedsnn::ExperimentData data = fedsnn::load_experiment_data(config);
  std::cout << fedsnn::format_energy_report(fedsnn::experiment_energy(model, data.validation, config.federation.seed));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated training of spiking neural networks"};
  app.footer(key_listing());
  app.require_subcommand(1);
  std::string config_path, checkpoint_path;
  auto* run_cmd = app.add_subcommand("run", "train and write artifacts to output_dir");
  run_cmd->add_option("config", config_path, "config file")->required();
  auto* validate_cmd = app.add_subcommand("validate", "parse the config and print every effective key");
  validate_cmd->add_option("config", config_path, "config file")->required();
  auto* energy_cmd = app.add_subcommand("energy", "energy report for a saved SNN checkpoint");
  energy_cmd->add_option("config", config_path, "config file")->required();
  energy_cmd->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return run(config_path);
    if (*validate_cmd) return validate(config_path);
    return energy(config_path, checkpoint_path);
  } catch (const fedsnn::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
