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

// Experiment configuration: a flat `key = value` file, one entry per line,
// `#` starts a comment. Every key is optional; see config_keys() for the
// defaults. parse_config reports every problem it finds, not just the first.

#include "fedsnn/dataset.hpp"
#include "fedsnn/federation.hpp"
#include "fedsnn/model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedsnn {

enum class DatasetKind { synthetic, cifar10 };
enum class PartitionKind { iid, dirichlet };

struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::synthetic;
  std::string cifar10_path;
  SyntheticParams synthetic;
  int synthetic_val_per_class = 50;

  PartitionKind partition = PartitionKind::iid;
  double alpha = 0.5;

  ModelKind model_kind = ModelKind::snn;
  std::string layers;
  bool bntt = true;
  SnnConfig snn;

  FederationConfig federation;
  std::optional<std::uint64_t> data_seed;  // dataset and partition; unset follows federation.seed

  int repetitions = 1;
  std::string output_dir;
  bool record_wall_time = true;

  bool operator==(const ExperimentConfig&) const;
};

/// All violations found while parsing, each prefixed with its line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

const std::vector<ConfigKey>& config_keys();

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config_file(const std::string& path);

/// Every effective parameter, defaults included, in parse_config syntax.
std::string resolved_config_text(const ExperimentConfig& config);

/// Layer list syntax: comma-separated `conv<k>x<out>`, `avgpool`,
/// `linear<out>`; a bare `linear` outputs `classes` features.
std::vector<LayerSpec> parse_layers(std::string_view text, const Shape& input_shape, Index classes);
std::string format_layers(const std::vector<LayerSpec>& layers);

Shape dataset_input_shape(const ExperimentConfig& config);
Index dataset_class_count(const ExperimentConfig& config);
ModelSpec make_model_spec(const ExperimentConfig& config);

}  // namespace fedsnn
