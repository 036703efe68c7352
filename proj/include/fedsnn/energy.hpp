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

// Closed-form compute-energy estimate. Only multiply/accumulate work is
// counted; memory traffic is ignored. An ANN layer pays one MAC per
// operation; an SNN layer pays one accumulate per operation per input spike,
// i.e. ops * R * T accumulates for input spike rate R over T timesteps.

#include "fedsnn/dataset.hpp"
#include "fedsnn/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fedsnn {

/// Per-operation energies in units of 0.1 pJ (45nm, 32-bit), kept integral so
/// the MAC/AC ratio is exact.
struct EnergyConstants {
  std::uint64_t mult_dpj = 31;
  std::uint64_t add_dpj = 1;
  std::uint64_t mac_dpj = 32;
  std::uint64_t ac_dpj = 1;

  double mult_pj() const { return double(mult_dpj) / 10.0; }
  double add_pj() const { return double(add_dpj) / 10.0; }
  double mac_pj() const { return double(mac_dpj) / 10.0; }
  double ac_pj() const { return double(ac_dpj) / 10.0; }

  void validate() const;
};

struct LayerOps {
  std::string name;
  LayerKind kind = LayerKind::linear;
  std::uint64_t ops = 0;
};

/// conv: M^2 * I * k^2 * O with M the output extent; linear: I * O; pooling: 0.
std::vector<LayerOps> count_ops(ModelSpec spec);

/// Mean input activity of every layer (spikes per neuron per timestep) over
/// inference on `data`. Indexed by layer.
std::vector<double> measure_spike_rate(const Model& model, const Dataset& data, const RngStream& encode_stream,
                                       Index batch_size = 64);

struct SnnActivity {
  std::vector<double> rates;  // per layer, as from measure_spike_rate
  int timesteps = 0;
};

struct EnergyRow {
  std::string name;
  std::uint64_t ops = 0;
  double rate = 0.0;
  double e_ann_pj = 0.0;
  double e_snn_pj = 0.0;
};

struct EnergyReport {
  std::vector<EnergyRow> rows;
  int timesteps = 0;
  bool has_snn = false;
  double total_ann_pj = 0.0;
  double total_snn_pj = 0.0;

  double total_ann_uj() const { return total_ann_pj * 1e-6; }
  double total_snn_uj() const { return total_snn_pj * 1e-6; }
  /// total ANN energy / total SNN energy (infinite when the SNN spends nothing).
  double ratio() const;
};

/// ANN energies always; SNN energies when `activity` is given, in which case
/// every layer with ops > 0 needs a rate.
EnergyReport estimate_energy(ModelSpec spec, const EnergyConstants& constants,
                             const std::optional<SnnActivity>& activity = std::nullopt);

/// One record per layer: name ops rate e_ann_uJ e_snn_uJ, then totals.
std::string format_energy_report(const EnergyReport& report);

}  // namespace fedsnn
