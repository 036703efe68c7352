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

#include "fedsnn/energy.hpp"

#include "fedsnn/format.hpp"
#include "fedsnn/network.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fedsnn {

void EnergyConstants::validate() const {
  if (mac_dpj != mult_dpj + add_dpj) throw std::invalid_argument("energy constants: E_MAC must equal E_Mult + E_Add");
  if (ac_dpj == 0 || mac_dpj == 0) throw std::invalid_argument("energy constants must be positive");
}

std::vector<LayerOps> count_ops(ModelSpec spec) {
  spec.validate();
  std::vector<LayerOps> out;
  Shape shape = spec.input_shape;
  for (const auto& layer : spec.layers) {
    const Shape next = layer_output_shape(layer, shape);
    LayerOps row{layer.name, layer.kind, 0};
    switch (layer.kind) {
      case LayerKind::conv2d: {
        // M^2 generalized to H*W for non-square maps.
        const auto area = std::uint64_t(next[1]) * std::uint64_t(next[2]);
        row.ops = area * std::uint64_t(layer.in) * std::uint64_t(layer.kernel * layer.kernel) * std::uint64_t(layer.out);
        break;
      }
      case LayerKind::linear: row.ops = std::uint64_t(layer.in) * std::uint64_t(layer.out); break;
      case LayerKind::avgpool: break;
    }
    out.push_back(std::move(row));
    shape = next;
  }
  return out;
}

std::vector<double> measure_spike_rate(const Model& model, const Dataset& data, const RngStream& encode_stream,
                                       Index batch_size) {
  if (!model.is_snn()) throw std::invalid_argument("measure_spike_rate: model kind is not SNN");
  ActivityStats stats;
  stats.input_sum.assign(model.layers.size(), 0.0);
  stats.input_count.assign(model.layers.size(), 0.0);
  std::vector<std::size_t> idx;
  for (Index start = 0; start < data.size(); start += batch_size) {
    idx.resize(std::size_t(std::min(batch_size, data.size() - start)));
    std::iota(idx.begin(), idx.end(), std::size_t(start));
    const Batch batch = data.gather(idx);
    snn_infer(model, poisson_encode_batch(batch.images, model.snn.timesteps, encode_stream, batch.sample_ids), &stats);
  }
  std::vector<double> rates;
  for (std::size_t i = 0; i < model.layers.size(); ++i) rates.push_back(stats.rate(i));
  return rates;
}

double EnergyReport::ratio() const {
  if (total_snn_pj == 0.0) return std::numeric_limits<double>::infinity();
  return total_ann_pj / total_snn_pj;
}

EnergyReport estimate_energy(ModelSpec spec, const EnergyConstants& constants, const std::optional<SnnActivity>& activity) {
  constants.validate();
  const std::vector<LayerOps> ops = count_ops(std::move(spec));
  EnergyReport report;
  report.has_snn = activity.has_value();
  if (activity) {
    if (activity->timesteps < 1) throw std::invalid_argument("estimate_energy: timesteps must be >= 1");
    report.timesteps = activity->timesteps;
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    EnergyRow row{ops[i].name, ops[i].ops, 0.0, 0.0, 0.0};
    row.e_ann_pj = double(ops[i].ops * constants.mac_dpj) / 10.0;
    if (activity && ops[i].ops > 0) {
      if (i >= activity->rates.size() || !(activity->rates[i] >= 0.0)) {
        throw std::invalid_argument("estimate_energy: no spike rate for layer '" + ops[i].name + "'");
      }
      row.rate = activity->rates[i];
      row.e_snn_pj = double(ops[i].ops * constants.ac_dpj) * row.rate * double(activity->timesteps) / 10.0;
    } else if (activity && i < activity->rates.size()) {
      row.rate = activity->rates[i];
    }
    report.total_ann_pj += row.e_ann_pj;
    report.total_snn_pj += row.e_snn_pj;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_energy_report(const EnergyReport& report) {
  std::string out = "# layer ops rate e_ann_uJ e_snn_uJ";
  if (report.has_snn) out += " (T=" + std::to_string(report.timesteps) + ")";
  out += "\n";
  for (const auto& row : report.rows) {
    out += row.name + " " + std::to_string(row.ops) + " " + format_fixed(row.rate, 6) + " " +
           format_fixed(row.e_ann_pj * 1e-6, 6) + " " + format_fixed(row.e_snn_pj * 1e-6, 6) + "\n";
  }
  out += "total - - " + format_fixed(report.total_ann_uj(), 6) + " " + format_fixed(report.total_snn_uj(), 6) + "\n";
  if (report.has_snn) {
    const double r = report.ratio();
    out += "ratio_ann_over_snn " + (std::isinf(r) ? std::string("inf") : format_fixed(r, 4)) + "\n";
  }
  return out;
}

}  // namespace fedsnn
