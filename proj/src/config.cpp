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

#include "fedsnn/config.hpp"

#include "fedsnn/format.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fedsnn {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto at = s.find(sep);
    out.push_back(trim(s.substr(0, at)));
    if (at == std::string_view::npos) break;
    s.remove_prefix(at + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, const char* what) {
  T value{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("expects ") + what + ", got '" + std::string(s) + "'");
  }
  return value;
}

int to_int(std::string_view s) { return parse_number<int>(s, "an integer"); }
double to_double(std::string_view s) { return parse_number<double>(s, "a number"); }
float to_float(std::string_view s) { return parse_number<float>(s, "a number"); }

bool to_bool(std::string_view s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw std::invalid_argument("expects true or false, got '" + std::string(s) + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

struct Field {
  ConfigKey key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {{"dataset", "synthetic", "synthetic | cifar10"},
       [](auto& c, auto v) {
         if (v == "synthetic") c.dataset = DatasetKind::synthetic;
         else if (v == "cifar10") c.dataset = DatasetKind::cifar10;
         else throw std::invalid_argument("expects synthetic or cifar10, got '" + std::string(v) + "'");
       },
       [](const auto& c) { return std::string(c.dataset == DatasetKind::synthetic ? "synthetic" : "cifar10"); }},
      {{"cifar10_path", "", "CIFAR-10 binary batch directory or file"},
       [](auto& c, auto v) { c.cifar10_path = std::string(v); }, [](const auto& c) { return c.cifar10_path; }},
      {{"synthetic_classes", "4", "number of stripe classes"},
       [](auto& c, auto v) { c.synthetic.classes = to_int(v); },
       [](const auto& c) { return std::to_string(c.synthetic.classes); }},
      {{"synthetic_per_class", "100", "training samples per class"},
       [](auto& c, auto v) { c.synthetic.per_class = to_int(v); },
       [](const auto& c) { return std::to_string(c.synthetic.per_class); }},
      {{"synthetic_val_per_class", "50", "held-out samples per class"},
       [](auto& c, auto v) { c.synthetic_val_per_class = to_int(v); },
       [](const auto& c) { return std::to_string(c.synthetic_val_per_class); }},
      {{"synthetic_height", "16", "image height"}, [](auto& c, auto v) { c.synthetic.height = to_int(v); },
       [](const auto& c) { return std::to_string(c.synthetic.height); }},
      {{"synthetic_width", "16", "image width"}, [](auto& c, auto v) { c.synthetic.width = to_int(v); },
       [](const auto& c) { return std::to_string(c.synthetic.width); }},
      {{"synthetic_channels", "1", "image channels"}, [](auto& c, auto v) { c.synthetic.channels = to_int(v); },
       [](const auto& c) { return std::to_string(c.synthetic.channels); }},
      {{"synthetic_noise", "0.1", "uniform pixel noise mix in [0,1]"},
       [](auto& c, auto v) { c.synthetic.noise = to_float(v); },
       [](const auto& c) { return format_exact(c.synthetic.noise); }},
      {{"partition", "iid", "iid | dirichlet"},
       [](auto& c, auto v) {
         if (v == "iid") c.partition = PartitionKind::iid;
         else if (v == "dirichlet") c.partition = PartitionKind::dirichlet;
         else throw std::invalid_argument("expects iid or dirichlet, got '" + std::string(v) + "'");
       },
       [](const auto& c) { return std::string(c.partition == PartitionKind::iid ? "iid" : "dirichlet"); }},
      {{"alpha", "0.5", "Dirichlet concentration"}, [](auto& c, auto v) { c.alpha = to_double(v); },
       [](const auto& c) { return format_exact(c.alpha); }},
      {{"model_kind", "snn", "snn | ann"},
       [](auto& c, auto v) {
         if (v == "snn") c.model_kind = ModelKind::snn;
         else if (v == "ann") c.model_kind = ModelKind::ann;
         else throw std::invalid_argument("expects snn or ann, got '" + std::string(v) + "'");
       },
       [](const auto& c) { return std::string(c.model_kind == ModelKind::snn ? "snn" : "ann"); }},
      {{"layers", "conv3x8,avgpool,conv3x16,avgpool,linear", "layer list"},
       [](auto& c, auto v) { c.layers = std::string(v); }, [](const auto& c) { return c.layers; }},
      {{"bntt", "true", "per-timestep batch normalization in SNN hidden layers"},
       [](auto& c, auto v) { c.bntt = to_bool(v); }, [](const auto& c) { return bool_text(c.bntt); }},
      {{"timesteps", "20", "SNN timesteps T"}, [](auto& c, auto v) { c.snn.timesteps = to_int(v); },
       [](const auto& c) { return std::to_string(c.snn.timesteps); }},
      {{"leak", "0.9", "membrane leak in (0,1)"}, [](auto& c, auto v) { c.snn.leak = to_float(v); },
       [](const auto& c) { return format_exact(c.snn.leak); }},
      {{"threshold", "1", "firing threshold, one value or one per hidden layer"},
       [](auto& c, auto v) {
         c.snn.thresholds.clear();
         for (auto part : split(v, ',')) c.snn.thresholds.push_back(to_float(part));
       },
       [](const auto& c) {
         std::string s;
         for (float t : c.snn.thresholds) s += (s.empty() ? "" : ",") + format_exact(t);
         return s;
       }},
      {{"surrogate_decay", "0.3", "surrogate gradient scale"},
       [](auto& c, auto v) { c.snn.surrogate_decay = to_float(v); },
       [](const auto& c) { return format_exact(c.snn.surrogate_decay); }},
      {{"clients", "10", "total clients N"}, [](auto& c, auto v) { c.federation.clients = to_int(v); },
       [](const auto& c) { return std::to_string(c.federation.clients); }},
      {{"participants", "5", "participants per round P"},
       [](auto& c, auto v) { c.federation.participants = to_int(v); },
       [](const auto& c) { return std::to_string(c.federation.participants); }},
      {{"rounds", "10", "federated rounds R"}, [](auto& c, auto v) { c.federation.rounds = to_int(v); },
       [](const auto& c) { return std::to_string(c.federation.rounds); }},
      {{"local_epochs", "2", "local epochs K"}, [](auto& c, auto v) { c.federation.local_epochs = to_int(v); },
       [](const auto& c) { return std::to_string(c.federation.local_epochs); }},
      {{"batch_size", "32", "local mini-batch size"}, [](auto& c, auto v) { c.federation.batch_size = to_int(v); },
       [](const auto& c) { return std::to_string(c.federation.batch_size); }},
      {{"straggler_prob", "0", "drop probability for all but the first participant"},
       [](auto& c, auto v) { c.federation.straggler_prob = to_double(v); },
       [](const auto& c) { return format_exact(c.federation.straggler_prob); }},
      {{"noise_strength", "0", "stddev of Gaussian noise added to updates"},
       [](auto& c, auto v) { c.federation.noise_strength = to_double(v); },
       [](const auto& c) { return format_exact(c.federation.noise_strength); }},
      {{"seed", "1", "master seed"},
       [](auto& c, auto v) { c.federation.seed = parse_number<std::uint64_t>(v, "an unsigned integer"); },
       [](const auto& c) { return std::to_string(c.federation.seed); }},
      {{"data_seed", "same", "seed for data generation and partitioning, or same (as seed)"},
       [](auto& c, auto v) {
         if (v == "same") c.data_seed.reset();
         else c.data_seed = parse_number<std::uint64_t>(v, "an unsigned integer or same");
       },
       [](const auto& c) { return c.data_seed ? std::to_string(*c.data_seed) : std::string("same"); }},
      {{"lr", "0.1", "initial learning rate"}, [](auto& c, auto v) { c.federation.sgd.learning_rate = to_float(v); },
       [](const auto& c) { return format_exact(c.federation.sgd.learning_rate); }},
      {{"momentum", "0.95", "SGD momentum"}, [](auto& c, auto v) { c.federation.sgd.momentum = to_float(v); },
       [](const auto& c) { return format_exact(c.federation.sgd.momentum); }},
      {{"weight_decay", "0", "L2 weight decay"},
       [](auto& c, auto v) { c.federation.sgd.weight_decay = to_float(v); },
       [](const auto& c) { return format_exact(c.federation.sgd.weight_decay); }},
      {{"lr_schedule", "40:5,60:5,80:5", "round:divisor pairs, or none"},
       [](auto& c, auto v) {
         c.federation.sgd.lr_schedule.clear();
         if (v == "none" || v.empty()) return;
         for (auto part : split(v, ',')) {
           const auto colon = part.find(':');
           if (colon == std::string_view::npos) {
             throw std::invalid_argument("expects round:divisor pairs, got '" + std::string(part) + "'");
           }
           c.federation.sgd.lr_schedule.emplace_back(to_int(trim(part.substr(0, colon))),
                                                     to_float(trim(part.substr(colon + 1))));
         }
       },
       [](const auto& c) {
         std::string s;
         for (const auto& [r, d] : c.federation.sgd.lr_schedule) {
           s += (s.empty() ? "" : ",") + std::to_string(r) + ":" + format_exact(d);
         }
         return s.empty() ? std::string("none") : s;
       }},
      {{"workers", "1", "concurrent client trainers"}, [](auto& c, auto v) { c.federation.workers = to_int(v); },
       [](const auto& c) { return std::to_string(c.federation.workers); }},
      {{"bn_stats", "average", "average | local"},
       [](auto& c, auto v) {
         if (v == "average") c.federation.bn_stats = BnStatsPolicy::average;
         else if (v == "local") c.federation.bn_stats = BnStatsPolicy::local;
         else throw std::invalid_argument("expects average or local, got '" + std::string(v) + "'");
       },
       [](const auto& c) { return std::string(c.federation.bn_stats == BnStatsPolicy::average ? "average" : "local"); }},
      {{"repetitions", "1", "seed-offset repetitions"}, [](auto& c, auto v) { c.repetitions = to_int(v); },
       [](const auto& c) { return std::to_string(c.repetitions); }},
      {{"output_dir", "out", "artifact directory"}, [](auto& c, auto v) { c.output_dir = std::string(v); },
       [](const auto& c) { return c.output_dir; }},
      {{"record_wall_time", "true", "write measured wall time (false writes 0)"},
       [](auto& c, auto v) { c.record_wall_time = to_bool(v); },
       [](const auto& c) { return bool_text(c.record_wall_time); }},
  };
  return table;
}

std::string join_problems(const std::vector<std::string>& problems) {
  std::string s = "invalid configuration:";
  for (const auto& p : problems) s += "\n  " + p;
  return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return resolved_config_text(*this) == resolved_config_text(other);
}

std::vector<LayerSpec> parse_layers(std::string_view text, const Shape& input_shape, Index classes) {
  std::vector<LayerSpec> layers;
  Shape shape = input_shape;
  for (auto token : split(text, ',')) {
    LayerSpec layer;
    if (token == "avgpool") {
      layer = LayerSpec::pool();
    } else if (token.starts_with("conv")) {
      const auto x = token.find('x');
      if (x == std::string_view::npos) throw std::invalid_argument("conv layer needs conv<k>x<out>, got '" + std::string(token) + "'");
      layer = LayerSpec::conv(to_int(token.substr(4, x - 4)), shape.empty() ? 0 : shape[0], to_int(token.substr(x + 1)));
    } else if (token.starts_with("linear")) {
      const Index out = token.size() == 6 ? classes : to_int(token.substr(6));
      layer = LayerSpec::dense(shape_size(shape), out);
    } else {
      throw std::invalid_argument("unknown layer '" + std::string(token) + "'");
    }
    shape = layer_output_shape(layer, shape);
    layers.push_back(layer);
  }
  return layers;
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (const auto& l : layers) {
    if (!out.empty()) out += ",";
    switch (l.kind) {
      case LayerKind::conv2d: out += "conv" + std::to_string(l.kernel) + "x" + std::to_string(l.out); break;
      case LayerKind::avgpool: out += "avgpool"; break;
      case LayerKind::linear: out += "linear" + std::to_string(l.out); break;
    }
  }
  return out;
}

Shape dataset_input_shape(const ExperimentConfig& c) {
  if (c.dataset == DatasetKind::cifar10) return {3, 32, 32};
  return {c.synthetic.channels, c.synthetic.height, c.synthetic.width};
}

Index dataset_class_count(const ExperimentConfig& c) {
  return c.dataset == DatasetKind::cifar10 ? 10 : c.synthetic.classes;
}

ModelSpec make_model_spec(const ExperimentConfig& c) {
  ModelSpec spec;
  spec.kind = c.model_kind;
  spec.input_shape = dataset_input_shape(c);
  spec.class_count = dataset_class_count(c);
  spec.layers = parse_layers(c.layers, spec.input_shape, spec.class_count);
  spec.bntt = c.bntt;
  spec.validate();
  return spec;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  for (const auto& f : fields()) f.set(config, f.key.default_value);

  std::vector<std::string> problems;
  std::map<std::string, int, std::less<>> seen;
  int line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      problems.push_back(where + "expected 'key = value', got '" + std::string(line) + "'");
      continue;
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto field = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return f.key.name == key; });
    if (field == fields().end()) {
      problems.push_back(where + "unknown key '" + std::string(key) + "'");
      continue;
    }
    if (auto prior = seen.find(key); prior != seen.end()) {
      problems.push_back(where + "duplicate key '" + std::string(key) + "' (first set on line " +
                         std::to_string(prior->second) + ")");
      continue;
    }
    seen.emplace(std::string(key), line_no);
    try {
      field->set(config, value);
    } catch (const std::invalid_argument& e) {
      problems.push_back(where + std::string(key) + " " + e.what());
    }
  }

  const auto at = [&](std::string_view key) {
    auto it = seen.find(key);
    return it == seen.end() ? std::string("default ") + std::string(key) + ": "
                            : "line " + std::to_string(it->second) + ": ";
  };
  const auto require = [&](bool ok, std::string_view key, const std::string& message) {
    if (!ok) problems.push_back(at(key) + message);
  };
  const auto& fed = config.federation;
  require(config.dataset != DatasetKind::cifar10 || !config.cifar10_path.empty(), "cifar10_path",
          "cifar10_path is required when dataset = cifar10");
  if (config.dataset == DatasetKind::synthetic) {
    require(config.synthetic.classes >= 2, "synthetic_classes", "synthetic_classes must be >= 2");
    require(config.synthetic.per_class >= 1, "synthetic_per_class", "synthetic_per_class must be >= 1");
    require(config.synthetic_val_per_class >= 1, "synthetic_val_per_class", "synthetic_val_per_class must be >= 1");
    require(config.synthetic.height >= 1 && config.synthetic.width >= 1, "synthetic_height", "image extents must be >= 1");
    require(config.synthetic.channels >= 1, "synthetic_channels", "synthetic_channels must be >= 1");
    require(config.synthetic.noise >= 0.0f && config.synthetic.noise <= 1.0f, "synthetic_noise",
            "synthetic_noise must lie in [0,1]");
  }
  require(config.alpha > 0.0, "alpha", "alpha must be > 0");
  require(fed.clients >= 1, "clients", "clients must be >= 1");
  require(fed.participants >= 1, "participants", "participants must be >= 1");
  require(fed.participants <= fed.clients, "participants",
          "participants = " + std::to_string(fed.participants) + " exceeds clients = " + std::to_string(fed.clients) +
              " (P <= N required)");
  require(fed.rounds >= 1, "rounds", "rounds must be >= 1");
  require(fed.local_epochs >= 1, "local_epochs", "local_epochs must be >= 1");
  require(fed.batch_size >= 1, "batch_size", "batch_size must be >= 1");
  require(!(config.model_kind == ModelKind::snn && config.bntt) || fed.batch_size >= 2, "batch_size",
          "batch_size must be >= 2 when bntt is enabled");
  require(fed.straggler_prob >= 0.0 && fed.straggler_prob <= 1.0, "straggler_prob", "straggler_prob must lie in [0,1]");
  require(fed.noise_strength >= 0.0, "noise_strength", "noise_strength must be >= 0");
  require(fed.sgd.learning_rate > 0.0f, "lr", "lr must be > 0");
  require(fed.sgd.momentum >= 0.0f && fed.sgd.momentum < 1.0f, "momentum", "momentum must lie in [0,1)");
  require(fed.sgd.weight_decay >= 0.0f, "weight_decay", "weight_decay must be >= 0");
  for (const auto& [r, d] : fed.sgd.lr_schedule) {
    require(r >= 0 && d > 0.0f, "lr_schedule", "lr_schedule entries need round >= 0 and divisor > 0");
  }
  require(fed.workers >= 1, "workers", "workers must be >= 1");
  require(config.repetitions >= 1, "repetitions", "repetitions must be >= 1");
  require(!config.output_dir.empty(), "output_dir", "output_dir must not be empty");

  const auto& snn = config.snn;
  const std::size_t before_snn = problems.size();
  if (config.model_kind == ModelKind::snn) {
    require(snn.timesteps >= 1, "timesteps", "timesteps must be >= 1");
    require(snn.leak > 0.0f && snn.leak < 1.0f, "leak", "leak must lie in (0,1)");
    require(snn.surrogate_decay > 0.0f, "surrogate_decay", "surrogate_decay must be > 0");
    require(std::all_of(snn.thresholds.begin(), snn.thresholds.end(), [](float v) { return v > 0.0f; }), "threshold",
            "thresholds must be > 0");
  }

  try {
    const ModelSpec spec = make_model_spec(config);
    // Remaining SNN checks depend on the layer count.
    if (config.model_kind == ModelKind::snn && problems.size() == before_snn) {
      try {
        snn.validate(spec.hidden_layers().size());
      } catch (const std::invalid_argument& e) {
        problems.push_back(at("threshold") + "threshold: " + e.what());
      }
    }
  } catch (const std::invalid_argument& e) {
    problems.push_back(at("layers") + "layers: " + e.what());
  }

  if (!problems.empty()) throw ConfigError(std::move(problems));
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolved_config_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key.name) + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace fedsnn
