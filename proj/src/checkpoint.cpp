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

#include "fedsnn/format.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fedsnn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'F', 'S', 'N', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) throw std::runtime_error("checkpoint: truncated file");
  return value;
}

void put_floats(std::ostream& out, const Tensor& t) {
  put<std::uint64_t>(out, std::uint64_t(t.size()));
  out.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.size() * sizeof(float)));
}

Tensor get_floats(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (std::uint64_t(1) << 34)) throw std::runtime_error("checkpoint: implausible value count");
  Tensor t(Shape{Index(n)});
  if (!in.read(reinterpret_cast<char*>(t.data()), std::streamsize(n * sizeof(float)))) {
    throw std::runtime_error("checkpoint: truncated file");
  }
  return t;
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (Index d : s) out += (out.empty() ? "" : "x") + std::to_string(d);
  return out.empty() ? "-" : out;
}

const char* role_text(ParamRole r) {
  switch (r) {
    case ParamRole::weight: return "weight";
    case ParamRole::bias: return "bias";
    case ParamRole::gamma: return "gamma";
  }
  return "?";
}

std::string layers_text(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (const auto& l : layers) {
    if (!out.empty()) out += ",";
    switch (l.kind) {
      case LayerKind::conv2d:
        out += "conv:" + std::to_string(l.kernel) + ":" + std::to_string(l.in) + ":" + std::to_string(l.out);
        break;
      case LayerKind::avgpool: out += "avgpool"; break;
      case LayerKind::linear: out += "linear:" + std::to_string(l.in) + ":" + std::to_string(l.out); break;
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
  return out;
}

template <typename T>
T number(const std::string& s) {
  T value{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("checkpoint: bad number '" + s + "'");
  }
  return value;
}

std::vector<LayerSpec> layers_from_text(const std::string& text) {
  std::vector<LayerSpec> layers;
  for (const auto& token : split(text, ',')) {
    const auto f = split(token, ':');
    if (f[0] == "avgpool" && f.size() == 1) {
      layers.push_back(LayerSpec::pool());
    } else if (f[0] == "conv" && f.size() == 4) {
      layers.push_back(LayerSpec::conv(number<Index>(f[1]), number<Index>(f[2]), number<Index>(f[3])));
    } else if (f[0] == "linear" && f.size() == 3) {
      layers.push_back(LayerSpec::dense(number<Index>(f[1]), number<Index>(f[2])));
    } else {
      throw std::runtime_error("checkpoint: bad layer '" + token + "'");
    }
  }
  return layers;
}

Shape shape_from_text(const std::string& text) {
  Shape s;
  if (text == "-") return s;
  for (const auto& d : split(text, 'x')) s.push_back(number<Index>(d));
  return s;
}

}  // namespace

std::string checkpoint_header(const Model& model) {
  std::string h;
  h += "kind = " + std::string(model.is_snn() ? "snn" : "ann") + "\n";
  h += "input_shape = " + shape_text(model.spec.input_shape) + "\n";
  h += "classes = " + std::to_string(model.spec.class_count) + "\n";
  h += "bntt = " + std::string(model.spec.bntt ? "true" : "false") + "\n";
  h += "layers = " + layers_text(model.spec.layers) + "\n";
  h += "timesteps = " + std::to_string(model.snn.timesteps) + "\n";
  h += "leak = " + format_exact(model.snn.leak) + "\n";
  std::string thresholds;
  for (float t : model.snn.thresholds) thresholds += (thresholds.empty() ? "" : ",") + format_exact(t);
  h += "thresholds = " + thresholds + "\n";
  h += "surrogate_decay = " + format_exact(model.snn.surrogate_decay) + "\n";
  for (const auto& e : param_layout(model)) {
    h += "param " + e.name + " " + role_text(e.role) + " " + std::to_string(e.offset) + " " + shape_text(e.shape) + "\n";
  }
  return h;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write '" + path.string() + "'");
  const std::string header = checkpoint_header(model);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header.size());
  out.write(header.data(), std::streamsize(header.size()));
  put_floats(out, flatten(model).values);
  put_floats(out, bntt_buffers(model));
  if (!out.flush()) throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read '" + path.string() + "'");
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("checkpoint: '" + path.string() + "' is not a checkpoint");
  }
  if (const auto v = get<std::uint32_t>(in); v != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(v));
  }
  const auto header_size = get<std::uint64_t>(in);
  if (header_size > (1u << 24)) throw std::runtime_error("checkpoint: implausible header size");
  std::string header(header_size, '\0');
  if (!in.read(header.data(), std::streamsize(header_size))) throw std::runtime_error("checkpoint: truncated file");

  std::map<std::string, std::string> fields;
  for (const auto& line : split(header, '\n')) {
    if (line.starts_with("param ")) continue;  // checked against the rebuilt model below
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw std::runtime_error("checkpoint: bad header line '" + line + "'");
    fields[line.substr(0, eq)] = line.substr(eq + 3);
  }
  const auto field = [&](const char* key) {
    auto it = fields.find(key);
    if (it == fields.end()) throw std::runtime_error(std::string("checkpoint: header lacks '") + key + "'");
    return it->second;
  };

  ModelSpec spec;
  spec.kind = field("kind") == "snn" ? ModelKind::snn : ModelKind::ann;
  spec.input_shape = shape_from_text(field("input_shape"));
  spec.class_count = number<Index>(field("classes"));
  spec.bntt = field("bntt") == "true";
  spec.layers = layers_from_text(field("layers"));
  SnnConfig snn;
  snn.timesteps = number<int>(field("timesteps"));
  snn.leak = number<float>(field("leak"));
  snn.thresholds.clear();
  for (const auto& t : split(field("thresholds"), ',')) snn.thresholds.push_back(number<float>(t));
  snn.surrogate_decay = number<float>(field("surrogate_decay"));

  Model model;
  try {
    RngStream unused(0);
    model = build_model(spec, snn, unused);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: inconsistent model header: ") + e.what());
  }
  if (checkpoint_header(model) != header) {
    throw std::runtime_error("checkpoint: parameter manifest does not match the model structure");
  }
  ParamVector params{param_layout(model), get_floats(in)};
  if (params.size() != layout_size(params.layout)) throw std::runtime_error("checkpoint: parameter count mismatch");
  load_params(model, params);
  const Tensor buffers = get_floats(in);
  if (buffers.size() != bntt_buffers(model).size()) throw std::runtime_error("checkpoint: buffer count mismatch");
  if (buffers.size() > 0) load_bntt_buffers(model, buffers);
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  return model;
}

}  // namespace fedsnn
