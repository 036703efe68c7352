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

#include "fedsnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fedsnn {

Batch Dataset::gather(std::span<const std::size_t> indices) const {
  Shape shape = images.shape();
  shape.front() = Index(indices.size());
  const Index each = images.slice_size();
  Batch batch{Tensor(shape), {}, {}};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t at = indices[i];
    if (at >= labels.size()) throw std::out_of_range("gather: index " + std::to_string(at) + " out of range");
    batch.images.values().segment(Index(i) * each, each) = images.values().segment(Index(at) * each, each);
    batch.labels.push_back(labels[at]);
    batch.sample_ids.push_back(at);
  }
  return batch;
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) out.at(std::size_t(labels[i])).push_back(i);
  return out;
}

Dataset load_cifar10_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open CIFAR-10 file " + file.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty() || Index(bytes.size()) % kCifarRecordBytes != 0) {
    throw std::runtime_error(file.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of " +
                             std::to_string(kCifarRecordBytes) + " bytes");
  }
  const Index n = Index(bytes.size()) / kCifarRecordBytes;
  Dataset ds{Tensor({n, 3, 32, 32}), {}, 10};
  ds.labels.reserve(std::size_t(n));
  for (Index r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw std::runtime_error(file.string() + ": record " + std::to_string(r) + " has label byte " +
                               std::to_string(rec[0]));
    }
    ds.labels.push_back(rec[0]);
    for (Index p = 0; p < kCifarRecordBytes - 1; ++p) ds.images[r * (kCifarRecordBytes - 1) + p] = float(rec[1 + p]) / 255.0f;
  }
  return ds;
}

Dataset load_cifar10(const std::filesystem::path& path, CifarSplit split) {
  if (!std::filesystem::is_directory(path)) return load_cifar10_file(path);
  std::vector<std::filesystem::path> files;
  if (split == CifarSplit::train) {
    for (int i = 1; i <= 5; ++i) files.push_back(path / ("data_batch_" + std::to_string(i) + ".bin"));
  } else {
    files.push_back(path / "test_batch.bin");
  }
  std::vector<Dataset> parts;
  Index total = 0;
  for (const auto& f : files) {
    parts.push_back(load_cifar10_file(f));
    total += parts.back().size();
  }
  Dataset ds{Tensor({total, 3, 32, 32}), {}, 10};
  Index at = 0;
  for (const auto& p : parts) {
    ds.images.values().segment(at, p.images.size()) = p.images.values();
    at += p.images.size();
    ds.labels.insert(ds.labels.end(), p.labels.begin(), p.labels.end());
  }
  return ds;
}

Dataset gen_synthetic(const SyntheticParams& p, RngStream& stream) {
  if (p.classes < 2) throw std::invalid_argument("gen_synthetic: need at least 2 classes");
  if (p.per_class < 1 || p.height < 1 || p.width < 1 || p.channels < 1) {
    throw std::invalid_argument("gen_synthetic: sizes must be positive");
  }
  if (!(p.noise >= 0.0f && p.noise <= 1.0f)) throw std::invalid_argument("gen_synthetic: noise must lie in [0,1]");

  const Index plane = Index(p.height) * p.width;
  const Index each = plane * p.channels;
  std::vector<Eigen::VectorXf> patterns;
  for (int c = 0; c < p.classes; ++c) {
    const double angle = std::numbers::pi * c / p.classes;
    const double period = 4.0;
    Eigen::VectorXf pattern(each);
    for (int ch = 0; ch < p.channels; ++ch) {
      for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
          const double proj = x * std::cos(angle) + y * std::sin(angle);
          const double v = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * proj / period + 0.7 * ch);
          pattern[ch * plane + y * p.width + x] = float(v);
        }
      }
    }
    patterns.push_back(std::move(pattern));
  }

  const Index n = Index(p.classes) * p.per_class;
  Dataset ds{Tensor({n, p.channels, p.height, p.width}), {}, p.classes};
  ds.labels.reserve(std::size_t(n));
  for (Index i = 0; i < n; ++i) {
    const int label = int(i % p.classes);
    ds.labels.push_back(label);
    for (Index j = 0; j < each; ++j) {
      const float u = p.noise > 0.0f ? stream.uniform_float() : 0.0f;
      ds.images[i * each + j] = std::clamp((1.0f - p.noise) * patterns[std::size_t(label)][j] + p.noise * u, 0.0f, 1.0f);
    }
  }
  return ds;
}

std::vector<ClientShard> partition_iid(const Dataset& dataset, int clients, RngStream& stream) {
  if (clients < 1 || clients > dataset.size()) {
    throw std::invalid_argument("partition_iid: need 1 <= clients <= samples");
  }
  std::vector<ClientShard> shards(static_cast<std::size_t>(clients));
  for (int c = 0; c < clients; ++c) shards[std::size_t(c)].client_id = c;
  std::size_t next = 0;
  for (auto& cls : dataset.indices_by_class()) {
    std::shuffle(cls.begin(), cls.end(), stream);
    for (std::size_t idx : cls) shards[next++ % std::size_t(clients)].indices.push_back(idx);
  }
  for (auto& s : shards) std::sort(s.indices.begin(), s.indices.end());
  return shards;
}

std::vector<double> dirichlet_proportions(int clients, double alpha, RngStream& stream) {
  if (!(alpha > 0.0)) throw std::invalid_argument("dirichlet: alpha must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(static_cast<std::size_t>(clients));
  double sum = 0.0;
  // Tiny alpha can underflow every component; redraw in that case.
  while (!(sum > 0.0)) {
    sum = 0.0;
    for (auto& v : p) sum += (v = gamma(stream));
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<ClientShard> partition_dirichlet(const Dataset& dataset, int clients, double alpha, RngStream& stream) {
  if (clients < 1) throw std::invalid_argument("partition_dirichlet: need at least one client");
  if (!(alpha > 0.0)) throw std::invalid_argument("partition_dirichlet: alpha must be > 0");
  std::vector<ClientShard> shards(static_cast<std::size_t>(clients));
  for (int c = 0; c < clients; ++c) shards[std::size_t(c)].client_id = c;

  for (auto& cls : dataset.indices_by_class()) {
    std::shuffle(cls.begin(), cls.end(), stream);
    const std::vector<double> p = dirichlet_proportions(clients, alpha, stream);
    const auto count = std::int64_t(cls.size());
    std::vector<std::int64_t> sizes(static_cast<std::size_t>(clients));
    std::int64_t assigned = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) assigned += (sizes[c] = std::llround(p[c] * double(count)));

    // Clients by decreasing proportion, lowest id first on ties.
    std::vector<std::size_t> order(sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    std::int64_t remainder = count - assigned;
    if (remainder >= 0) {
      sizes[order.front()] += remainder;
    } else {
      // Rounding overshot; take it back starting from the largest share.
      for (std::size_t c : order) {
        const std::int64_t take = std::min(sizes[c], -remainder);
        sizes[c] -= take;
        remainder += take;
        if (remainder == 0) break;
      }
    }

    std::size_t at = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      for (std::int64_t k = 0; k < sizes[c]; ++k) shards[c].indices.push_back(cls[at++]);
    }
  }
  for (auto& s : shards) std::sort(s.indices.begin(), s.indices.end());
  return shards;
}

}  // namespace fedsnn
