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

#include "fedsnn/rng.hpp"
#include "fedsnn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedsnn {

struct Batch {
  Tensor images;                        // [B, C, H, W]
  std::vector<int> labels;
  std::vector<std::uint64_t> sample_ids;  // dataset positions; key the rate-coding streams
};

struct Dataset {
  Tensor images;  // [n, C, H, W], values in [0,1]
  std::vector<int> labels;
  int class_count = 0;

  Index size() const { return Index(labels.size()); }
  Shape sample_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
  Batch gather(std::span<const std::size_t> indices) const;
  /// Positions of every sample of each class, in ascending order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
};

struct ClientShard {
  int client_id = 0;
  std::vector<std::size_t> indices;
};

constexpr Index kCifarRecordBytes = 3073;

/// Parses one CIFAR-10 binary batch file: records of 1 label byte followed by
/// 3x1024 channel-plane bytes (R, G, B, row-major), scaled by 1/255.
Dataset load_cifar10_file(const std::filesystem::path& file);

enum class CifarSplit { train, test };

/// `path` is either a single batch file or a directory holding
/// data_batch_1..5.bin (train) / test_batch.bin (test).
Dataset load_cifar10(const std::filesystem::path& path, CifarSplit split = CifarSplit::train);

struct SyntheticParams {
  int classes = 4;
  int per_class = 100;
  int height = 16;
  int width = 16;
  int channels = 1;
  float noise = 0.1f;
};

/// Class c is a sinusoidal stripe pattern at orientation pi*c/C; each pixel is
/// (1 - noise) * pattern + noise * U[0,1). Labels are interleaved by class.
Dataset gen_synthetic(const SyntheticParams& params, RngStream& stream);

/// Per class: shuffle, then deal round-robin (continuing across classes).
std::vector<ClientShard> partition_iid(const Dataset& dataset, int clients, RngStream& stream);

/// Normalized Dirichlet(alpha * 1_N) draw via Gamma(alpha, 1) components.
std::vector<double> dirichlet_proportions(int clients, double alpha, RngStream& stream);

/// Per class: draw Dirichlet(alpha) proportions over clients and split the
/// shuffled class samples into contiguous blocks of rounded size; the
/// largest-proportion client absorbs the rounding remainder.
std::vector<ClientShard> partition_dirichlet(const Dataset& dataset, int clients, double alpha, RngStream& stream);

}  // namespace fedsnn
