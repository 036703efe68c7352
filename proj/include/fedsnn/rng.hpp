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

#include "fedsnn/tensor.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace fedsnn {

/// Counter-based random stream addressed by (master seed, path).
///
/// The path is hashed into a 64-bit key; the n-th output is the SplitMix64
/// finalizer applied to key + n * golden-gamma. Streams for any path can be
/// created independently, which is what lets clients, rounds and samples draw
/// randomness without coordinating. Satisfies UniformRandomBitGenerator, so it
/// plugs into the <random> distributions and std::shuffle.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path = {});

  /// A new stream whose path is this stream's path plus `index`. The child
  /// starts from a fresh counter regardless of how far this stream advanced.
  RngStream child(std::uint64_t index) const;

  std::uint64_t master_seed() const { return seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform float in [0, 1) with 24 random mantissa bits.
  float uniform_float();
  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform_double();

 private:
  std::uint64_t seed_;
  std::vector<std::uint64_t> path_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

Tensor rng_uniform(RngStream& stream, const Shape& shape);
Tensor rng_gaussian(RngStream& stream, const Shape& shape);

}  // namespace fedsnn
