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

#include "fedsnn/rng.hpp"

#include <random>

namespace fedsnn {
namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_path(std::uint64_t seed, const std::vector<std::uint64_t>& path) {
  // Length is folded in so that [a] and [a, 0] land on different keys.
  std::uint64_t h = mix64(seed + kGamma);
  h = mix64(h ^ (path.size() * 0xd1b54a32d192ed03ULL));
  for (std::uint64_t p : path) h = mix64(h + kGamma + mix64(p ^ 0x2545f4914f6cdd1dULL));
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path)
    : seed_(master_seed), path_(std::move(path)), key_(hash_path(seed_, path_)) {}

RngStream RngStream::child(std::uint64_t index) const {
  auto path = path_;
  path.push_back(index);
  return RngStream(seed_, std::move(path));
}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

float RngStream::uniform_float() { return float((*this)() >> 40) * 0x1.0p-24f; }

double RngStream::uniform_double() { return double((*this)() >> 11) * 0x1.0p-53; }

Tensor rng_uniform(RngStream& stream, const Shape& shape) {
  Tensor out(shape);
  for (Index i = 0; i < out.size(); ++i) out[i] = stream.uniform_float();
  return out;
}

Tensor rng_gaussian(RngStream& stream, const Shape& shape) {
  Tensor out(shape);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < out.size(); ++i) out[i] = float(normal(stream));
  return out;
}

}  // namespace fedsnn
