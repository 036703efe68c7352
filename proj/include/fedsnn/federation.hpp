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

// Round-based federated averaging: participant sampling, parallel local
// training, straggler dropout, update noise and sample-weighted aggregation.
//
// All randomness derives from RngStream(seed) through fixed paths, so the
// outcome of a run does not depend on how many workers train clients:
//
//   init model           [kInitStream]
//   participant draw     [kRoundStream, r, kSelectStream]
//   straggler draws      [kRoundStream, r, kStragglerStream]
//   client batch order   [kRoundStream, r, kTrainStream, client, epoch]
//   update noise         [kRoundStream, r, kNoiseStream, client]
//   rate coding          [kEncodeStream, r, epoch, sample]
//   validation coding    [kEvalStream, sample]

#include "fedsnn/dataset.hpp"
#include "fedsnn/model.hpp"
#include "fedsnn/training.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace fedsnn {

inline constexpr std::uint64_t kInitStream = 0;
inline constexpr std::uint64_t kRoundStream = 1;
inline constexpr std::uint64_t kEncodeStream = 2;
inline constexpr std::uint64_t kEvalStream = 3;
inline constexpr std::uint64_t kSelectStream = 0;
inline constexpr std::uint64_t kStragglerStream = 1;
inline constexpr std::uint64_t kTrainStream = 2;
inline constexpr std::uint64_t kNoiseStream = 3;

/// What the server does with BNTT running statistics after a round.
enum class BnStatsPolicy {
  average,  // sample-weighted mean of the surviving clients' statistics
  local,    // server keeps its own; client statistics never leave the client
};

struct FederationConfig {
  int clients = 10;
  int participants = 5;
  int rounds = 10;
  int local_epochs = 2;
  Index batch_size = 32;
  double straggler_prob = 0.0;
  double noise_strength = 0.0;
  SgdConfig sgd;
  std::uint64_t seed = 1;
  int workers = 1;
  BnStatsPolicy bn_stats = BnStatsPolicy::average;

  void validate() const;
};

/// Update sent by one client: signed parameter delta (final - broadcast),
/// carried in double so a single-update aggregate reproduces the client
/// model exactly.
struct GradientUpdate {
  int client_id = 0;
  BasicParamVector<double> delta;
  std::size_t sample_count = 0;
  Tensor bntt_buffers;      // client running statistics after training
  double mean_loss = 0.0;   // mean pre-step batch loss over local training
};

/// Uniform sample of `participants` distinct ids from [0, clients), in draw order.
std::vector<int> select_participants(RngStream& stream, int clients, int participants);

/// Centralized training loop: `epochs` passes over `indices`, batch order
/// from stream.child(epoch), rate coding from encode.child(epoch). Returns the
/// mean pre-step batch loss.
double local_train(Model& model, const Dataset& data, const std::vector<std::size_t>& indices, int epochs,
                   Index batch_size, const SgdConfig& opt, const RngStream& shuffle_stream,
                   const RngStream& encode_stream);

/// Trains a replica of `global` on the shard and returns its delta.
GradientUpdate client_local_train(const Model& global, const Dataset& data, const ClientShard& shard, int epochs,
                                  Index batch_size, const SgdConfig& opt, const RngStream& shuffle_stream,
                                  const RngStream& encode_stream);

/// The first update (first selected participant) always survives; every
/// other update is dropped with probability p. Output is sorted by client id.
std::vector<GradientUpdate> apply_straggler_filter(std::vector<GradientUpdate> updates, double p, RngStream& stream);

/// delta += strength * N(0,1) per coordinate. strength 0 leaves the update untouched.
GradientUpdate add_gradient_noise(GradientUpdate update, double strength, RngStream& stream);

/// global + sum_c w_c * delta_c with w_c = n_c / sum n, summed in ascending
/// client id. An empty list returns `global` unchanged.
ParamVector fedavg_aggregate(const ParamVector& global, std::vector<GradientUpdate> updates);

/// Sample-weighted mean of the updates' BNTT running statistics.
Tensor average_bntt_buffers(std::vector<GradientUpdate> const& updates);

struct RoundMetrics {
  int round = 0;
  double val_accuracy = 0.0;
  double train_loss = 0.0;         // NaN when no participant could train
  std::vector<int> participants;  // selected client ids, in draw order
  std::vector<int> survivors;   // sorted client ids whose updates were aggregated
  double wall_ms = 0.0;
  bool failed = false;          // every participant straggled or none could train
};

struct FederationResult {
  Model model;
  std::vector<RoundMetrics> rounds;
};

using RoundCallback = std::function<void(const RoundMetrics&)>;

/// Builds the initial model from the init stream and runs `config.rounds`
/// rounds. `shards.size()` must equal config.clients.
FederationResult run_federation(const FederationConfig& config, const Dataset& train, const Dataset& validation,
                                const std::vector<ClientShard>& shards, const ModelSpec& spec, const SnnConfig& snn,
                                const RoundCallback& on_round = {});

/// Smallest shard a client needs to run local training for this model.
std::size_t min_trainable_samples(const Model& model);

}  // namespace fedsnn
