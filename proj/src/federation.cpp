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

#include "fedsnn/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

namespace fedsnn {

void FederationConfig::validate() const {
  if (clients < 1) throw std::invalid_argument("clients must be >= 1");
  if (participants < 1 || participants > clients) throw std::invalid_argument("participants must satisfy 1 <= P <= N");
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (local_epochs < 1) throw std::invalid_argument("local epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(straggler_prob >= 0.0 && straggler_prob <= 1.0)) throw std::invalid_argument("straggler probability must lie in [0,1]");
  if (!(noise_strength >= 0.0)) throw std::invalid_argument("noise strength must be >= 0");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  sgd.validate();
}

std::vector<int> select_participants(RngStream& stream, int clients, int participants) {
  if (participants < 0 || participants > clients) throw std::invalid_argument("select_participants: need P <= N");
  std::vector<int> ids(static_cast<std::size_t>(clients));
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first P slots are a uniform draw in draw order.
  for (int i = 0; i < participants; ++i) {
    std::uniform_int_distribution<int> pick(i, clients - 1);
    std::swap(ids[std::size_t(i)], ids[std::size_t(pick(stream))]);
  }
  ids.resize(std::size_t(participants));
  return ids;
}

double local_train(Model& model, const Dataset& data, const std::vector<std::size_t>& indices, int epochs,
                   Index batch_size, const SgdConfig& opt, const RngStream& shuffle_stream,
                   const RngStream& encode_stream) {
  SgdState state;
  double loss = 0.0;
  std::size_t steps = 0;
  for (int e = 0; e < epochs; ++e) {
    RngStream order = shuffle_stream.child(std::uint64_t(e));
    const RngStream encode = encode_stream.child(std::uint64_t(e));
    for (const auto& b : epoch_batches(indices, batch_size, order)) {
      loss += train_step(model, data.gather(b), opt, state, encode);
      ++steps;
    }
  }
  return steps ? loss / double(steps) : 0.0;
}

std::size_t min_trainable_samples(const Model& model) { return model.uses_bntt() ? 2 : 1; }

GradientUpdate client_local_train(const Model& global, const Dataset& data, const ClientShard& shard, int epochs,
                                  Index batch_size, const SgdConfig& opt, const RngStream& shuffle_stream,
                                  const RngStream& encode_stream) {
  if (shard.indices.empty()) {
    throw std::invalid_argument("client " + std::to_string(shard.client_id) + ": empty shard");
  }
  if (shard.indices.size() < min_trainable_samples(global)) {
    throw std::invalid_argument("client " + std::to_string(shard.client_id) +
                                ": a single sample cannot be batch-normalized");
  }
  Model local = global;
  const ParamVector initial = flatten(local);
  GradientUpdate update;
  update.client_id = shard.client_id;
  update.sample_count = shard.indices.size();
  update.mean_loss = local_train(local, data, shard.indices, epochs, batch_size, opt, shuffle_stream, encode_stream);
  const ParamVector final_params = flatten(local);
  update.delta = BasicParamVector<double>::zeros(initial.layout);
  update.delta.values.values() =
      final_params.values.values().cast<double>() - initial.values.values().cast<double>();
  update.bntt_buffers = bntt_buffers(local);
  return update;
}

std::vector<GradientUpdate> apply_straggler_filter(std::vector<GradientUpdate> updates, double p, RngStream& stream) {
  if (updates.empty()) throw std::invalid_argument("apply_straggler_filter: no updates");
  std::vector<GradientUpdate> kept;
  kept.push_back(std::move(updates.front()));
  for (std::size_t i = 1; i < updates.size(); ++i) {
    if (!(stream.uniform_double() < p)) kept.push_back(std::move(updates[i]));
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  return kept;
}

GradientUpdate add_gradient_noise(GradientUpdate update, double strength, RngStream& stream) {
  if (!(strength >= 0.0)) throw std::invalid_argument("add_gradient_noise: strength must be >= 0");
  if (strength == 0.0) return update;
  std::normal_distribution<double> normal(0.0, 1.0);
  auto& d = update.delta.values.values();
  for (Index i = 0; i < d.size(); ++i) d[i] += strength * normal(stream);
  return update;
}

namespace {

std::vector<double> sample_weights(const std::vector<GradientUpdate>& updates) {
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.sample_count == 0) throw std::invalid_argument("update from client " + std::to_string(u.client_id) + " has no samples");
    total += double(u.sample_count);
  }
  std::vector<double> w;
  for (const auto& u : updates) w.push_back(double(u.sample_count) / total);
  return w;
}

void sort_by_client(std::vector<GradientUpdate>& updates) {
  std::sort(updates.begin(), updates.end(), [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
}

}  // namespace

ParamVector fedavg_aggregate(const ParamVector& global, std::vector<GradientUpdate> updates) {
  if (updates.empty()) return global;
  sort_by_client(updates);
  const std::vector<double> w = sample_weights(updates);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(global.size());
  for (std::size_t c = 0; c < updates.size(); ++c) {
    check_same_layout(global.layout, updates[c].delta.layout, "fedavg_aggregate");
    sum += w[c] * updates[c].delta.values.values();
  }
  ParamVector out = global;
  out.values.values() = (global.values.values().cast<double>() + sum).cast<float>();
  return out;
}

Tensor average_bntt_buffers(const std::vector<GradientUpdate>& input) {
  if (input.empty()) throw std::invalid_argument("average_bntt_buffers: no updates");
  std::vector<GradientUpdate const*> sorted;
  for (const auto& u : input) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->client_id < b->client_id; });
  double total = 0.0;
  for (auto* u : sorted) total += double(u->sample_count);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(sorted.front()->bntt_buffers.size());
  for (auto* u : sorted) {
    if (u->bntt_buffers.size() != sum.size()) throw std::invalid_argument("average_bntt_buffers: size mismatch");
    sum += (double(u->sample_count) / total) * u->bntt_buffers.values().cast<double>();
  }
  return Tensor(sorted.front()->bntt_buffers.shape(), sum.cast<float>());
}

FederationResult run_federation(const FederationConfig& config, const Dataset& train, const Dataset& validation,
                                const std::vector<ClientShard>& shards, const ModelSpec& spec, const SnnConfig& snn,
                                const RoundCallback& on_round) {
  config.validate();
  if (int(shards.size()) != config.clients) {
    throw std::invalid_argument("run_federation: " + std::to_string(shards.size()) + " shards for " +
                                std::to_string(config.clients) + " clients");
  }
  const RngStream root(config.seed);
  RngStream init = root.child(kInitStream);
  FederationResult result{build_model(spec, snn, init), {}};
  Model& model = result.model;
  const RngStream eval_stream = root.child(kEvalStream);
  const std::size_t min_samples = min_trainable_samples(model);

  for (int r = 0; r < config.rounds; ++r) {
    const auto start = std::chrono::steady_clock::now();
    const RngStream round = root.child(kRoundStream).child(std::uint64_t(r));
    RngStream select_stream = round.child(kSelectStream);
    const std::vector<int> selected = select_participants(select_stream, config.clients, config.participants);

    // Participants whose shard cannot support a training step send nothing.
    std::vector<int> trainers;
    for (int c : selected) {
      if (shards[std::size_t(c)].indices.size() >= min_samples) trainers.push_back(c);
    }

    const SgdConfig opt = config.sgd.at_round(r);
    const RngStream encode = root.child(kEncodeStream).child(std::uint64_t(r));
    std::vector<std::optional<GradientUpdate>> slots(trainers.size());
    std::vector<std::exception_ptr> errors(trainers.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
      for (std::size_t k; (k = next.fetch_add(1)) < trainers.size();) {
        const int c = trainers[k];
        try {
          slots[k] = client_local_train(model, train, shards[std::size_t(c)], config.local_epochs, config.batch_size, opt,
                                        round.child(kTrainStream).child(std::uint64_t(c)), encode);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    };
    const std::size_t threads = std::min<std::size_t>(std::size_t(config.workers), trainers.size());
    if (threads <= 1) {
      work();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    std::vector<GradientUpdate> updates;  // selection order
    for (auto& s : slots) updates.push_back(std::move(*s));

    RoundMetrics metrics;
    metrics.round = r;
    metrics.participants = selected;
    if (!updates.empty()) {
      std::vector<const GradientUpdate*> by_id;
      for (const auto& u : updates) by_id.push_back(&u);
      std::sort(by_id.begin(), by_id.end(), [](auto* a, auto* b) { return a->client_id < b->client_id; });
      for (auto* u : by_id) metrics.train_loss += u->mean_loss;
      metrics.train_loss /= double(by_id.size());

      RngStream straggle = round.child(kStragglerStream);
      std::vector<GradientUpdate> survivors = apply_straggler_filter(std::move(updates), config.straggler_prob, straggle);
      for (auto& u : survivors) {
        RngStream noise = round.child(kNoiseStream).child(std::uint64_t(u.client_id));
        u = add_gradient_noise(std::move(u), config.noise_strength, noise);
        metrics.survivors.push_back(u.client_id);
      }
      if (config.bn_stats == BnStatsPolicy::average && model.uses_bntt()) {
        load_bntt_buffers(model, average_bntt_buffers(survivors));
      }
      load_params(model, fedavg_aggregate(flatten(model), std::move(survivors)));
    } else {
      metrics.train_loss = std::numeric_limits<double>::quiet_NaN();
    }
    metrics.failed = metrics.survivors.empty();
    metrics.val_accuracy = evaluate_accuracy(model, validation, eval_stream);
    metrics.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (on_round) on_round(metrics);
    result.rounds.push_back(std::move(metrics));
  }
  return result;
}

}  // namespace fedsnn
