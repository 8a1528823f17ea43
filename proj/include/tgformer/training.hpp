// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgformer/attention.hpp"
#include "tgformer/event_stream.hpp"
#include "tgformer/sampler.hpp"
#include "tgformer/tcsr.hpp"

namespace tgf {

enum class OptimizerKind { adam, sgd };

OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  std::int64_t batch_size = 200;
  std::int64_t neighbors = 10;   // k, at most seq_len - 1
  std::int64_t seq_len = 11;     // l
  std::int64_t layers = 1;
  std::int64_t heads = 2;
  std::int64_t d_model = 64;
  std::int64_t d_t = 64;
  CombineMode combine = CombineMode::sum;
  double learning_rate = 1e-4;
  std::int64_t epochs = 10;
  std::int64_t negatives = 1;    // per positive
  std::int64_t workers = 1;      // simulated gradient-averaging workers
  std::uint64_t seed = 0;
  MaskKind mask = MaskKind::causal;
  double dropout = 0.1;
  OptimizerKind optimizer = OptimizerKind::adam;
  SampleStrategy strategy = SampleStrategy::recent;

  void validate() const;
  // Derives the per-graph model dimensions.  combine sum takes
  // d_v = d_e = d_t = d_model; combine concat splits d_model as
  // d_v = d_model - 2*d_t with d_e = d_t.
  ModelConfig model_config(NodeId num_nodes, std::int64_t num_edges) const;
  std::string to_string() const;
};

// Flat key=value text, '#' comments, unknown keys rejected.
TrainConfig load_train_config(const std::string& path);
TrainConfig parse_train_config(const std::string& text);

// One training slice: batch_size consecutive events plus seeded uniform
// negative destinations (batch_size * negatives of them).
struct LinkBatch {
  std::vector<NodeId> src, dst, neg;
  std::vector<Time> times;
};

// Consecutive chronological slices of the stream; the trailing batch may be
// short.  Negative draws depend only on (seed, batch index, position).
std::vector<LinkBatch> make_batches(const EventStream& train, std::int64_t batch_size,
                                    std::int64_t neg_per_pos, NodeId num_nodes,
                                    std::uint64_t seed);

// Source, destination, and negative sequences concatenated into one model
// forward, then chunked back apart.
struct ConcatForward {
  ForwardCache cache;
  Matrix src_emb, dst_emb, neg_emb;
};

ConcatForward forward_concat(const ModelParams& params, const LinkBatch& batch, const TCsr& graph,
                             const TrainConfig& cfg, bool training = false,
                             std::uint64_t sample_seed = 0, std::uint64_t dropout_seed = 0);

// Pair scores from the decoder MLP: row i scores (u_i, v_i).
Matrix decode_pairs(const ModelParams& params, const Matrix& u_emb, const Matrix& v_emb);

// Mean binary cross-entropy with logits over positives (src, dst) and
// negatives (src, neg); negative j belongs to positive j / neg_per_pos.
// Decoder gradients accumulate into grads; embedding gradients are returned
// for the model backward pass.
struct LossGrads {
  double loss = 0.0;
  Matrix d_src, d_dst, d_neg;
};

LossGrads link_loss(const ModelParams& params, const Matrix& src_emb, const Matrix& dst_emb,
                    const Matrix& neg_emb, ModelParams& grads);

// Adam moments (ignored under sgd) and the step counter.
struct OptimizerState {
  ModelParams m, v;
  std::int64_t t = 0;

  static OptimizerState init(const ModelParams& params);
};

void apply_update(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                  OptimizerKind kind, double learning_rate);

// acc += scale * grads over every tensor.
void add_scaled(ModelParams& acc, const ModelParams& grads, double scale);

// One pass over the stream.  Each step splits its batch into cfg.workers
// equal shards, computes per-shard mean-loss gradients on the same frozen
// snapshot, averages them with weight 1/workers, and applies one optimizer
// update.  workers=1 runs the identical code path on the whole batch.
// Returns the pair-weighted mean loss.
double train_epoch(ModelParams& params, OptimizerState& state, const EventStream& train,
                   const TCsr& graph, const TrainConfig& cfg, std::int64_t epoch);

}  // namespace tgf
