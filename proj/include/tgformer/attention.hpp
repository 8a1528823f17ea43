// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tgformer/matrix.hpp"
#include "tgformer/sequence.hpp"

namespace tgf {

enum class CombineMode { sum, concat };

CombineMode parse_combine_mode(const std::string& name);

// Model dimensions and block options.  Embedding tables cover one graph, so
// num_nodes/num_edges are part of the model.
//
// combine sum requires d_v = d_e = d_t = d_model; combine concat requires
// d_model = d_v + d_e + d_t.
//
// attention_only reduces every block to the bare masked attention operator
// (no residual, normalization, or feed-forward), which is the form the
// neighbor-only and self-loop mask kinds are checked against.
struct ModelConfig {
  NodeId num_nodes = 0;
  std::int64_t num_edges = 0;
  std::int64_t num_layers = 1;
  std::int64_t num_heads = 2;
  std::int64_t d_model = 32;
  std::int64_t d_v = 32;
  std::int64_t d_e = 32;
  std::int64_t d_t = 32;
  CombineMode combine = CombineMode::sum;
  bool attention_only = false;
  double dropout = 0.0;

  std::int64_t d_head() const { return d_model / num_heads; }
  // Edge table row for the query's own position; frozen zero vector.
  std::int64_t self_edge_index() const { return num_edges + 1; }
  void validate() const;
};

struct LayerParams {
  Matrix w_q, w_k, w_v, w_o;       // d_model x d_model
  Matrix ff_w1, ff_b1;             // d_model x 4*d_model, 1 x 4*d_model
  Matrix ff_w2, ff_b2;             // 4*d_model x d_model, 1 x d_model
  Matrix ln1_gamma, ln1_beta;      // 1 x d_model
  Matrix ln2_gamma, ln2_beta;      // 1 x d_model
};

// All learnable state.  Frozen rows stay exactly zero for the life of the
// model: node_table row 0 (padding), edge_table row 0 (padding) and the last
// edge_table row (the query position's self edge).
struct ModelParams {
  ModelConfig config;
  Matrix node_table;               // (num_nodes+1) x d_v
  Matrix edge_table;               // (num_edges+2) x d_e
  Matrix omega, phi;               // 1 x d_t time-encoding frequencies/phases
  std::vector<LayerParams> layers;
  Matrix dec_w1, dec_b1;           // pair decoder: 2*d_model x d_model, 1 x d_model
  Matrix dec_w2, dec_b2;           // d_model x 1, 1 x 1

  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  // Same shapes, every tensor zero: gradient and optimizer-state containers.
  ModelParams zeros_like() const;

  // Visits every learnable tensor with a stable name; drives the optimizer,
  // checkpointing, and gradient checks.
  void for_each_tensor(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each_tensor(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  // Re-zeroes the frozen table rows (padding and self edge).
  void clear_frozen_rows();
};

// Element-wise cos(omega * delta + phi); output (rows*cols(delta)) x d_t with
// one encoding row per delta entry, row-major over delta.
Matrix encode_time(const Matrix& omega, const Matrix& phi, const Matrix& delta);

// Z rows combine node embedding, edge embedding, and time encoding (sum or
// concat).  Padding positions give exact zero rows.  Output (B*l) x d_model.
Matrix assemble_inputs(const ModelParams& params, const SequenceBatch& batch);

// One multi-head masked attention application with params.layers[layer]:
// per head softmax(Q K^T / sqrt(d_head) + M) V, heads concatenated, output
// projected.  Rows whose mask admits no live column output exact zeros.
Matrix masked_attention(const Matrix& z, const Matrix& mask, const ModelParams& params,
                        std::int64_t layer);

// Saved intermediate state for one forward pass; consumed by model_backward.
struct AttentionCache {
  Matrix input;        // (B*l) x d_model rows feeding the projections
  Matrix q, k, v;      // (B*l) x d_model
  Matrix probs;        // (B*heads*l) x l softmax weights
  Matrix prob_drop;    // dropout scale per weight, empty when inactive
  Matrix concat_out;   // (B*l) x d_model, heads concatenated before w_o
};

struct BlockCache {
  Matrix n1_hat, n1_rstd;  // layer norm 1 normalized rows and 1/sigma
  AttentionCache attn;
  Matrix h1;               // post-attention residual stream
  Matrix n2_hat, n2_rstd;  // layer norm 2
  Matrix ff_input;         // rows feeding the feed-forward
  Matrix ff_hidden;        // post-ReLU activations
  Matrix ff_drop;          // dropout scale per activation, empty when inactive
};

struct ForwardCache {
  SequenceBatch batch;
  Matrix mask;
  Matrix z;
  std::vector<BlockCache> blocks;
  Matrix output;  // B x d_model target-row embeddings
};

// Runs assemble + num_layers blocks + target-row extraction.  Dropout fires
// only when training=true and config.dropout > 0; draws are deterministic in
// dropout_seed.
ForwardCache model_forward(const ModelParams& params, const SequenceBatch& batch, MaskKind kind,
                           bool training = false, std::uint64_t dropout_seed = 0);

// Exact reverse-mode gradients of sum(upstream * output) for every learnable
// tensor; frozen rows come back zero.  upstream is B x d_model.
ModelParams model_backward(const ModelParams& params, const ForwardCache& cache,
                           const Matrix& upstream);

// Versioned binary checkpoint of the config and every named tensor; exact
// round-trip, trailing CRC-32.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace tgf
