// SPDX-License-Identifier: Apache-2.0
#include "tgformer/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "binary_io.hpp"
#include "tgformer/rng.hpp"

namespace tgf {

namespace {

constexpr double kLnEps = 1e-5;

Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a = false, bool trans_b = false) {
  const std::size_t rows = trans_a ? a.cols() : a.rows();
  const std::size_t cols = trans_b ? b.rows() : b.cols();
  Matrix c(rows, cols);
  gemm(trans_a, trans_b, 1.0, a, b, 0.0, c);
  return c;
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ValidationError("shape mismatch in add");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void add_row_broadcast(Matrix& a, const Matrix& bias) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* row = a.row(r);
    const double* b = bias.row(0);
    for (std::size_t c = 0; c < a.cols(); ++c) row[c] += b[c];
  }
}

void accumulate_col_sums(const Matrix& a, Matrix& bias_grad) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* row = a.row(r);
    double* b = bias_grad.row(0);
    for (std::size_t c = 0; c < a.cols(); ++c) b[c] += row[c];
  }
}

// y = gamma * (x - mu) / sigma + beta, per row. hat and rstd are saved for
// the backward pass.
Matrix ln_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, Matrix& hat,
                  Matrix& rstd) {
  const std::size_t n = x.rows(), d = x.cols();
  Matrix y(n, d);
  hat = Matrix(n, d);
  rstd = Matrix(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.row(r);
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = xr[c] - mean;
      var += diff * diff;
    }
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + kLnEps);
    rstd.at(r, 0) = rs;
    double* hr = hat.row(r);
    double* yr = y.row(r);
    const double* g = gamma.row(0);
    const double* b = beta.row(0);
    for (std::size_t c = 0; c < d; ++c) {
      hr[c] = (xr[c] - mean) * rs;
      yr[c] = g[c] * hr[c] + b[c];
    }
  }
  return y;
}

Matrix ln_backward(const Matrix& dy, const Matrix& hat, const Matrix& rstd, const Matrix& gamma,
                   Matrix& dgamma, Matrix& dbeta) {
  const std::size_t n = dy.rows(), d = dy.cols();
  Matrix dx(n, d);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = dy.row(r);
    const double* hr = hat.row(r);
    const double* g = gamma.row(0);
    double* dg = dgamma.row(0);
    double* db = dbeta.row(0);
    double sum_dh = 0.0, sum_dh_hat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dg[c] += dyr[c] * hr[c];
      db[c] += dyr[c];
      const double dh = dyr[c] * g[c];
      sum_dh += dh;
      sum_dh_hat += dh * hr[c];
    }
    const double m1 = sum_dh * inv_d;
    const double m2 = sum_dh_hat * inv_d;
    const double rs = rstd.at(r, 0);
    double* dxr = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double dh = dyr[c] * g[c];
      dxr[c] = (dh - m1 - hr[c] * m2) * rs;
    }
  }
  return dx;
}

// Inverted dropout mask: entries are 0 or 1/(1-rate).
Matrix draw_dropout(std::size_t rows, std::size_t cols, double rate, CounterRng& rng) {
  Matrix mask(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  double* p = mask.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    p[i] = rng.next_double() < rate ? 0.0 : scale;
  }
  return mask;
}

// Multi-head masked attention forward over (B*l) x d rows. The caller has
// already stored the projection input in cache.input.
Matrix attention_forward(const Matrix& mask, const ModelConfig& cfg, const LayerParams& layer,
                         AttentionCache& cache, double dropout_rate, CounterRng* drop_rng) {
  const Matrix& x = cache.input;
  const auto l = static_cast<std::size_t>(mask.cols());
  if (l == 0 || x.rows() != mask.rows() || x.rows() % l != 0) {
    throw ValidationError("attention input incompatible with mask");
  }
  const std::size_t batch = x.rows() / l;
  const auto heads = static_cast<std::size_t>(cfg.num_heads);
  const auto dh = static_cast<std::size_t>(cfg.d_head());
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.q = matmul(x, layer.w_q);
  cache.k = matmul(x, layer.w_k);
  cache.v = matmul(x, layer.w_v);
  cache.probs = Matrix(batch * heads * l, l);
  cache.prob_drop = Matrix();
  if (drop_rng != nullptr && dropout_rate > 0.0) {
    cache.prob_drop = draw_dropout(batch * heads * l, l, dropout_rate, *drop_rng);
  }
  cache.concat_out = Matrix(batch * l, static_cast<std::size_t>(cfg.d_model));

  std::vector<double> scores(l);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t base = b * l;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t col0 = h * dh;
      const std::size_t prow0 = (b * heads + h) * l;
      for (std::size_t i = 0; i < l; ++i) {
        const double* qi = cache.q.row(base + i) + col0;
        const double* mi = mask.row(base + i);
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < l; ++j) {
          double s = 0.0;
          const double* kj = cache.k.row(base + j) + col0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          s = s * inv_scale + mi[j];
          scores[j] = s;
          max_score = std::max(max_score, s);
        }
        double* prow = cache.probs.row(prow0 + i);
        if (max_score == -std::numeric_limits<double>::infinity()) {
          // No live column: the row is defined to output zero.
          continue;
        }
        double total = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
          const double e = std::exp(scores[j] - max_score);
          prow[j] = e;
          total += e;
        }
        const double inv_total = 1.0 / total;
        for (std::size_t j = 0; j < l; ++j) prow[j] *= inv_total;

        const double* drop =
            cache.prob_drop.empty() ? nullptr : cache.prob_drop.row(prow0 + i);
        double* out = cache.concat_out.row(base + i) + col0;
        for (std::size_t j = 0; j < l; ++j) {
          const double w = drop == nullptr ? prow[j] : prow[j] * drop[j];
          if (w == 0.0) continue;
          const double* vj = cache.v.row(base + j) + col0;
          for (std::size_t c = 0; c < dh; ++c) out[c] += w * vj[c];
        }
      }
    }
  }
  return matmul(cache.concat_out, layer.w_o);
}

// Returns the gradient w.r.t. the attention input and accumulates parameter
// gradients into grads.
Matrix attention_backward(const Matrix& d_out, const ModelConfig& cfg, const LayerParams& layer,
                          const AttentionCache& cache, LayerParams& grads) {
  const auto heads = static_cast<std::size_t>(cfg.num_heads);
  const auto dh = static_cast<std::size_t>(cfg.d_head());
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t l = cache.probs.cols();
  const std::size_t batch = cache.q.rows() / l;

  gemm(true, false, 1.0, cache.concat_out, d_out, 1.0, grads.w_o);
  const Matrix d_concat = matmul(d_out, layer.w_o, false, true);

  Matrix dq(cache.q.rows(), cache.q.cols());
  Matrix dk(cache.k.rows(), cache.k.cols());
  Matrix dv(cache.v.rows(), cache.v.cols());

  std::vector<double> dp(l);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t base = b * l;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t col0 = h * dh;
      const std::size_t prow0 = (b * heads + h) * l;
      for (std::size_t i = 0; i < l; ++i) {
        const double* prow = cache.probs.row(prow0 + i);
        const double* drop =
            cache.prob_drop.empty() ? nullptr : cache.prob_drop.row(prow0 + i);
        const double* dci = d_concat.row(base + i) + col0;

        for (std::size_t j = 0; j < l; ++j) {
          const double w = drop == nullptr ? prow[j] : prow[j] * drop[j];
          if (w == 0.0) {
            dp[j] = 0.0;
            continue;
          }
          double* dvj = dv.row(base + j) + col0;
          const double* vj = cache.v.row(base + j) + col0;
          double acc = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            dvj[c] += w * dci[c];
            acc += dci[c] * vj[c];
          }
          dp[j] = drop == nullptr ? acc : acc * drop[j];
        }

        double dot = 0.0;
        for (std::size_t j = 0; j < l; ++j) dot += dp[j] * prow[j];
        double* dqi = dq.row(base + i) + col0;
        const double* qi = cache.q.row(base + i) + col0;
        for (std::size_t j = 0; j < l; ++j) {
          const double ds = prow[j] * (dp[j] - dot) * inv_scale;
          if (ds == 0.0) continue;
          const double* kj = cache.k.row(base + j) + col0;
          double* dkj = dk.row(base + j) + col0;
          for (std::size_t c = 0; c < dh; ++c) {
            dqi[c] += ds * kj[c];
            dkj[c] += ds * qi[c];
          }
        }
      }
    }
  }

  gemm(true, false, 1.0, cache.input, dq, 1.0, grads.w_q);
  gemm(true, false, 1.0, cache.input, dk, 1.0, grads.w_k);
  gemm(true, false, 1.0, cache.input, dv, 1.0, grads.w_v);

  Matrix dx = matmul(dq, layer.w_q, false, true);
  gemm(false, true, 1.0, dk, layer.w_k, 1.0, dx);
  gemm(false, true, 1.0, dv, layer.w_v, 1.0, dx);
  return dx;
}

}  // namespace

CombineMode parse_combine_mode(const std::string& name) {
  if (name == "sum") return CombineMode::sum;
  if (name == "concat") return CombineMode::concat;
  throw ValidationError("unknown combine mode '" + name + "'");
}

void ModelConfig::validate() const {
  if (num_nodes < 1 || num_edges < 0) throw ValidationError("bad graph dimensions");
  if (num_layers < 0 || num_heads < 1 || d_model < 1) throw ValidationError("bad model dimensions");
  if (d_model % num_heads != 0) throw ValidationError("d_model must be divisible by num_heads");
  if (d_v < 1 || d_e < 1 || d_t < 1) throw ValidationError("bad embedding dimensions");
  if (combine == CombineMode::sum) {
    if (d_v != d_model || d_e != d_model || d_t != d_model) {
      throw ValidationError("sum combine requires d_v = d_e = d_t = d_model");
    }
  } else if (d_v + d_e + d_t != d_model) {
    throw ValidationError("concat combine requires d_model = d_v + d_e + d_t");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must be in [0, 1)");
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  pin_blas_single_thread();
  ModelParams p;
  p.config = config;
  CounterRng rng(seed, 0);

  auto uniform_init = [&rng](Matrix& m, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    double* d = m.data();
    for (std::size_t i = 0; i < m.size(); ++i) d[i] = rng.next_uniform(-bound, bound);
  };

  const auto d = static_cast<std::size_t>(config.d_model);
  p.node_table = Matrix(config.num_nodes + 1, config.d_v);
  uniform_init(p.node_table, config.d_v);
  p.edge_table = Matrix(config.num_edges + 2, config.d_e);
  uniform_init(p.edge_table, config.d_e);

  // Geometric frequency ladder from 1 down to 1e-9, matching the usual
  // time-encoding setup for raw timestamp scales.
  p.omega = Matrix(1, config.d_t);
  p.phi = Matrix(1, config.d_t);
  for (std::int64_t i = 0; i < config.d_t; ++i) {
    const double exponent =
        config.d_t == 1 ? 0.0 : -9.0 * static_cast<double>(i) / static_cast<double>(config.d_t - 1);
    p.omega.at(0, i) = std::pow(10.0, exponent);
  }

  p.layers.resize(config.num_layers);
  for (LayerParams& layer : p.layers) {
    layer.w_q = Matrix(d, d);
    layer.w_k = Matrix(d, d);
    layer.w_v = Matrix(d, d);
    layer.w_o = Matrix(d, d);
    uniform_init(layer.w_q, d);
    uniform_init(layer.w_k, d);
    uniform_init(layer.w_v, d);
    uniform_init(layer.w_o, d);
    layer.ff_w1 = Matrix(d, 4 * d);
    layer.ff_b1 = Matrix(1, 4 * d);
    layer.ff_w2 = Matrix(4 * d, d);
    layer.ff_b2 = Matrix(1, d);
    uniform_init(layer.ff_w1, d);
    uniform_init(layer.ff_w2, 4 * d);
    layer.ln1_gamma = Matrix(1, d);
    layer.ln1_gamma.fill(1.0);
    layer.ln1_beta = Matrix(1, d);
    layer.ln2_gamma = Matrix(1, d);
    layer.ln2_gamma.fill(1.0);
    layer.ln2_beta = Matrix(1, d);
  }

  p.dec_w1 = Matrix(2 * d, d);
  p.dec_b1 = Matrix(1, d);
  p.dec_w2 = Matrix(d, 1);
  p.dec_b2 = Matrix(1, 1);
  uniform_init(p.dec_w1, 2 * d);
  uniform_init(p.dec_w2, d);

  p.clear_frozen_rows();
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each_tensor([](const std::string&, Matrix& m) { m.fill(0.0); });
  return z;
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("node_table", node_table);
  fn("edge_table", edge_table);
  fn("time_omega", omega);
  fn("time_phi", phi);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    LayerParams& l = layers[i];
    fn(prefix + "w_q", l.w_q);
    fn(prefix + "w_k", l.w_k);
    fn(prefix + "w_v", l.w_v);
    fn(prefix + "w_o", l.w_o);
    fn(prefix + "ff_w1", l.ff_w1);
    fn(prefix + "ff_b1", l.ff_b1);
    fn(prefix + "ff_w2", l.ff_w2);
    fn(prefix + "ff_b2", l.ff_b2);
    fn(prefix + "ln1_gamma", l.ln1_gamma);
    fn(prefix + "ln1_beta", l.ln1_beta);
    fn(prefix + "ln2_gamma", l.ln2_gamma);
    fn(prefix + "ln2_beta", l.ln2_beta);
  }
  fn("decoder.w1", dec_w1);
  fn("decoder.b1", dec_b1);
  fn("decoder.w2", dec_w2);
  fn("decoder.b2", dec_b2);
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each_tensor(
      [&fn](const std::string& name, Matrix& m) { fn(name, m); });
}

void ModelParams::clear_frozen_rows() {
  std::memset(node_table.row(0), 0, node_table.cols() * sizeof(double));
  std::memset(edge_table.row(0), 0, edge_table.cols() * sizeof(double));
  std::memset(edge_table.row(edge_table.rows() - 1), 0, edge_table.cols() * sizeof(double));
}

Matrix encode_time(const Matrix& omega, const Matrix& phi, const Matrix& delta) {
  const std::size_t d_t = omega.cols();
  Matrix out(delta.size(), d_t);
  const double* dt = delta.data();
  for (std::size_t r = 0; r < delta.size(); ++r) {
    double* row = out.row(r);
    for (std::size_t c = 0; c < d_t; ++c) {
      row[c] = std::cos(omega.at(0, c) * dt[r] + phi.at(0, c));
    }
  }
  return out;
}

Matrix assemble_inputs(const ModelParams& params, const SequenceBatch& batch) {
  const ModelConfig& cfg = params.config;
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto d_v = static_cast<std::size_t>(cfg.d_v);
  const auto d_e = static_cast<std::size_t>(cfg.d_e);
  const auto d_t = static_cast<std::size_t>(cfg.d_t);
  const bool sum_mode = cfg.combine == CombineMode::sum;

  Matrix z(batch.batch * batch.l, d);
  for (std::int64_t b = 0; b < batch.batch; ++b) {
    for (std::int64_t j = 0; j < batch.valid_len[b]; ++j) {
      const std::int64_t r = b * batch.l + j;
      const std::int64_t ni = batch.node_index[r];
      const std::int64_t ei = batch.edge_index[r];
      if (ni < 0 || ni >= static_cast<std::int64_t>(params.node_table.rows()) || ei < 0 ||
          ei >= static_cast<std::int64_t>(params.edge_table.rows())) {
        throw ValidationError("sequence index outside embedding tables");
      }
      const double dt = batch.time_delta.at(b, j);
      const double* node_row = params.node_table.row(ni);
      const double* edge_row = params.edge_table.row(ei);
      double* zr = z.row(r);
      if (sum_mode) {
        for (std::size_t c = 0; c < d; ++c) {
          zr[c] = node_row[c] + edge_row[c] +
                  std::cos(params.omega.at(0, c) * dt + params.phi.at(0, c));
        }
      } else {
        std::copy(node_row, node_row + d_v, zr);
        std::copy(edge_row, edge_row + d_e, zr + d_v);
        for (std::size_t c = 0; c < d_t; ++c) {
          zr[d_v + d_e + c] = std::cos(params.omega.at(0, c) * dt + params.phi.at(0, c));
        }
      }
    }
  }
  return z;
}

namespace {

void assemble_backward(const ModelParams& params, const SequenceBatch& batch, const Matrix& dz,
                       ModelParams& grads) {
  const ModelConfig& cfg = params.config;
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto d_v = static_cast<std::size_t>(cfg.d_v);
  const auto d_e = static_cast<std::size_t>(cfg.d_e);
  const auto d_t = static_cast<std::size_t>(cfg.d_t);
  const bool sum_mode = cfg.combine == CombineMode::sum;

  for (std::int64_t b = 0; b < batch.batch; ++b) {
    for (std::int64_t j = 0; j < batch.valid_len[b]; ++j) {
      const std::int64_t r = b * batch.l + j;
      const double dt = batch.time_delta.at(b, j);
      const double* dzr = dz.row(r);
      double* dnode = grads.node_table.row(batch.node_index[r]);
      double* dedge = grads.edge_table.row(batch.edge_index[r]);
      if (sum_mode) {
        for (std::size_t c = 0; c < d; ++c) {
          dnode[c] += dzr[c];
          dedge[c] += dzr[c];
          const double ds = -std::sin(params.omega.at(0, c) * dt + params.phi.at(0, c)) * dzr[c];
          grads.omega.at(0, c) += ds * dt;
          grads.phi.at(0, c) += ds;
        }
      } else {
        for (std::size_t c = 0; c < d_v; ++c) dnode[c] += dzr[c];
        for (std::size_t c = 0; c < d_e; ++c) dedge[c] += dzr[d_v + c];
        for (std::size_t c = 0; c < d_t; ++c) {
          const double ds =
              -std::sin(params.omega.at(0, c) * dt + params.phi.at(0, c)) * dzr[d_v + d_e + c];
          grads.omega.at(0, c) += ds * dt;
          grads.phi.at(0, c) += ds;
        }
      }
    }
  }
  grads.clear_frozen_rows();
}

}  // namespace

Matrix masked_attention(const Matrix& z, const Matrix& mask, const ModelParams& params,
                        std::int64_t layer) {
  if (layer < 0 || layer >= static_cast<std::int64_t>(params.layers.size())) {
    throw ValidationError("layer index out of range");
  }
  if (z.cols() != static_cast<std::size_t>(params.config.d_model)) {
    throw ValidationError("input width must be d_model");
  }
  AttentionCache cache;
  cache.input = z;
  return attention_forward(mask, params.config, params.layers[layer], cache, 0.0, nullptr);
}

ForwardCache model_forward(const ModelParams& params, const SequenceBatch& batch, MaskKind kind,
                           bool training, std::uint64_t dropout_seed) {
  const ModelConfig& cfg = params.config;
  cfg.validate();
  batch.validate();
  pin_blas_single_thread();

  ForwardCache cache;
  cache.batch = batch;
  cache.mask = build_mask(batch, kind);
  cache.z = assemble_inputs(params, batch);

  const double rate = training ? cfg.dropout : 0.0;
  CounterRng drop_rng(dropout_seed, 0);
  CounterRng* rng = rate > 0.0 ? &drop_rng : nullptr;

  Matrix x = cache.z;
  cache.blocks.resize(cfg.num_layers);
  for (std::int64_t i = 0; i < cfg.num_layers; ++i) {
    BlockCache& blk = cache.blocks[i];
    const LayerParams& layer = params.layers[i];
    if (cfg.attention_only) {
      blk.attn.input = std::move(x);
      x = attention_forward(cache.mask, cfg, layer, blk.attn, rate, rng);
      continue;
    }
    blk.attn.input = ln_forward(x, layer.ln1_gamma, layer.ln1_beta, blk.n1_hat, blk.n1_rstd);
    Matrix attn_out = attention_forward(cache.mask, cfg, layer, blk.attn, rate, rng);
    add_inplace(attn_out, x);
    blk.h1 = std::move(attn_out);

    blk.ff_input = ln_forward(blk.h1, layer.ln2_gamma, layer.ln2_beta, blk.n2_hat, blk.n2_rstd);
    Matrix hidden = matmul(blk.ff_input, layer.ff_w1);
    add_row_broadcast(hidden, layer.ff_b1);
    for (std::size_t t = 0; t < hidden.size(); ++t) {
      hidden.data()[t] = std::max(0.0, hidden.data()[t]);
    }
    blk.ff_hidden = std::move(hidden);
    blk.ff_drop = Matrix();
    Matrix out;
    if (rng != nullptr) {
      blk.ff_drop = draw_dropout(blk.ff_hidden.rows(), blk.ff_hidden.cols(), rate, *rng);
      Matrix ff_act = blk.ff_hidden;
      for (std::size_t t = 0; t < ff_act.size(); ++t) {
        ff_act.data()[t] *= blk.ff_drop.data()[t];
      }
      out = matmul(ff_act, layer.ff_w2);
    } else {
      out = matmul(blk.ff_hidden, layer.ff_w2);
    }
    add_row_broadcast(out, layer.ff_b2);
    add_inplace(out, blk.h1);
    x = std::move(out);
  }

  cache.output = Matrix(batch.batch, static_cast<std::size_t>(cfg.d_model));
  for (std::int64_t b = 0; b < batch.batch; ++b) {
    const double* src = x.row(b * batch.l + batch.target_row[b]);
    std::copy(src, src + cfg.d_model, cache.output.row(b));
  }
  // Keep the final row stream for the last block's backward when L = 0 is
  // not involved; blocks already hold what backward needs, x can go.
  return cache;
}

ModelParams model_backward(const ModelParams& params, const ForwardCache& cache,
                           const Matrix& upstream) {
  const ModelConfig& cfg = params.config;
  const SequenceBatch& batch = cache.batch;
  if (upstream.rows() != static_cast<std::size_t>(batch.batch) ||
      upstream.cols() != static_cast<std::size_t>(cfg.d_model)) {
    throw ValidationError("upstream gradient has wrong shape");
  }

  ModelParams grads = params.zeros_like();

  Matrix dx(batch.batch * batch.l, static_cast<std::size_t>(cfg.d_model));
  for (std::int64_t b = 0; b < batch.batch; ++b) {
    const double* src = upstream.row(b);
    std::copy(src, src + cfg.d_model, dx.row(b * batch.l + batch.target_row[b]));
  }

  for (std::int64_t i = cfg.num_layers - 1; i >= 0; --i) {
    const BlockCache& blk = cache.blocks[i];
    const LayerParams& layer = params.layers[i];
    LayerParams& lgrads = grads.layers[i];
    if (cfg.attention_only) {
      dx = attention_backward(dx, cfg, layer, blk.attn, lgrads);
      continue;
    }
    // out = h1 + ff(ln2(h1)); dx arrives as d(out).
    if (blk.ff_drop.empty()) {
      gemm(true, false, 1.0, blk.ff_hidden, dx, 1.0, lgrads.ff_w2);
    } else {
      Matrix ff_act = blk.ff_hidden;
      for (std::size_t t = 0; t < ff_act.size(); ++t) {
        ff_act.data()[t] *= blk.ff_drop.data()[t];
      }
      gemm(true, false, 1.0, ff_act, dx, 1.0, lgrads.ff_w2);
    }
    accumulate_col_sums(dx, lgrads.ff_b2);
    Matrix d_hidden = matmul(dx, layer.ff_w2, false, true);
    if (!blk.ff_drop.empty()) {
      for (std::size_t t = 0; t < d_hidden.size(); ++t) {
        d_hidden.data()[t] *= blk.ff_drop.data()[t];
      }
    }
    for (std::size_t t = 0; t < d_hidden.size(); ++t) {
      if (blk.ff_hidden.data()[t] <= 0.0) d_hidden.data()[t] = 0.0;
    }
    gemm(true, false, 1.0, blk.ff_input, d_hidden, 1.0, lgrads.ff_w1);
    accumulate_col_sums(d_hidden, lgrads.ff_b1);
    Matrix d_ff_input = matmul(d_hidden, layer.ff_w1, false, true);

    Matrix dh1 = ln_backward(d_ff_input, blk.n2_hat, blk.n2_rstd, layer.ln2_gamma,
                             lgrads.ln2_gamma, lgrads.ln2_beta);
    add_inplace(dh1, dx);

    // h1 = x_in + attn(ln1(x_in)); dh1 covers both paths.
    Matrix d_n1 = attention_backward(dh1, cfg, layer, blk.attn, lgrads);
    dx = ln_backward(d_n1, blk.n1_hat, blk.n1_rstd, layer.ln1_gamma, lgrads.ln1_gamma,
                     lgrads.ln1_beta);
    add_inplace(dx, dh1);
  }

  assemble_backward(params, batch, dx, grads);
  return grads;
}

namespace {
constexpr char kCkptMagic[4] = {'T', 'F', 'C', 'K'};
constexpr std::uint8_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  detail::CrcWriter w(path);
  w.write(kCkptMagic, sizeof(kCkptMagic));
  w.write_value<std::uint8_t>(kCkptVersion);
  const ModelConfig& c = params.config;
  w.write_value<std::int64_t>(c.num_nodes);
  w.write_value<std::int64_t>(c.num_edges);
  w.write_value<std::int64_t>(c.num_layers);
  w.write_value<std::int64_t>(c.num_heads);
  w.write_value<std::int64_t>(c.d_model);
  w.write_value<std::int64_t>(c.d_v);
  w.write_value<std::int64_t>(c.d_e);
  w.write_value<std::int64_t>(c.d_t);
  w.write_value<std::uint8_t>(c.combine == CombineMode::concat ? 1 : 0);
  w.write_value<std::uint8_t>(c.attention_only ? 1 : 0);
  w.write_value<double>(c.dropout);

  std::uint32_t count = 0;
  params.for_each_tensor([&count](const std::string&, const Matrix&) { ++count; });
  w.write_value<std::uint32_t>(count);
  params.for_each_tensor([&w](const std::string& name, const Matrix& m) {
    w.write_string(name);
    w.write_value<std::uint64_t>(m.rows());
    w.write_value<std::uint64_t>(m.cols());
    w.write(m.data(), m.size() * sizeof(double));
  });
  w.finish_crc();
}

ModelParams load_checkpoint(const std::string& path) {
  detail::ByteReader r = detail::open_checked(path);
  char magic[4];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0) throw FormatError("bad magic");
  const auto version = r.read_value<std::uint8_t>();
  if (version != kCkptVersion) {
    throw FormatError("unsupported version " + std::to_string(version));
  }
  ModelConfig c;
  c.num_nodes = r.read_value<std::int64_t>();
  c.num_edges = r.read_value<std::int64_t>();
  c.num_layers = r.read_value<std::int64_t>();
  c.num_heads = r.read_value<std::int64_t>();
  c.d_model = r.read_value<std::int64_t>();
  c.d_v = r.read_value<std::int64_t>();
  c.d_e = r.read_value<std::int64_t>();
  c.d_t = r.read_value<std::int64_t>();
  c.combine = r.read_value<std::uint8_t>() != 0 ? CombineMode::concat : CombineMode::sum;
  c.attention_only = r.read_value<std::uint8_t>() != 0;
  c.dropout = r.read_value<double>();
  c.validate();

  ModelParams params = ModelParams::init(c, 0);
  const auto count = r.read_value<std::uint32_t>();
  std::uint32_t seen = 0;
  params.for_each_tensor([&](const std::string& name, Matrix& m) {
    ++seen;
    const std::string stored = r.read_string();
    if (stored != name) throw FormatError("tensor order mismatch: expected " + name);
    const auto rows = r.read_value<std::uint64_t>();
    const auto cols = r.read_value<std::uint64_t>();
    if (rows != m.rows() || cols != m.cols()) {
      throw FormatError("tensor '" + name + "' has unexpected shape");
    }
    r.read(m.data(), m.size() * sizeof(double));
  });
  if (seen != count || r.remaining() != 0) throw FormatError("tensor count mismatch");
  return params;
}

}  // namespace tgf
