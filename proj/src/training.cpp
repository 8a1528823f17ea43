// SPDX-License-Identifier: Apache-2.0
#include "tgformer/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tgformer/rng.hpp"

namespace tgf {

namespace {

std::uint64_t mix_streams(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a ^ 0x8f1bbcdcbfa53e0bULL) ^ mix64(b) ^ (c * 0x2545f4914f6cdd1dULL));
}

double parse_double_value(const std::string& v, const std::string& key) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ParseError("bad numeric value for '" + key + "'");
  }
  return out;
}

std::int64_t parse_int_value(const std::string& v, const std::string& key) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ParseError("bad integer value for '" + key + "'");
  }
  return out;
}

}  // namespace

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw ValidationError("unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (seq_len < 2) throw ValidationError("seq_len must be at least 2");
  if (neighbors < 1 || neighbors > seq_len - 1) {
    throw ValidationError("neighbors must be in [1, seq_len-1]");
  }
  if (layers < 0 || heads < 1 || d_model < 1 || d_t < 1) {
    throw ValidationError("bad model dimensions");
  }
  if (learning_rate <= 0.0) throw ValidationError("learning_rate must be positive");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (negatives < 1) throw ValidationError("negatives must be positive");
  if (workers < 1) throw ValidationError("workers must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must be in [0, 1)");
}

ModelConfig TrainConfig::model_config(NodeId num_nodes, std::int64_t num_edges) const {
  validate();
  ModelConfig mc;
  mc.num_nodes = num_nodes;
  mc.num_edges = num_edges;
  mc.num_layers = layers;
  mc.num_heads = heads;
  mc.d_model = d_model;
  mc.combine = combine;
  mc.dropout = dropout;
  if (combine == CombineMode::sum) {
    if (d_t != d_model) {
      throw ValidationError("sum combine requires d_t = d_model");
    }
    mc.d_v = mc.d_e = mc.d_t = d_model;
  } else {
    mc.d_t = d_t;
    mc.d_e = d_t;
    mc.d_v = d_model - 2 * d_t;
    if (mc.d_v < 1) {
      throw ValidationError("concat combine requires d_model > 2*d_t");
    }
  }
  mc.validate();
  return mc;
}

std::string TrainConfig::to_string() const {
  std::ostringstream os;
  os << "batch_size=" << batch_size << " neighbors=" << neighbors << " seq_len=" << seq_len
     << " layers=" << layers << " heads=" << heads << " d_model=" << d_model << " d_t=" << d_t
     << " combine=" << (combine == CombineMode::sum ? "sum" : "concat")
     << " learning_rate=" << learning_rate << " epochs=" << epochs << " negatives=" << negatives
     << " workers=" << workers << " seed=" << seed << " mask="
     << (mask == MaskKind::causal ? "causal" : mask == MaskKind::tgat ? "tgat" : "self_loop")
     << " dropout=" << dropout
     << " optimizer=" << (optimizer == OptimizerKind::adam ? "adam" : "sgd")
     << " strategy=" << (strategy == SampleStrategy::recent ? "recent" : "random");
  return os.str();
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key == "batch_size") cfg.batch_size = parse_int_value(value, key);
    else if (key == "neighbors") cfg.neighbors = parse_int_value(value, key);
    else if (key == "seq_len") cfg.seq_len = parse_int_value(value, key);
    else if (key == "layers") cfg.layers = parse_int_value(value, key);
    else if (key == "heads") cfg.heads = parse_int_value(value, key);
    else if (key == "d_model") cfg.d_model = parse_int_value(value, key);
    else if (key == "d_t") cfg.d_t = parse_int_value(value, key);
    else if (key == "combine") cfg.combine = parse_combine_mode(value);
    else if (key == "learning_rate") cfg.learning_rate = parse_double_value(value, key);
    else if (key == "epochs") cfg.epochs = parse_int_value(value, key);
    else if (key == "negatives") cfg.negatives = parse_int_value(value, key);
    else if (key == "workers") cfg.workers = parse_int_value(value, key);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int_value(value, key));
    else if (key == "mask") cfg.mask = parse_mask_kind(value);
    else if (key == "dropout") cfg.dropout = parse_double_value(value, key);
    else if (key == "optimizer") cfg.optimizer = parse_optimizer(value);
    else if (key == "strategy") cfg.strategy = parse_strategy(value);
    else throw ParseError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str());
}

std::vector<LinkBatch> make_batches(const EventStream& train, std::int64_t batch_size,
                                    std::int64_t neg_per_pos, NodeId num_nodes,
                                    std::uint64_t seed) {
  if (train.size() == 0) throw ValidationError("empty training stream");
  if (batch_size < 1 || neg_per_pos < 1) throw ValidationError("bad batch parameters");

  std::vector<LinkBatch> out;
  const std::int64_t n = train.size();
  for (std::int64_t start = 0, index = 0; start < n; start += batch_size, ++index) {
    const std::int64_t stop = std::min(start + batch_size, n);
    LinkBatch b;
    b.src.reserve(stop - start);
    CounterRng rng(seed, static_cast<std::uint64_t>(index));
    for (std::int64_t i = start; i < stop; ++i) {
      const TemporalEvent& e = train.events[i];
      b.src.push_back(e.src);
      b.dst.push_back(e.dst);
      b.times.push_back(e.timestamp);
      for (std::int64_t j = 0; j < neg_per_pos; ++j) {
        b.neg.push_back(static_cast<NodeId>(rng.next_below(num_nodes)));
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

ConcatForward forward_concat(const ModelParams& params, const LinkBatch& batch, const TCsr& graph,
                             const TrainConfig& cfg, bool training, std::uint64_t sample_seed,
                             std::uint64_t dropout_seed) {
  const auto b = static_cast<std::int64_t>(batch.src.size());
  if (batch.dst.size() != batch.src.size() || batch.times.size() != batch.src.size() ||
      batch.neg.size() != batch.src.size() * static_cast<std::size_t>(cfg.negatives)) {
    throw ValidationError("link batch shape mismatch");
  }

  std::vector<NodeId> nodes;
  std::vector<Time> times;
  const std::int64_t total = 2 * b + b * cfg.negatives;
  nodes.reserve(total);
  times.reserve(total);
  for (std::int64_t i = 0; i < b; ++i) {
    nodes.push_back(batch.src[i]);
    times.push_back(batch.times[i]);
  }
  for (std::int64_t i = 0; i < b; ++i) {
    nodes.push_back(batch.dst[i]);
    times.push_back(batch.times[i]);
  }
  for (std::int64_t j = 0; j < b * cfg.negatives; ++j) {
    nodes.push_back(batch.neg[j]);
    times.push_back(batch.times[j / cfg.negatives]);
  }

  const std::vector<NeighborSample> samples =
      sample_batch(graph, nodes, times, cfg.neighbors, cfg.strategy, sample_seed);
  const SequenceBatch seq =
      build_sequence_batch(samples, cfg.seq_len, params.config.self_edge_index());

  ConcatForward out;
  out.cache = model_forward(params, seq, cfg.mask, training, dropout_seed);

  const auto d = static_cast<std::size_t>(params.config.d_model);
  auto chunk = [&](std::int64_t row0, std::int64_t count) {
    Matrix m(count, d);
    for (std::int64_t i = 0; i < count; ++i) {
      const double* src_row = out.cache.output.row(row0 + i);
      std::copy(src_row, src_row + d, m.row(i));
    }
    return m;
  };
  out.src_emb = chunk(0, b);
  out.dst_emb = chunk(b, b);
  out.neg_emb = chunk(2 * b, b * cfg.negatives);
  return out;
}

namespace {

// Decoder forward shared by scoring and loss: H = relu([u||v] W1 + b1),
// s = H w2 + b2.
struct DecoderCache {
  Matrix input;   // n x 2d
  Matrix hidden;  // n x d, post-ReLU
  Matrix scores;  // n x 1
};

DecoderCache decoder_forward(const ModelParams& params, const Matrix& u_emb,
                             const Matrix& v_emb) {
  if (!u_emb.same_shape(v_emb)) throw ValidationError("pair embedding shapes differ");
  const std::size_t n = u_emb.rows(), d = u_emb.cols();
  DecoderCache c;
  c.input = Matrix(n, 2 * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(u_emb.row(i), u_emb.row(i) + d, c.input.row(i));
    std::copy(v_emb.row(i), v_emb.row(i) + d, c.input.row(i) + d);
  }
  c.hidden = Matrix(n, d);
  gemm(false, false, 1.0, c.input, params.dec_w1, 0.0, c.hidden);
  for (std::size_t i = 0; i < n; ++i) {
    double* h = c.hidden.row(i);
    const double* bias = params.dec_b1.row(0);
    for (std::size_t j = 0; j < d; ++j) h[j] = std::max(0.0, h[j] + bias[j]);
  }
  c.scores = Matrix(n, 1);
  gemm(false, false, 1.0, c.hidden, params.dec_w2, 0.0, c.scores);
  for (std::size_t i = 0; i < n; ++i) c.scores.at(i, 0) += params.dec_b2.at(0, 0);
  return c;
}

// Backpropagates d(scores) through the decoder; returns d(input) and
// accumulates decoder parameter gradients.
Matrix decoder_backward(const ModelParams& params, const DecoderCache& cache,
                        const Matrix& d_scores, ModelParams& grads) {
  const std::size_t n = cache.input.rows();
  const std::size_t d = cache.hidden.cols();

  gemm(true, false, 1.0, cache.hidden, d_scores, 1.0, grads.dec_w2);
  for (std::size_t i = 0; i < n; ++i) grads.dec_b2.at(0, 0) += d_scores.at(i, 0);

  Matrix d_hidden(n, d);
  gemm(false, true, 1.0, d_scores, params.dec_w2, 0.0, d_hidden);
  for (std::size_t i = 0; i < n; ++i) {
    double* dh = d_hidden.row(i);
    const double* h = cache.hidden.row(i);
    double* db = grads.dec_b1.row(0);
    for (std::size_t j = 0; j < d; ++j) {
      if (h[j] <= 0.0) dh[j] = 0.0;
      db[j] += dh[j];
    }
  }
  gemm(true, false, 1.0, cache.input, d_hidden, 1.0, grads.dec_w1);
  Matrix d_input(n, 2 * d);
  gemm(false, true, 1.0, d_hidden, params.dec_w1, 0.0, d_input);
  return d_input;
}

double bce_with_logits(double score, double label) {
  return std::max(score, 0.0) + std::log1p(std::exp(-std::abs(score))) - label * score;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Matrix decode_pairs(const ModelParams& params, const Matrix& u_emb, const Matrix& v_emb) {
  return decoder_forward(params, u_emb, v_emb).scores;
}

LossGrads link_loss(const ModelParams& params, const Matrix& src_emb, const Matrix& dst_emb,
                    const Matrix& neg_emb, ModelParams& grads) {
  const std::size_t b = src_emb.rows();
  const std::size_t bn = neg_emb.rows();
  if (b == 0 || bn % b != 0) throw ValidationError("negative count must be a multiple of b");
  const std::size_t npp = bn / b;
  const std::size_t d = src_emb.cols();
  const std::size_t total = b + bn;

  // Pair rows: positives first, then negatives with repeated sources.
  Matrix u(total, d), v(total, d);
  for (std::size_t i = 0; i < b; ++i) {
    std::copy(src_emb.row(i), src_emb.row(i) + d, u.row(i));
    std::copy(dst_emb.row(i), dst_emb.row(i) + d, v.row(i));
  }
  for (std::size_t j = 0; j < bn; ++j) {
    std::copy(src_emb.row(j / npp), src_emb.row(j / npp) + d, u.row(b + j));
    std::copy(neg_emb.row(j), neg_emb.row(j) + d, v.row(b + j));
  }

  DecoderCache cache = decoder_forward(params, u, v);

  LossGrads out;
  Matrix d_scores(total, 1);
  const double inv_total = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < total; ++i) {
    const double label = i < b ? 1.0 : 0.0;
    const double s = cache.scores.at(i, 0);
    out.loss += bce_with_logits(s, label) * inv_total;
    d_scores.at(i, 0) = (sigmoid(s) - label) * inv_total;
  }

  const Matrix d_input = decoder_backward(params, cache, d_scores, grads);

  out.d_src = Matrix(b, d);
  out.d_dst = Matrix(b, d);
  out.d_neg = Matrix(bn, d);
  for (std::size_t i = 0; i < b; ++i) {
    const double* din = d_input.row(i);
    for (std::size_t c = 0; c < d; ++c) {
      out.d_src.at(i, c) += din[c];
      out.d_dst.at(i, c) += din[d + c];
    }
  }
  for (std::size_t j = 0; j < bn; ++j) {
    const double* din = d_input.row(b + j);
    double* ds = out.d_src.row(j / npp);
    for (std::size_t c = 0; c < d; ++c) {
      ds[c] += din[c];
      out.d_neg.at(j, c) += din[d + c];
    }
  }
  return out;
}

OptimizerState OptimizerState::init(const ModelParams& params) {
  OptimizerState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void add_scaled(ModelParams& acc, const ModelParams& grads, double scale) {
  std::vector<Matrix*> dst;
  acc.for_each_tensor([&dst](const std::string&, Matrix& m) { dst.push_back(&m); });
  std::size_t i = 0;
  grads.for_each_tensor([&](const std::string&, const Matrix& g) {
    Matrix& a = *dst[i++];
    if (!a.same_shape(g)) throw ValidationError("gradient shape mismatch");
    for (std::size_t t = 0; t < a.size(); ++t) a.data()[t] += scale * g.data()[t];
  });
}

void apply_update(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                  OptimizerKind kind, double learning_rate) {
  std::vector<const Matrix*> g_list;
  grads.for_each_tensor([&](const std::string&, const Matrix& g) { g_list.push_back(&g); });
  std::vector<Matrix*> m_list, v_list;
  state.m.for_each_tensor([&](const std::string&, Matrix& m) { m_list.push_back(&m); });
  state.v.for_each_tensor([&](const std::string&, Matrix& m) { v_list.push_back(&m); });

  if (kind == OptimizerKind::sgd) {
    std::size_t i = 0;
    params.for_each_tensor([&](const std::string&, Matrix& p) {
      const Matrix& g = *g_list[i++];
      for (std::size_t t = 0; t < p.size(); ++t) {
        p.data()[t] -= learning_rate * g.data()[t];
      }
    });
  } else {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    std::size_t i = 0;
    params.for_each_tensor([&](const std::string&, Matrix& p) {
      const Matrix& g = *g_list[i];
      Matrix& m = *m_list[i];
      Matrix& v = *v_list[i];
      ++i;
      for (std::size_t t = 0; t < p.size(); ++t) {
        const double gt = g.data()[t];
        m.data()[t] = beta1 * m.data()[t] + (1.0 - beta1) * gt;
        v.data()[t] = beta2 * v.data()[t] + (1.0 - beta2) * gt * gt;
        const double mhat = m.data()[t] / bc1;
        const double vhat = v.data()[t] / bc2;
        p.data()[t] -= learning_rate * mhat / (std::sqrt(vhat) + eps);
      }
    });
  }
  params.clear_frozen_rows();
}

double train_epoch(ModelParams& params, OptimizerState& state, const EventStream& train,
                   const TCsr& graph, const TrainConfig& cfg, std::int64_t epoch) {
  cfg.validate();
  const std::vector<LinkBatch> batches =
      make_batches(train, cfg.batch_size, cfg.negatives, graph.num_nodes,
                   mix_streams(cfg.seed, 0x6e67, static_cast<std::uint64_t>(epoch)));

  double loss_sum = 0.0;
  std::int64_t pair_count = 0;
  for (std::size_t step = 0; step < batches.size(); ++step) {
    const LinkBatch& batch = batches[step];
    const auto b = static_cast<std::int64_t>(batch.src.size());
    const std::int64_t m = std::min<std::int64_t>(cfg.workers, b);

    ModelParams accum = params.zeros_like();
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::int64_t shard = 0; shard < m; ++shard) {
      const std::int64_t lo = shard * b / m;
      const std::int64_t hi = (shard + 1) * b / m;
      LinkBatch part;
      part.src.assign(batch.src.begin() + lo, batch.src.begin() + hi);
      part.dst.assign(batch.dst.begin() + lo, batch.dst.begin() + hi);
      part.times.assign(batch.times.begin() + lo, batch.times.begin() + hi);
      part.neg.assign(batch.neg.begin() + lo * cfg.negatives,
                      batch.neg.begin() + hi * cfg.negatives);

      const std::uint64_t sample_seed =
          mix_streams(cfg.seed, static_cast<std::uint64_t>(epoch) * 0x10001 + step, shard);
      const std::uint64_t dropout_seed = mix_streams(cfg.seed ^ 0xd509, step, shard);
      ConcatForward fwd =
          forward_concat(params, part, graph, cfg, true, sample_seed, dropout_seed);

      ModelParams grads = params.zeros_like();
      LossGrads lg = link_loss(params, fwd.src_emb, fwd.dst_emb, fwd.neg_emb, grads);

      const auto pb = static_cast<std::int64_t>(part.src.size());
      Matrix upstream(2 * pb + pb * cfg.negatives, static_cast<std::size_t>(cfg.d_model));
      for (std::int64_t i = 0; i < pb; ++i) {
        std::copy(lg.d_src.row(i), lg.d_src.row(i) + cfg.d_model, upstream.row(i));
        std::copy(lg.d_dst.row(i), lg.d_dst.row(i) + cfg.d_model, upstream.row(pb + i));
      }
      for (std::int64_t j = 0; j < pb * cfg.negatives; ++j) {
        std::copy(lg.d_neg.row(j), lg.d_neg.row(j) + cfg.d_model, upstream.row(2 * pb + j));
      }
      add_scaled(grads, model_backward(params, fwd.cache, upstream), 1.0);
      add_scaled(accum, grads, inv_m);

      const std::int64_t shard_pairs = pb + pb * cfg.negatives;
      loss_sum += lg.loss * static_cast<double>(shard_pairs);
      pair_count += shard_pairs;
    }
    apply_update(params, accum, state, cfg.optimizer, cfg.learning_rate);
  }
  return loss_sum / static_cast<double>(pair_count);
}

}  // namespace tgf
