// SPDX-License-Identifier: Apache-2.0
#include "tgformer/sequence.hpp"

#include <algorithm>
#include <limits>

namespace tgf {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void SequenceBatch::validate() const {
  const auto total = static_cast<std::size_t>(batch * l);
  if (node_index.size() != total || edge_index.size() != total ||
      time_delta.rows() != static_cast<std::size_t>(batch) ||
      time_delta.cols() != static_cast<std::size_t>(l) ||
      valid_len.size() != static_cast<std::size_t>(batch) ||
      target_row.size() != static_cast<std::size_t>(batch)) {
    throw ValidationError("sequence batch shape mismatch");
  }
  for (std::int64_t b = 0; b < batch; ++b) {
    const std::int64_t len = valid_len[b];
    if (len < 1 || len > l) throw ValidationError("valid_len out of range");
    if (target_row[b] != len - 1) throw ValidationError("target_row must be valid_len-1");
    const std::int64_t base = b * l;
    for (std::int64_t j = 0; j < l; ++j) {
      const bool pad = j >= len;
      if (pad != (node_index[base + j] == 0)) {
        throw ValidationError("padding does not match valid_len");
      }
      if (pad && (edge_index[base + j] != 0 || time_delta.at(b, j) != 0.0)) {
        throw ValidationError("padding positions must be zero");
      }
      if (time_delta.at(b, j) < 0.0) throw ValidationError("negative time delta");
    }
    if (time_delta.at(b, target_row[b]) != 0.0) {
      throw ValidationError("query position must have zero time delta");
    }
    for (std::int64_t j = 1; j + 1 < len; ++j) {
      if (time_delta.at(b, j - 1) < time_delta.at(b, j)) {
        throw ValidationError("neighbor time deltas must be non-increasing");
      }
    }
  }
}

MaskKind parse_mask_kind(const std::string& name) {
  if (name == "causal") return MaskKind::causal;
  if (name == "tgat") return MaskKind::tgat;
  if (name == "self_loop") return MaskKind::self_loop;
  throw ValidationError("unknown mask kind '" + name + "'");
}

SequenceBatch build_sequence_batch(const std::vector<NeighborSample>& samples, std::int64_t l,
                                   std::int64_t self_edge_index) {
  if (l < 2) throw ValidationError("sequence length must be at least 2");
  SequenceBatch out;
  out.batch = static_cast<std::int64_t>(samples.size());
  out.l = l;
  out.node_index.assign(out.batch * l, 0);
  out.edge_index.assign(out.batch * l, 0);
  out.time_delta = Matrix(out.batch, l);
  out.valid_len.resize(out.batch);
  out.target_row.resize(out.batch);

  for (std::int64_t b = 0; b < out.batch; ++b) {
    const NeighborSample& s = samples[b];
    const auto total = static_cast<std::int64_t>(s.neighbors.size());
    const std::int64_t k = std::min(total, l - 1);
    const std::int64_t skip = total - k;  // drop all but the most recent l-1
    const std::int64_t base = b * l;
    for (std::int64_t j = 0; j < k; ++j) {
      const NeighborEntry& e = s.neighbors[skip + j];
      out.node_index[base + j] = e.neighbor + 1;
      out.edge_index[base + j] = e.edge + 1;
      out.time_delta.at(b, j) = s.query_time - e.timestamp;
    }
    out.node_index[base + k] = s.query_node + 1;
    out.edge_index[base + k] = self_edge_index;
    out.time_delta.at(b, k) = 0.0;
    out.valid_len[b] = k + 1;
    out.target_row[b] = k;
  }
  return out;
}

SequenceBatch build_sequence(const NeighborSample& sample, std::int64_t l,
                             std::int64_t self_edge_index) {
  return build_sequence_batch({sample}, l, self_edge_index);
}

Matrix build_mask(const SequenceBatch& batch, MaskKind kind) {
  Matrix mask(batch.batch * batch.l, batch.l);
  mask.fill(kNegInf);
  for (std::int64_t b = 0; b < batch.batch; ++b) {
    const std::int64_t len = batch.valid_len[b];
    const std::int64_t k = batch.target_row[b];
    for (std::int64_t i = 0; i < batch.l; ++i) {
      double* row = mask.row(b * batch.l + i);
      if (kind == MaskKind::causal) {
        const std::int64_t hi = std::min(i + 1, len);
        std::fill(row, row + hi, 0.0);
      } else if (i == k) {
        const std::int64_t hi = kind == MaskKind::self_loop ? k + 1 : k;
        std::fill(row, row + hi, 0.0);
      }
    }
  }
  return mask;
}

}  // namespace tgf
