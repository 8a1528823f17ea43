// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgformer/matrix.hpp"
#include "tgformer/sampler.hpp"

namespace tgf {

// Batch of fixed-length temporal sequences.  Each row holds a query node's
// neighbors ascending by (timestamp, edge id) at positions 0..k-1 and the
// query node itself at position k (suffix infilling), zero-padded to l.
//
// Ids are stored shifted by +1 so index 0 is exclusively padding.  The query
// position's edge_index holds the caller-supplied reserved self index, whose
// embedding row stays a frozen zero vector.
struct SequenceBatch {
  std::int64_t batch = 0;
  std::int64_t l = 0;
  std::vector<std::int64_t> node_index;  // batch x l, row-major
  std::vector<std::int64_t> edge_index;  // batch x l, row-major
  Matrix time_delta;                     // batch x l; 0 at the query position and padding
  std::vector<std::int64_t> valid_len;   // k+1 per row
  std::vector<std::int64_t> target_row;  // always valid_len-1

  void validate() const;
};

// causal: row i attends to columns 0..i.
// tgat: only the query row is live and attends to its neighbors (columns
//   0..k-1), never itself.
// self_loop: only the query row is live and attends to columns 0..k.
// Padding columns >= valid_len are masked for every kind.
enum class MaskKind { causal, tgat, self_loop };

MaskKind parse_mask_kind(const std::string& name);

// Truncation keeps the most recent l-1 neighbors when the sample is longer.
SequenceBatch build_sequence(const NeighborSample& sample, std::int64_t l,
                             std::int64_t self_edge_index);

SequenceBatch build_sequence_batch(const std::vector<NeighborSample>& samples, std::int64_t l,
                                   std::int64_t self_edge_index);

// Additive mask over {0, -inf}, one l x l block per batch row, returned as a
// (batch*l) x l matrix.
Matrix build_mask(const SequenceBatch& batch, MaskKind kind);

}  // namespace tgf
