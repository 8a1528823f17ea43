// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "tgformer/common.hpp"
#include "tgformer/matrix.hpp"

namespace tgf {

struct TemporalEvent {
  EdgeId edge_id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  Time timestamp = 0.0;
};

// Chronologically ordered interaction stream. Events are sorted
// non-decreasing by timestamp; for a freshly loaded or generated stream,
// edge ids are 0..n-1 in that order. Edge features (when present) are stored
// columnar, row-indexed by edge id. Streams produced by chronological_split
// are contiguous slices that keep their original edge ids and do not carry
// the feature matrices.
struct EventStream {
  std::vector<TemporalEvent> events;
  NodeId num_nodes = 0;
  std::int64_t d_e = 0;  // edge feature dimension, 0 if featureless
  std::int64_t d_v = 0;  // node feature dimension, 0 if featureless
  Matrix edge_features;  // n x d_e, or empty
  Matrix node_features;  // num_nodes x d_v, or empty

  std::int64_t size() const { return static_cast<std::int64_t>(events.size()); }

  // Throws ValidationError if any event references a node >= num_nodes,
  // timestamps are not sorted, or feature shapes disagree.
  void validate() const;
};

// Reads `src,dst,timestamp[,f1..fk]` rows (header line required). Events are
// stable-sorted by timestamp, preserving file order on ties, and edge ids are
// assigned 0..n-1 in sorted order. With has_features the feature columns
// (d_e inferred from the header) are parsed; otherwise extra columns are
// ignored.
EventStream load_csv(const std::string& path, bool has_features = false);

// Writes a stream back out in the same CSV format.
void write_csv(const EventStream& stream, const std::string& path);

// Positional chronological split at floor(n*train_frac) and
// floor(n*(train_frac+val_frac)). The three parts partition the event list
// exactly; equal timestamps may straddle a boundary.
std::tuple<EventStream, EventStream, EventStream> chronological_split(
    const EventStream& stream, double train_frac, double val_frac);

}  // namespace tgf
