// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgformer/tcsr.hpp"

namespace tgf {

struct NeighborEntry {
  NodeId neighbor;
  EdgeId edge;
  Time timestamp;
};

// Up to k neighbors of query_node with timestamps strictly before query_time,
// ascending by (timestamp, edge id).
struct NeighborSample {
  NodeId query_node = 0;
  Time query_time = 0.0;
  std::vector<NeighborEntry> neighbors;
};

enum class SampleStrategy { recent, random };

SampleStrategy parse_strategy(const std::string& name);

// The most recent min(k, m) entries before t, where m counts the slice prefix
// with timestamp < t (found by binary search).
NeighborSample sample_recent(const TCsr& g, NodeId u, Time t, std::int64_t k);

// Uniform sample without replacement from the same prefix; all m entries when
// m <= k.  Draws come from the (seed, stream) counter generator, so results
// depend only on those two values.  sample_batch uses stream = query index.
NeighborSample sample_random(const TCsr& g, NodeId u, Time t, std::int64_t k,
                             std::uint64_t seed, std::uint64_t stream = 0);

// Element-wise equal to the per-query functions above (random queries use
// stream = their index).  Queries run in parallel; the graph is only read.
std::vector<NeighborSample> sample_batch(const TCsr& g, const std::vector<NodeId>& nodes,
                                         const std::vector<Time>& times, std::int64_t k,
                                         SampleStrategy strategy, std::uint64_t seed,
                                         int num_threads = 0);

}  // namespace tgf
