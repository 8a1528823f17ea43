// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "tgformer/event_stream.hpp"

namespace tgf {

// Random stream for benchmarks and property tests.  Endpoints follow a Zipf
// draw (default exponent 1.2) so per-node slices vary widely in length;
// timestamps are integer-valued and drawn with many collisions so equal-time
// tie-breaking gets exercised.
EventStream make_random_stream(std::int64_t num_edges, NodeId num_nodes, std::uint64_t seed,
                               double zipf_exponent = 1.2);

// Stream whose signal is a fixed pairing: node 2i interacts only with node
// 2i+1, round-robin over pairs with strictly increasing timestamps.  A model
// that learns the pairing separates true continuations from random negatives.
EventStream make_planted_stream(NodeId num_pairs, std::int64_t events_per_pair,
                                std::uint64_t seed);

}  // namespace tgf
