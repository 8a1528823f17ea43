// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgformer/event_stream.hpp"

namespace tgf {

// Compressed sparse row adjacency over a temporal event stream.  The slice
// indptr[u] .. indptr[u+1] holds node u's incident events sorted by
// (timestamp, edge_id) ascending, so equal timestamps keep stream order and
// the layout is identical no matter how many threads built it.
//
// With reverse=true every event (u, v) appears in both endpoint lists, which
// is the usual setting for undirected interaction data.  With reverse=false
// only the source list gets the event.
struct TCsr {
  NodeId num_nodes = 0;
  std::int64_t num_edges = 0;  // events in the originating stream
  bool reverse = true;

  std::vector<std::int64_t> indptr;        // num_nodes + 1
  std::vector<NodeId> neighbor_ids;        // other endpoint per entry
  std::vector<EdgeId> edge_ids;            // originating event per entry
  std::vector<Time> timestamps;            // event time per entry

  std::int64_t num_entries() const { return static_cast<std::int64_t>(neighbor_ids.size()); }
  std::int64_t degree(NodeId u) const { return indptr[u + 1] - indptr[u]; }
  void validate() const;
};

// Single-threaded reference conversion: counting sort into slices, then a
// per-node sort by (timestamp, edge_id).
TCsr build_sequential(const EventStream& stream, bool reverse = true);

// Multi-threaded conversion producing element-for-element the same structure
// as build_sequential: parallel atomic degree count, prefix sum, parallel
// scatter through atomic cursors, parallel per-node slice sort.  num_threads
// must be at least 1.
TCsr build_parallel(const EventStream& stream, bool reverse, int num_threads);

// Binary container with a trailing CRC-32 over everything before it.
void save_tcsr(const TCsr& graph, const std::string& path);
TCsr load_tcsr(const std::string& path);

}  // namespace tgf
