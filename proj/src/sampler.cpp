// SPDX-License-Identifier: Apache-2.0
#include "tgformer/sampler.hpp"

#include <omp.h>

#include <algorithm>

#include "tgformer/rng.hpp"

namespace tgf {

namespace {

// First slice offset whose timestamp is >= t, so [lo, lo+m) is the strict
// "before t" prefix.
std::int64_t prefix_end(const TCsr& g, NodeId u, Time t) {
  const auto begin = g.timestamps.begin() + g.indptr[u];
  const auto end = g.timestamps.begin() + g.indptr[u + 1];
  return std::lower_bound(begin, end, t) - begin;
}

void check_query(const TCsr& g, NodeId u, std::int64_t k) {
  if (u < 0 || u >= g.num_nodes) {
    throw ValidationError("query node " + std::to_string(u) + " out of range");
  }
  if (k < 1) throw ValidationError("k must be at least 1");
}

NeighborEntry entry_at(const TCsr& g, std::int64_t pos) {
  return {g.neighbor_ids[pos], g.edge_ids[pos], g.timestamps[pos]};
}

}  // namespace

SampleStrategy parse_strategy(const std::string& name) {
  if (name == "recent") return SampleStrategy::recent;
  if (name == "random") return SampleStrategy::random;
  throw ValidationError("unknown sampling strategy '" + name + "'");
}

NeighborSample sample_recent(const TCsr& g, NodeId u, Time t, std::int64_t k) {
  check_query(g, u, k);
  NeighborSample out{u, t, {}};
  const std::int64_t lo = g.indptr[u];
  const std::int64_t m = prefix_end(g, u, t);
  const std::int64_t take = std::min(k, m);
  out.neighbors.reserve(take);
  for (std::int64_t pos = lo + m - take; pos < lo + m; ++pos) {
    out.neighbors.push_back(entry_at(g, pos));
  }
  return out;
}

NeighborSample sample_random(const TCsr& g, NodeId u, Time t, std::int64_t k,
                             std::uint64_t seed, std::uint64_t stream) {
  check_query(g, u, k);
  NeighborSample out{u, t, {}};
  const std::int64_t lo = g.indptr[u];
  const std::int64_t m = prefix_end(g, u, t);
  if (m <= k) {
    out.neighbors.reserve(m);
    for (std::int64_t pos = lo; pos < lo + m; ++pos) out.neighbors.push_back(entry_at(g, pos));
    return out;
  }

  // Floyd's sampling: k uniform draws without replacement from [0, m).
  CounterRng rng(seed, stream);
  std::vector<std::int64_t> chosen;
  chosen.reserve(k);
  for (std::int64_t i = m - k; i < m; ++i) {
    const auto j = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) {
      chosen.push_back(i);
    } else {
      chosen.push_back(j);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  out.neighbors.reserve(k);
  for (std::int64_t offset : chosen) out.neighbors.push_back(entry_at(g, lo + offset));
  return out;
}

std::vector<NeighborSample> sample_batch(const TCsr& g, const std::vector<NodeId>& nodes,
                                         const std::vector<Time>& times, std::int64_t k,
                                         SampleStrategy strategy, std::uint64_t seed,
                                         int num_threads) {
  if (nodes.size() != times.size()) {
    throw ValidationError("node and time lists differ in length");
  }
  const int threads = num_threads > 0 ? num_threads : omp_get_max_threads();
  const auto n = static_cast<std::int64_t>(nodes.size());
  for (std::int64_t i = 0; i < n; ++i) check_query(g, nodes[i], k);

  std::vector<NeighborSample> out(n);
#pragma omp parallel for schedule(dynamic, 256) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = strategy == SampleStrategy::recent
                 ? sample_recent(g, nodes[i], times[i], k)
                 : sample_random(g, nodes[i], times[i], k, seed,
                                 static_cast<std::uint64_t>(i));
  }
  return out;
}

}  // namespace tgf
