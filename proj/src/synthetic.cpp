// SPDX-License-Identifier: Apache-2.0
#include "tgformer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tgformer/rng.hpp"

namespace tgf {

EventStream make_random_stream(std::int64_t num_edges, NodeId num_nodes, std::uint64_t seed,
                               double zipf_exponent) {
  if (num_edges < 0 || num_nodes < 1) throw ValidationError("bad stream dimensions");

  std::vector<double> cdf(num_nodes);
  double total = 0.0;
  for (NodeId i = 0; i < num_nodes; ++i) {
    total += std::pow(static_cast<double>(i + 1), -zipf_exponent);
    cdf[i] = total;
  }
  for (double& c : cdf) c /= total;

  CounterRng rng(seed, 0);
  auto draw_node = [&]() -> NodeId {
    const double u = rng.next_double();
    return std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
  };

  // Coarse integer timestamps force plenty of equal-time collisions.
  const std::uint64_t time_range = std::max<std::uint64_t>(1, num_edges / 2);
  std::vector<Time> times(num_edges);
  for (Time& t : times) t = static_cast<Time>(rng.next_below(time_range));
  std::sort(times.begin(), times.end());

  EventStream stream;
  stream.num_nodes = num_nodes;
  stream.events.reserve(num_edges);
  for (std::int64_t i = 0; i < num_edges; ++i) {
    stream.events.push_back({i, draw_node(), draw_node(), times[i]});
  }
  return stream;
}

EventStream make_planted_stream(NodeId num_pairs, std::int64_t events_per_pair,
                                std::uint64_t seed) {
  if (num_pairs < 1 || events_per_pair < 1) throw ValidationError("bad stream dimensions");

  CounterRng rng(seed, 0);
  EventStream stream;
  stream.num_nodes = 2 * num_pairs;
  const std::int64_t n = num_pairs * events_per_pair;
  stream.events.reserve(n);
  Time t = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const NodeId pair = static_cast<NodeId>(i) % num_pairs;
    t += 1.0 + rng.next_double();
    stream.events.push_back({i, 2 * pair, 2 * pair + 1, t});
  }
  return stream;
}

}  // namespace tgf
