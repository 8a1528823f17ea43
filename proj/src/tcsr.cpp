// SPDX-License-Identifier: Apache-2.0
#include "tgformer/tcsr.hpp"

#include <algorithm>
#include <cstring>

#include "binary_io.hpp"

namespace tgf {

namespace {

struct Entry {
  Time t;
  EdgeId e;
  NodeId nbr;
};

inline bool entry_less(const Entry& a, const Entry& b) {
  if (a.t != b.t) return a.t < b.t;
  return a.e < b.e;
}

// Shared tail of both builders: sort each node's slice by (timestamp,
// edge_id) and split the packed entries into the column arrays.
void finish(TCsr& g, std::vector<Entry>& entries, int threads) {
  const NodeId n = g.num_nodes;
  const std::int64_t m = static_cast<std::int64_t>(entries.size());
  g.neighbor_ids.resize(m);
  g.edge_ids.resize(m);
  g.timestamps.resize(m);
#pragma omp parallel for schedule(dynamic, 64) num_threads(threads)
  for (NodeId u = 0; u < n; ++u) {
    std::sort(entries.begin() + g.indptr[u], entries.begin() + g.indptr[u + 1], entry_less);
  }
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < m; ++i) {
    g.neighbor_ids[i] = entries[i].nbr;
    g.edge_ids[i] = entries[i].e;
    g.timestamps[i] = entries[i].t;
  }
}

void check_endpoints(const EventStream& stream) {
  for (const TemporalEvent& e : stream.events) {
    if (e.src < 0 || e.src >= stream.num_nodes || e.dst < 0 || e.dst >= stream.num_nodes) {
      throw ValidationError("event " + std::to_string(e.edge_id) + " endpoint out of range");
    }
  }
}

}  // namespace

void TCsr::validate() const {
  if (indptr.size() != static_cast<std::size_t>(num_nodes) + 1) {
    throw ValidationError("indptr size mismatch");
  }
  if (indptr.front() != 0 || indptr.back() != num_entries()) {
    throw ValidationError("indptr endpoints wrong");
  }
  if (edge_ids.size() != neighbor_ids.size() || timestamps.size() != neighbor_ids.size()) {
    throw ValidationError("column arrays disagree in length");
  }
  for (NodeId u = 0; u < num_nodes; ++u) {
    if (indptr[u] > indptr[u + 1]) throw ValidationError("indptr not monotone");
    for (std::int64_t i = indptr[u] + 1; i < indptr[u + 1]; ++i) {
      if (timestamps[i - 1] > timestamps[i] ||
          (timestamps[i - 1] == timestamps[i] && edge_ids[i - 1] > edge_ids[i])) {
        throw ValidationError("slice of node " + std::to_string(u) + " not sorted");
      }
    }
  }
  for (std::int64_t i = 0; i < num_entries(); ++i) {
    if (neighbor_ids[i] < 0 || neighbor_ids[i] >= num_nodes) {
      throw ValidationError("neighbor id out of range");
    }
    if (edge_ids[i] < 0 || edge_ids[i] >= num_edges) {
      throw ValidationError("edge id out of range");
    }
  }
}

TCsr build_sequential(const EventStream& stream, bool reverse) {
  check_endpoints(stream);
  TCsr g;
  g.num_nodes = stream.num_nodes;
  g.num_edges = stream.size();
  g.reverse = reverse;
  g.indptr.assign(g.num_nodes + 1, 0);

  for (const TemporalEvent& e : stream.events) {
    ++g.indptr[e.src + 1];
    if (reverse) ++g.indptr[e.dst + 1];
  }
  for (NodeId u = 0; u < g.num_nodes; ++u) g.indptr[u + 1] += g.indptr[u];

  std::vector<Entry> entries(g.indptr.back());
  std::vector<std::int64_t> cursor(g.indptr.begin(), g.indptr.end() - 1);
  for (const TemporalEvent& e : stream.events) {
    entries[cursor[e.src]++] = {e.timestamp, e.edge_id, e.dst};
    if (reverse) entries[cursor[e.dst]++] = {e.timestamp, e.edge_id, e.src};
  }
  finish(g, entries, 1);
  return g;
}

TCsr build_parallel(const EventStream& stream, bool reverse, int num_threads) {
  if (num_threads < 1) throw ValidationError("num_threads must be at least 1");
  check_endpoints(stream);
  const int threads = num_threads;
  TCsr g;
  g.num_nodes = stream.num_nodes;
  g.num_edges = stream.size();
  g.reverse = reverse;
  g.indptr.assign(g.num_nodes + 1, 0);

  const std::int64_t n = stream.size();
  const TemporalEvent* ev = stream.events.data();
  std::int64_t* deg = g.indptr.data() + 1;

#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
#pragma omp atomic
    ++deg[ev[i].src];
    if (reverse) {
#pragma omp atomic
      ++deg[ev[i].dst];
    }
  }

  for (NodeId u = 0; u < g.num_nodes; ++u) g.indptr[u + 1] += g.indptr[u];

  std::vector<Entry> entries(g.indptr.back());
  std::vector<std::int64_t> cursor(g.indptr.begin(), g.indptr.end() - 1);
  std::int64_t* cur = cursor.data();

#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t pos;
#pragma omp atomic capture
    pos = cur[ev[i].src]++;
    entries[pos] = {ev[i].timestamp, ev[i].edge_id, ev[i].dst};
    if (reverse) {
#pragma omp atomic capture
      pos = cur[ev[i].dst]++;
      entries[pos] = {ev[i].timestamp, ev[i].edge_id, ev[i].src};
    }
  }
  finish(g, entries, threads);
  return g;
}

namespace {
constexpr char kMagic[4] = {'T', 'C', 'S', 'R'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

// Layout (little-endian): magic, version u8, reverse u8, num_nodes u64,
// num_edges u64, num_entries u64, indptr i64[], neighbors i64[],
// edge ids i64[], timestamps f64[], CRC-32 u32 over all preceding bytes.
void save_tcsr(const TCsr& graph, const std::string& path) {
  detail::CrcWriter w(path);
  w.write(kMagic, sizeof(kMagic));
  w.write_value<std::uint8_t>(kVersion);
  w.write_value<std::uint8_t>(graph.reverse ? 1 : 0);
  w.write_value<std::uint64_t>(static_cast<std::uint64_t>(graph.num_nodes));
  w.write_value<std::uint64_t>(static_cast<std::uint64_t>(graph.num_edges));
  w.write_value<std::uint64_t>(static_cast<std::uint64_t>(graph.num_entries()));
  w.write_array(graph.indptr);
  w.write_array(graph.neighbor_ids);
  w.write_array(graph.edge_ids);
  w.write_array(graph.timestamps);
  w.finish_crc();
}

TCsr load_tcsr(const std::string& path) {
  detail::ByteReader r = detail::open_checked(path);
  char magic[4];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError("bad magic");
  const auto version = r.read_value<std::uint8_t>();
  if (version != kVersion) {
    throw FormatError("unsupported version " + std::to_string(version));
  }
  TCsr g;
  g.reverse = r.read_value<std::uint8_t>() != 0;
  g.num_nodes = static_cast<NodeId>(r.read_value<std::uint64_t>());
  g.num_edges = static_cast<std::int64_t>(r.read_value<std::uint64_t>());
  const auto entries = static_cast<std::size_t>(r.read_value<std::uint64_t>());
  r.read_array(g.indptr, static_cast<std::size_t>(g.num_nodes) + 1);
  r.read_array(g.neighbor_ids, entries);
  r.read_array(g.edge_ids, entries);
  r.read_array(g.timestamps, entries);
  if (r.remaining() != 0) throw FormatError("trailing bytes in container");
  g.validate();
  return g;
}

}  // namespace tgf
