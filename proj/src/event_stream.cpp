// SPDX-License-Identifier: Apache-2.0
#include "tgformer/event_stream.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>

namespace tgf {

namespace {

// Splits a CSV line in place. Returns number of fields.
std::size_t split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::int64_t parse_int(std::string_view field, std::size_t line_no, const char* what) {
  field = trim(field);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                     std::string(field) + "'");
  }
  return value;
}

double parse_real(std::string_view field, std::size_t line_no, const char* what) {
  field = trim(field);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                     std::string(field) + "'");
  }
  return value;
}

}  // namespace

void EventStream::validate() const {
  const std::int64_t n = size();
  for (std::int64_t i = 0; i < n; ++i) {
    const TemporalEvent& e = events[i];
    if (e.src < 0 || e.src >= num_nodes || e.dst < 0 || e.dst >= num_nodes) {
      throw ValidationError("event " + std::to_string(i) + ": node id out of range");
    }
    if (i > 0 && events[i - 1].timestamp > e.timestamp) {
      throw ValidationError("events not sorted by timestamp at index " + std::to_string(i));
    }
  }
  if (!edge_features.empty() &&
      (edge_features.rows() != static_cast<std::size_t>(n) ||
       edge_features.cols() != static_cast<std::size_t>(d_e))) {
    throw ValidationError("edge feature matrix shape mismatch");
  }
  if (!node_features.empty() &&
      (node_features.rows() != static_cast<std::size_t>(num_nodes) ||
       node_features.cols() != static_cast<std::size_t>(d_v))) {
    throw ValidationError("node feature matrix shape mismatch");
  }
}

EventStream load_csv(const std::string& path, bool has_features) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path + "'");

  std::vector<std::string_view> fields;
  const std::size_t header_fields = split_fields(trim(line), fields);
  if (header_fields < 3) throw ParseError("line 1: header needs at least src,dst,timestamp");
  const std::int64_t d_e = has_features ? static_cast<std::int64_t>(header_fields - 3) : 0;

  struct Row {
    NodeId src;
    NodeId dst;
    Time t;
    std::size_t order;  // file order, for stable ties
  };
  std::vector<Row> rows;
  std::vector<double> feats;  // file-order, d_e per row

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    split_fields(sv, fields);
    if (fields.size() < 3 + static_cast<std::size_t>(d_e)) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(3 + d_e) + " fields, got " +
                       std::to_string(fields.size()));
    }
    Row r;
    r.src = parse_int(fields[0], line_no, "src");
    r.dst = parse_int(fields[1], line_no, "dst");
    r.t = parse_real(fields[2], line_no, "timestamp");
    if (r.src < 0 || r.dst < 0) {
      throw ValidationError("line " + std::to_string(line_no) + ": negative node id");
    }
    if (r.t < 0.0) {
      throw ValidationError("line " + std::to_string(line_no) + ": negative timestamp");
    }
    r.order = rows.size();
    rows.push_back(r);
    for (std::int64_t f = 0; f < d_e; ++f) {
      feats.push_back(parse_real(fields[3 + f], line_no, "feature"));
    }
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.t < b.t; });

  EventStream stream;
  stream.d_e = d_e;
  stream.events.reserve(rows.size());
  NodeId max_node = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    stream.events.push_back({static_cast<EdgeId>(i), rows[i].src, rows[i].dst, rows[i].t});
    max_node = std::max({max_node, rows[i].src, rows[i].dst});
  }
  stream.num_nodes = max_node + 1;
  if (d_e > 0) {
    stream.edge_features = Matrix(rows.size(), static_cast<std::size_t>(d_e));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double* src_row = feats.data() + rows[i].order * d_e;
      std::copy(src_row, src_row + d_e, stream.edge_features.row(i));
    }
  }
  return stream;
}

void write_csv(const EventStream& stream, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << "src,dst,timestamp";
  for (std::int64_t f = 0; f < stream.d_e; ++f) out << ",f" << (f + 1);
  out << "\n";
  char buf[64];
  for (std::int64_t i = 0; i < stream.size(); ++i) {
    const TemporalEvent& e = stream.events[i];
    std::snprintf(buf, sizeof(buf), "%.17g", e.timestamp);
    out << e.src << ',' << e.dst << ',' << buf;
    if (stream.d_e > 0) {
      const double* row = stream.edge_features.row(e.edge_id);
      for (std::int64_t f = 0; f < stream.d_e; ++f) {
        std::snprintf(buf, sizeof(buf), "%.17g", row[f]);
        out << ',' << buf;
      }
    }
    out << "\n";
  }
}

std::tuple<EventStream, EventStream, EventStream> chronological_split(
    const EventStream& stream, double train_frac, double val_frac) {
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(train_frac + val_frac < 1.0)) {
    throw ValidationError("split fractions must satisfy 0 < train, 0 < val, train+val < 1");
  }
  const std::int64_t n = stream.size();
  const auto cut1 = static_cast<std::int64_t>(n * train_frac);
  const auto cut2 = static_cast<std::int64_t>(n * (train_frac + val_frac));

  auto slice = [&stream](std::int64_t lo, std::int64_t hi) {
    EventStream part;
    part.num_nodes = stream.num_nodes;
    part.d_e = stream.d_e;
    part.d_v = stream.d_v;
    part.events.assign(stream.events.begin() + lo, stream.events.begin() + hi);
    return part;
  };
  return {slice(0, cut1), slice(cut1, cut2), slice(cut2, n)};
}

}  // namespace tgf
