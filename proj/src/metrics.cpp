// SPDX-License-Identifier: Apache-2.0
#include "tgformer/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "tgformer/rng.hpp"

namespace tgf {

double roc_auc(const ScoredPairs& pairs) {
  const std::size_t n = pairs.scores.size();
  if (pairs.labels.size() != n) throw ValidationError("scores and labels differ in length");
  std::size_t positives = 0;
  for (int label : pairs.labels) {
    if (label != 0 && label != 1) throw ValidationError("labels must be 0 or 1");
    positives += label;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw ValidationError("AUC undefined without both classes");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&pairs](std::size_t a, std::size_t b) {
    return pairs.scores[a] < pairs.scores[b];
  });

  // Average ranks across runs of tied scores, then sum positive ranks.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && pairs.scores[order[j]] == pairs.scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (pairs.labels[order[t]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  return (rank_sum_pos - p * (p + 1.0) * 0.5) / (p * static_cast<double>(negatives));
}

double evaluate(const ModelParams& params, const EventStream& split, const TCsr& graph,
                const TrainConfig& cfg, std::uint64_t seed) {
  if (split.size() == 0) throw ValidationError("empty evaluation split");

  TrainConfig ecfg = cfg;
  ecfg.negatives = 1;

  ScoredPairs pairs;
  pairs.scores.reserve(2 * split.size());
  pairs.labels.reserve(2 * split.size());

  const std::int64_t n = split.size();
  for (std::int64_t start = 0, chunk = 0; start < n; start += ecfg.batch_size, ++chunk) {
    const std::int64_t stop = std::min(start + ecfg.batch_size, n);
    LinkBatch batch;
    for (std::int64_t i = start; i < stop; ++i) {
      const TemporalEvent& e = split.events[i];
      batch.src.push_back(e.src);
      batch.dst.push_back(e.dst);
      batch.times.push_back(e.timestamp);
      // One negative per positive, keyed by the event's split index so the
      // draw does not depend on the chunking.
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      batch.neg.push_back(static_cast<NodeId>(rng.next_below(graph.num_nodes)));
    }
    const ConcatForward fwd =
        forward_concat(params, batch, graph, ecfg, false,
                       mix64(seed ^ 0xe7a1) + static_cast<std::uint64_t>(chunk), 0);
    const Matrix pos_scores = decode_pairs(params, fwd.src_emb, fwd.dst_emb);
    const Matrix neg_scores = decode_pairs(params, fwd.src_emb, fwd.neg_emb);
    for (std::size_t i = 0; i < pos_scores.rows(); ++i) {
      pairs.scores.push_back(pos_scores.at(i, 0));
      pairs.labels.push_back(1);
      pairs.scores.push_back(neg_scores.at(i, 0));
      pairs.labels.push_back(0);
    }
  }
  return roc_auc(pairs);
}

}  // namespace tgf
