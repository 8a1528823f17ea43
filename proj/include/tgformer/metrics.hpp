// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tgformer/training.hpp"

namespace tgf {

struct ScoredPairs {
  std::vector<double> scores;
  std::vector<int> labels;  // 0 or 1
};

// Probability that a random positive outscores a random negative, ties
// counted half.  Sort-and-rank, O(n log n).  Throws if either class is
// missing.
double roc_auc(const ScoredPairs& pairs);

// Scores every held-out event against one seeded uniform negative
// destination and returns the AUC.  The graph may contain all edges; the
// strict before-query-time sampling rule keeps later events invisible.
double evaluate(const ModelParams& params, const EventStream& split, const TCsr& graph,
                const TrainConfig& cfg, std::uint64_t seed);

}  // namespace tgf
