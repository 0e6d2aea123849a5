#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dskreg/cograph.hpp"
#include "dskreg/params.hpp"

namespace dskreg {

// Relation-aware relevance distribution of a node over its neighbor list.
// Logits under the gs strategy are w.[r || e_j] + b; ablation strategies
// replace the logit rule and keep everything downstream identical.
struct RelevanceDistribution {
    int32_t node = -1;
    bool node_is_user = false;
    std::vector<NeighborEdge> neighbors;  // canonical relational-graph order
    std::vector<double> logits;
    std::vector<double> probs;  // softmax(logits)
    std::vector<double> logp;   // logits - logsumexp(logits)

    size_t size() const { return neighbors.size(); }
};

RelevanceDistribution score_neighbors(int32_t node, bool node_is_user,
                                      std::span<const NeighborEdge> neighbors,
                                      const ParamStore& params, Strategy strategy);

// Eq.-3 scoring (the gs strategy).
RelevanceDistribution relevance_scores(int32_t node, bool node_is_user,
                                       std::span<const NeighborEdge> neighbors,
                                       const ParamStore& params);

// Ablation scoring; strategy must be uniform, l2 or inner.
RelevanceDistribution ablation_scores(int32_t node, bool node_is_user,
                                      std::span<const NeighborEdge> neighbors,
                                      const ParamStore& params, Strategy strategy);

// K soft one-hot draws summed into a K-hot vector. `draws[t]` holds the t-th
// soft sample (zero at positions already selected), `hard` the argmax
// positions in draw order, `noise` the Gumbel matrix used so a draw can be
// replayed bit-exactly.
//
// When the neighbor list has at most K entries, selection is vacuous: the
// result is the exact all-ones vector with no noise consumed, identically
// across strategies.
struct KHotSelection {
    std::vector<double> soft;
    std::vector<int32_t> hard;                // selected positions, draw order
    std::vector<std::vector<double>> draws;   // per draw, dense length n
    std::vector<std::vector<double>> noise;   // per draw, dense length n
    double tau = 1.0;
    bool stochastic = false;  // false for deterministic_topk and the all-selected case

    std::vector<double> hard01() const;
    size_t size() const { return soft.size(); }
};

KHotSelection gumbel_topk(const RelevanceDistribution& dist, int32_t k, double tau, uint64_t seed);

// Same procedure with caller-provided noise (one row per draw); used for
// replay and gradient checking.
KHotSelection gumbel_topk_with_noise(const RelevanceDistribution& dist, int32_t k, double tau,
                                     const std::vector<std::vector<double>>& noise);

// Inference-time selection: the K largest probabilities, ties broken by
// neighbor id ascending. soft is the exact 0/1 indicator.
KHotSelection deterministic_topk(const RelevanceDistribution& dist, int32_t k);

// d loss / d logits given d loss / d soft, replaying the stored draws.
// Returns zeros for non-stochastic selections (constant K-hot).
std::vector<double> khot_backward_logits(const RelevanceDistribution& dist, const KHotSelection& sel,
                                         std::span<const double> d_soft);

// Routes d loss / d logits into the parameter gradients of the strategy's
// score rule (w, b and embedding rows for gs; embedding rows for l2/inner).
void accumulate_score_grads(const RelevanceDistribution& dist, Strategy strategy,
                            std::span<const double> d_logits, ParamStore& params);

}  // namespace dskreg
