#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "dskreg/cograph.hpp"
#include "dskreg/params.hpp"
#include "dskreg/sampler.hpp"

namespace dskreg {

// Preference-aware attention over a node's full neighbor list:
//   phi_j = a_j * exp(<e_q, key_j>) / sum_m exp(<e_q, key_m>)
// with the denominator ranging over all neighbors (only the numerator is
// gated by the K-hot value a_j). Keys are relation embeddings on the item
// side and item embeddings on the user side.
struct AttentionWeights {
    int32_t node = -1;
    std::vector<double> phi;
};

AttentionWeights attention_weights(int32_t node, bool node_is_user, int32_t query_user,
                                   std::span<const NeighborEdge> neighbors, std::span<const double> a,
                                   const ParamStore& params, bool renorm = false);

// Record of one aggregation forward pass, kept for the hand-written backward
// sweep. Children are present for depth >= 2; at depth 1 the neighbor inputs
// are raw item embedding rows.
struct AggTape {
    int32_t node = -1;
    bool is_user = false;
    int32_t layer = 1;
    std::span<const NeighborEdge> nbrs;
    RelevanceDistribution dist;
    KHotSelection sel;
    std::vector<double> a;  // gate used in the forward pass (soft or hard)
    bool straight_through = false;
    std::vector<double> att_s;    // softmax(att logits), or exp(l - max) in renorm mode
    double att_denom = 0.0;       // renorm mode: sum of a * exp(l - max)
    std::vector<double> phi;
    std::vector<double> self_in;
    std::vector<double> h;
    std::vector<double> out;
    std::unique_ptr<AggTape> self_child;
    std::vector<std::unique_ptr<AggTape>> children;
};

struct FwdCtx {
    const RelationalGraph& rg;
    const ParamStore& params;
    ParamStore* mut = nullptr;  // non-null in training: marks touched rows, keeps children for backward
    const TrainConfig& cfg;
    double tau = 1.0;
    bool stochastic = false;  // Gumbel draws when true, deterministic top-K otherwise
    uint64_t noise_key = 0;
    std::unordered_map<uint64_t, uint32_t>* draw_counters = nullptr;
    int32_t user_context = -1;  // attention query for item-side aggregation
};

std::unique_ptr<AggTape> forward_node(FwdCtx& ctx, int32_t node, bool is_user, int32_t layer);
void backward_node(FwdCtx& ctx, const AggTape& tape, std::span<const double> d_out);

// Single-node Eq.-5 aggregation with a caller-supplied selection; sel.soft is
// the gate (exact 0/1 for deterministic selections). Isolated nodes use
// sigma(W e + b).
std::vector<double> aggregate_item(int32_t item, int32_t user_context, const RelationalGraph& rg,
                                   const KHotSelection& sel, const ParamStore& params,
                                   bool renorm = false);
std::vector<double> aggregate_user(int32_t user, const RelationalGraph& rg, const KHotSelection& sel,
                                   const ParamStore& params, bool renorm = false);

// Deterministic inference embedding (eval mode) for ranking and tests.
std::vector<double> infer_embedding(const RelationalGraph& rg, const ParamStore& params,
                                    const TrainConfig& cfg, int32_t node, bool is_user,
                                    int32_t user_context);

// Serving-time preference score, sigmoid(e_u . e_i).
double predict(std::span<const double> user_out, std::span<const double> item_out);

struct BprTriplet {
    int32_t user = 0;
    int32_t pos_item = 0;
    int32_t neg_item = 0;
};

// Uniform draw over the items the user never interacted with (rejection
// sampling). Throws DataError when no negative exists.
int32_t sample_negative(const InteractionGraph& train, int32_t user, std::mt19937_64& prng);
std::vector<BprTriplet> sample_negatives(const InteractionGraph& train,
                                         std::span<const std::pair<int32_t, int32_t>> batch,
                                         std::mt19937_64& prng);

// Pairwise BPR over pre-activation scores plus the batch L2 term:
//   sum -log sigmoid(pos - neg) + lambda * ||Theta_batch||^2
double bpr_loss(std::span<const double> scores_pos, std::span<const double> scores_neg,
                const ParamStore& params, double lambda);

// Full forward (and optionally backward) pass over one batch of triplets.
// Always zeroes gradients on entry and marks touched parameters; the
// returned loss includes the lambda term over the touched set. Deterministic
// given (params, noise_key), which makes it directly usable as a gradient-
// check closure with frozen Gumbel noise.
double batch_objective(const RelationalGraph& rg, ParamStore& params, const TrainConfig& cfg,
                       double tau, std::span<const BprTriplet> triplets, uint64_t noise_key,
                       bool accumulate);

// One pass over all training edges in seeded shuffled order, one negative per
// positive, optimizer step per batch. Returns the mean per-triplet loss.
double train_epoch(const RelationalGraph& rg, const InteractionGraph& train, ParamStore& params,
                   const TrainConfig& cfg, int32_t epoch, AdamState* adam = nullptr);

}  // namespace dskreg
