#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dskreg/graph.hpp"
#include "dskreg/model.hpp"

namespace dskreg {

// Full-catalog ranking for one user: every item except the user's training
// items, scores non-increasing, ties broken by item id ascending.
struct RankedList {
    int32_t user = -1;
    std::vector<int32_t> items;
    std::vector<double> scores;
};

RankedList rank_items(int32_t user, const RelationalGraph& rg, const ParamStore& params,
                      const TrainConfig& cfg, const InteractionGraph& train);

// |top-N intersect relevant| / |relevant|
double recall_at(const RankedList& rl, const std::set<int32_t>& relevant, int32_t n);
// |top-N intersect relevant| / N (the denominator stays N even when fewer
// candidates exist)
double precision_at(const RankedList& rl, const std::set<int32_t>& relevant, int32_t n);
// Binary gains: DCG = sum over relevant ranks k<=N of 1/log2(k+1), IDCG over
// the first min(N, |relevant|) ranks.
double ndcg_at(const RankedList& rl, const std::set<int32_t>& relevant, int32_t n);

struct MetricTable {
    std::vector<int32_t> ns;
    std::vector<double> recall;
    std::vector<double> precision;
    std::vector<double> ndcg;
    size_t users_evaluated = 0;

    double recall_at_n(int32_t n) const;
    std::string to_tsv() const;
    std::string to_text() const;  // aligned R@/P@/N@ row
};

// Macro-averaged metrics over test users with a non-empty test set. When
// 0 < user_sample < eligible users, a seeded subsample is evaluated instead.
MetricTable evaluate(const DatasetSplit& split, const RelationalGraph& rg, const ParamStore& params,
                     const TrainConfig& cfg, const std::vector<int32_t>& ns, int32_t user_sample = 0,
                     uint64_t sample_seed = 0);

}  // namespace dskreg
