#pragma once

#include <cstdint>
#include <string>

namespace dskreg {

// Planted-relevance world for desk-scale experiments: users and items fall
// into taste clusters; "relevant" KG relations share tails only among
// same-cluster items, "noise" relations share tails among random items, and
// interactions stay mostly within the user's cluster. Selecting co-neighbors
// reached through relevant relations is therefore genuinely informative,
// which is what the sampling-strategy comparison needs to be able to detect.
struct SyntheticConfig {
    int32_t users = 240;
    int32_t items = 320;
    int32_t clusters = 4;
    int32_t relevant_relations = 4;
    int32_t noise_relations = 4;
    int32_t relevant_group = 6;          // items sharing one relevant tail
    int32_t noise_group = 6;             // items sharing one noise tail
    double noise_membership = 2.0;       // average noise groups per item per relation
    int32_t interactions_per_user = 8;
    double cross_cluster_prob = 0.1;     // chance an interaction leaves the cluster
    uint64_t seed = 7;
};

// Writes the KG triples and interactions as TSV at the given paths. Every
// item is guaranteed to appear in the interaction file.
void write_synthetic_dataset(const SyntheticConfig& cfg, const std::string& triples_path,
                             const std::string& interactions_path);

}  // namespace dskreg
