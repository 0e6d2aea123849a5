#include "dskreg/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <vector>

#include "dskreg/errors.hpp"
#include "dskreg/rng.hpp"

namespace dskreg {

namespace {

std::string item_name(int32_t i) { return "item_" + std::to_string(i); }
std::string user_name(int32_t u) { return "user_" + std::to_string(u); }

}  // namespace

void write_synthetic_dataset(const SyntheticConfig& cfg, const std::string& triples_path,
                             const std::string& interactions_path) {
    if (cfg.users < 1 || cfg.items < 1 || cfg.clusters < 1) {
        throw ConfigError("synthetic: users, items and clusters must be >= 1");
    }
    if (cfg.items < cfg.clusters) throw ConfigError("synthetic: need at least one item per cluster");
    if (cfg.relevant_group < 2 || cfg.noise_group < 2) {
        throw ConfigError("synthetic: group sizes must be >= 2");
    }

    std::mt19937_64 prng(rng::mix({cfg.seed, rng::kSynthSalt}));

    // cluster assignment: items and users round-robin
    auto cluster_of_item = [&](int32_t i) { return i % cfg.clusters; };
    auto cluster_of_user = [&](int32_t u) { return u % cfg.clusters; };
    std::vector<std::vector<int32_t>> cluster_items(static_cast<size_t>(cfg.clusters));
    for (int32_t i = 0; i < cfg.items; ++i) {
        cluster_items[static_cast<size_t>(cluster_of_item(i))].push_back(i);
    }

    std::ofstream kg(triples_path, std::ios::binary);
    if (!kg.is_open()) throw DataError("cannot write file: " + triples_path);

    // relevant relations: per (relation, cluster), partition the cluster's
    // items into groups that share one tail entity
    for (int32_t r = 0; r < cfg.relevant_relations; ++r) {
        const std::string rel = "rel_relevant_" + std::to_string(r);
        for (int32_t c = 0; c < cfg.clusters; ++c) {
            std::vector<int32_t> pool = cluster_items[static_cast<size_t>(c)];
            rng::shuffle(pool, prng);
            int32_t group_idx = 0;
            for (size_t start = 0; start < pool.size(); start += static_cast<size_t>(cfg.relevant_group)) {
                const size_t end = std::min(start + static_cast<size_t>(cfg.relevant_group), pool.size());
                if (end - start < 2) break;  // a singleton group creates no co-edges
                const std::string tail =
                    "t_" + rel + "_c" + std::to_string(c) + "_g" + std::to_string(group_idx++);
                for (size_t k = start; k < end; ++k) {
                    kg << item_name(pool[k]) << '\t' << rel << '\t' << tail << '\n';
                }
            }
        }
    }

    // noise relations: groups of random items regardless of cluster
    for (int32_t r = 0; r < cfg.noise_relations; ++r) {
        const std::string rel = "rel_noise_" + std::to_string(r);
        const int32_t n_groups = static_cast<int32_t>(
            (static_cast<double>(cfg.items) * cfg.noise_membership) / static_cast<double>(cfg.noise_group));
        for (int32_t g = 0; g < n_groups; ++g) {
            const std::string tail = "t_" + rel + "_g" + std::to_string(g);
            std::set<int32_t> members;
            while (members.size() < static_cast<size_t>(cfg.noise_group)) {
                members.insert(static_cast<int32_t>(rng::uniform_below(prng, static_cast<uint64_t>(cfg.items))));
            }
            for (int32_t i : members) {
                kg << item_name(i) << '\t' << rel << '\t' << tail << '\n';
            }
        }
    }
    if (!kg) throw DataError("failed writing file: " + triples_path);

    // interactions: first give every item one owner inside its cluster so the
    // catalog is fully covered, then fill user histories mostly in-cluster
    std::vector<std::set<int32_t>> history(static_cast<size_t>(cfg.users));
    for (int32_t i = 0; i < cfg.items; ++i) {
        const int32_t c = cluster_of_item(i);
        std::vector<int32_t> candidates;
        for (int32_t u = 0; u < cfg.users; ++u) {
            if (cluster_of_user(u) == c) candidates.push_back(u);
        }
        int32_t owner = candidates.empty()
                            ? static_cast<int32_t>(rng::uniform_below(prng, static_cast<uint64_t>(cfg.users)))
                            : candidates[rng::uniform_below(prng, candidates.size())];
        history[static_cast<size_t>(owner)].insert(i);
    }
    for (int32_t u = 0; u < cfg.users; ++u) {
        const int32_t c = cluster_of_user(u);
        const auto& own = cluster_items[static_cast<size_t>(c)];
        auto& hist = history[static_cast<size_t>(u)];
        size_t attempts = 0;
        const size_t max_attempts = static_cast<size_t>(cfg.interactions_per_user) * 50 + 100;
        while (hist.size() < static_cast<size_t>(cfg.interactions_per_user) && attempts < max_attempts) {
            ++attempts;
            int32_t pick;
            if (rng::uniform01(prng) < cfg.cross_cluster_prob || own.empty()) {
                pick = static_cast<int32_t>(rng::uniform_below(prng, static_cast<uint64_t>(cfg.items)));
            } else {
                pick = own[rng::uniform_below(prng, own.size())];
            }
            hist.insert(pick);
        }
    }

    std::ofstream inter(interactions_path, std::ios::binary);
    if (!inter.is_open()) throw DataError("cannot write file: " + interactions_path);
    for (int32_t u = 0; u < cfg.users; ++u) {
        for (int32_t i : history[static_cast<size_t>(u)]) {
            inter << user_name(u) << '\t' << item_name(i) << '\n';
        }
    }
    if (!inter) throw DataError("failed writing file: " + interactions_path);
}

}  // namespace dskreg
