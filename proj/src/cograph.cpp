#include "dskreg/cograph.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

namespace dskreg {

size_t CoGraph::num_directed_edges() const {
    size_t n = 0;
    for (const auto& lst : neighbors) n += lst.size();
    return n;
}

std::vector<std::tuple<int32_t, int32_t, int32_t>> CoGraph::all_edges() const {
    std::vector<std::tuple<int32_t, int32_t, int32_t>> out;
    out.reserve(num_directed_edges());
    for (int32_t i = 0; i < num_items; ++i) {
        for (const CoEdge& e : neighbors[static_cast<size_t>(i)]) {
            out.emplace_back(i, e.rel, e.nbr);
        }
    }
    return out;
}

std::vector<int32_t> map_entities_to_items(const KnowledgeGraph& kg, const InteractionGraph& inter) {
    std::vector<int32_t> entity_to_item(static_cast<size_t>(kg.num_entities()), -1);
    for (int32_t e = 0; e < kg.num_entities(); ++e) {
        if (auto item = inter.items.find(kg.entities.name(e))) {
            entity_to_item[static_cast<size_t>(e)] = *item;
        }
    }
    return entity_to_item;
}

CoGraph build_cograph(const KnowledgeGraph& kg, const std::vector<int32_t>& entity_to_item,
                      int32_t num_items, int32_t degree_cap) {
    CoGraph co;
    co.num_items = num_items;
    co.num_co_relations = kg.num_relations();
    co.co_relation_names.reserve(static_cast<size_t>(kg.num_relations()));
    for (int32_t r = 0; r < kg.num_relations(); ++r) {
        co.co_relation_names.push_back("co-" + kg.relations.name(r));
    }
    co.neighbors.assign(static_cast<size_t>(num_items), {});

    // Group item heads by (relation, tail).
    std::unordered_map<uint64_t, std::vector<int32_t>> groups;
    for (const Triple& t : kg.triples) {
        if (t.head < 0 || static_cast<size_t>(t.head) >= entity_to_item.size()) continue;
        int32_t item = entity_to_item[static_cast<size_t>(t.head)];
        if (item < 0) continue;
        uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(t.rel)) << 32) |
                       static_cast<uint32_t>(t.tail);
        groups[key].push_back(item);
    }

    // Distinct item pairs sharing (relation, tail) collapse to one edge per
    // relation; the count tracks how many tails produced the pair.
    std::unordered_map<int32_t, std::unordered_map<uint64_t, int32_t>> pair_counts;  // rel -> (i,j) -> count
    for (auto& [key, items] : groups) {
        if (items.size() < 2) continue;
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        int32_t rel = static_cast<int32_t>(key >> 32);
        auto& counts = pair_counts[rel];
        for (size_t a = 0; a < items.size(); ++a) {
            for (size_t b = a + 1; b < items.size(); ++b) {
                uint64_t pair_key = (static_cast<uint64_t>(static_cast<uint32_t>(items[a])) << 32) |
                                    static_cast<uint32_t>(items[b]);
                counts[pair_key]++;
            }
        }
    }

    for (const auto& [rel, pairs] : pair_counts) {
        for (const auto& [pair_key, count] : pairs) {
            int32_t i = static_cast<int32_t>(pair_key >> 32);
            int32_t j = static_cast<int32_t>(pair_key & 0xFFFFFFFFull);
            co.neighbors[static_cast<size_t>(i)].push_back({rel, j, count});
            co.neighbors[static_cast<size_t>(j)].push_back({rel, i, count});
        }
    }

    auto by_rel_then_nbr = [](const CoEdge& a, const CoEdge& b) {
        return std::tie(a.rel, a.nbr) < std::tie(b.rel, b.nbr);
    };
    for (auto& lst : co.neighbors) std::sort(lst.begin(), lst.end(), by_rel_then_nbr);

    // Per-item, per-relation truncation to the highest-count neighbors.
    if (degree_cap > 0) {
        for (auto& lst : co.neighbors) {
            std::vector<CoEdge> kept;
            kept.reserve(lst.size());
            size_t start = 0;
            while (start < lst.size()) {
                size_t end = start;
                while (end < lst.size() && lst[end].rel == lst[start].rel) ++end;
                std::vector<CoEdge> block(lst.begin() + static_cast<long>(start),
                                          lst.begin() + static_cast<long>(end));
                if (block.size() > static_cast<size_t>(degree_cap)) {
                    std::sort(block.begin(), block.end(), [](const CoEdge& a, const CoEdge& b) {
                        if (a.count != b.count) return a.count > b.count;
                        return a.nbr < b.nbr;
                    });
                    block.resize(static_cast<size_t>(degree_cap));
                    std::sort(block.begin(), block.end(),
                              [](const CoEdge& a, const CoEdge& b) { return a.nbr < b.nbr; });
                }
                kept.insert(kept.end(), block.begin(), block.end());
                start = end;
            }
            lst = std::move(kept);
        }
    }
    return co;
}

RelationalGraph unify(const CoGraph& co, const InteractionGraph& train) {
    if (co.num_items != train.num_items()) {
        throw DataError("unify: item ID space mismatch (co-graph has " + std::to_string(co.num_items) +
                        " items, interactions have " + std::to_string(train.num_items()) + ")");
    }
    RelationalGraph rg;
    rg.num_users = train.num_users();
    rg.num_items = train.num_items();
    rg.num_co_relations = co.num_co_relations;
    rg.interact_relation = co.num_co_relations;

    rg.item_neighbors.assign(static_cast<size_t>(rg.num_items), {});
    for (int32_t i = 0; i < rg.num_items; ++i) {
        const auto& src = co.neighbors[static_cast<size_t>(i)];
        auto& dst = rg.item_neighbors[static_cast<size_t>(i)];
        dst.reserve(src.size());
        for (const CoEdge& e : src) dst.push_back({e.nbr, e.rel});
    }

    rg.user_neighbors.assign(static_cast<size_t>(rg.num_users), {});
    for (int32_t u = 0; u < rg.num_users; ++u) {
        const auto& items = train.user_adj[static_cast<size_t>(u)];
        auto& dst = rg.user_neighbors[static_cast<size_t>(u)];
        dst.reserve(items.size());
        for (int32_t i : items) dst.push_back({i, rg.interact_relation});
    }

    rg.item_user_neighbors.assign(static_cast<size_t>(rg.num_items), {});
    for (int32_t i = 0; i < rg.num_items; ++i) {
        rg.item_user_neighbors[static_cast<size_t>(i)] = train.item_adj[static_cast<size_t>(i)];
    }
    return rg;
}

std::map<size_t, size_t> degree_stats(const RelationalGraph& rg) {
    std::map<size_t, size_t> hist;
    for (const auto& lst : rg.item_neighbors) hist[lst.size()]++;
    return hist;
}

void write_cograph_tsv(const CoGraph& co, const IdMap& item_ids, const std::string& path) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf.is_open()) throw DataError("cannot write file: " + path);
    for (int32_t i = 0; i < co.num_items; ++i) {
        for (const CoEdge& e : co.neighbors[static_cast<size_t>(i)]) {
            outf << item_ids.name(i) << '\t' << co.co_relation_names[static_cast<size_t>(e.rel)] << '\t'
                 << item_ids.name(e.nbr) << '\n';
        }
    }
}

void write_co_relations_map(const CoGraph& co, const std::string& path) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf.is_open()) throw DataError("cannot write file: " + path);
    for (size_t r = 0; r < co.co_relation_names.size(); ++r) {
        outf << co.co_relation_names[r] << '\t' << r << '\n';
    }
}

}  // namespace dskreg
