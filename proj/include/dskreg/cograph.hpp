#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "dskreg/graph.hpp"

namespace dskreg {

// One adjacency entry of the relational graph: neighbor item plus the
// relation id carried by the edge.
struct NeighborEdge {
    int32_t nbr = 0;
    int32_t rel = 0;
    friend bool operator==(const NeighborEdge&, const NeighborEdge&) = default;
};

// Item-item co-interact graph: items i1, i2 are connected under co-relation
// r' exactly when some tail t has both (i1, r, t) and (i2, r, t) in the KG.
// One derived co-relation per source KG relation, so co-relation ids equal
// source relation ids. Multiple shared tails collapse into one edge; the
// shared-tail count is kept only for degree-cap tie-breaking.
struct CoEdge {
    int32_t rel = 0;
    int32_t nbr = 0;
    int32_t count = 0;  // number of distinct shared tails
    friend bool operator==(const CoEdge&, const CoEdge&) = default;
};

struct CoGraph {
    int32_t num_items = 0;
    int32_t num_co_relations = 0;
    std::vector<std::string> co_relation_names;      // "co-" + source relation raw name
    std::vector<std::vector<CoEdge>> neighbors;      // per item, sorted by (rel, nbr)

    size_t num_directed_edges() const;
    // Flattened (item, co-relation, neighbor) view, mainly for tests/export.
    std::vector<std::tuple<int32_t, int32_t, int32_t>> all_edges() const;
};

// entity_to_item maps KG entity id -> item id, or -1 for non-item entities.
// degree_cap > 0 truncates each item's per-relation list to the cap
// highest-count neighbors (ties by neighbor id ascending); 0 means unlimited.
CoGraph build_cograph(const KnowledgeGraph& kg, const std::vector<int32_t>& entity_to_item,
                      int32_t num_items, int32_t degree_cap = 0);

// entity id -> item id (or -1), bridging on raw string ids.
std::vector<int32_t> map_entities_to_items(const KnowledgeGraph& kg, const InteractionGraph& inter);

// The unified graph the model runs on: item-item co-relation edges plus
// user-item edges under one distinguished interact relation.
struct RelationalGraph {
    int32_t num_users = 0;
    int32_t num_items = 0;
    int32_t num_co_relations = 0;
    int32_t interact_relation = 0;  // == num_co_relations

    std::vector<std::vector<NeighborEdge>> item_neighbors;   // sorted by (rel, nbr)
    std::vector<std::vector<NeighborEdge>> user_neighbors;   // train items, sorted by item id
    std::vector<std::vector<int32_t>> item_user_neighbors;   // transpose of user_neighbors

    int32_t num_relation_rows() const { return num_co_relations + 1; }
};

RelationalGraph unify(const CoGraph& co, const InteractionGraph& train);

// Histogram of item neighbor-list lengths; counts sum to the item count.
std::map<size_t, size_t> degree_stats(const RelationalGraph& rg);

void write_cograph_tsv(const CoGraph& co, const IdMap& item_ids, const std::string& path);
void write_co_relations_map(const CoGraph& co, const std::string& path);

}  // namespace dskreg
