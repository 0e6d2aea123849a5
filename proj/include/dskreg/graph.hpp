#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dskreg/errors.hpp"

namespace dskreg {

// Raw string id <-> dense integer id, first-seen order.
class IdMap {
public:
    int32_t get_or_add(const std::string& raw) {
        auto it = to_id_.find(raw);
        if (it != to_id_.end()) return it->second;
        int32_t id = static_cast<int32_t>(names_.size());
        names_.push_back(raw);
        to_id_.emplace(raw, id);
        return id;
    }

    std::optional<int32_t> find(const std::string& raw) const {
        auto it = to_id_.find(raw);
        if (it == to_id_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(int32_t id) const { return names_[static_cast<size_t>(id)]; }
    int32_t size() const { return static_cast<int32_t>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::unordered_map<std::string, int32_t> to_id_;
    std::vector<std::string> names_;
};

struct Triple {
    int32_t head = 0;
    int32_t rel = 0;
    int32_t tail = 0;
    friend bool operator==(const Triple&, const Triple&) = default;
};

// Directed heterogeneous triple store. Immutable once loaded.
struct KnowledgeGraph {
    IdMap entities;
    IdMap relations;
    std::vector<Triple> triples;  // deduplicated, file order
    std::vector<char> is_item;    // per entity id; 1 when the entity is an item

    int32_t num_entities() const { return entities.size(); }
    int32_t num_relations() const { return relations.size(); }
    size_t num_triples() const { return triples.size(); }

    // Flags as items the entities whose raw id appears in the given set.
    void mark_items(const std::unordered_set<std::string>& raw_item_ids);
    size_t num_item_entities() const;
};

// Parses `head<TAB>relation<TAB>tail` lines. Malformed lines raise DataError
// with the 1-based line number; an empty file yields an empty graph.
KnowledgeGraph load_triples(const std::string& path,
                            const std::unordered_set<std::string>* item_raw_ids = nullptr);

// User-item implicit-feedback bipartite graph.
struct InteractionGraph {
    IdMap users;
    IdMap items;
    std::vector<std::pair<int32_t, int32_t>> edges;  // deduplicated
    std::vector<std::vector<int32_t>> user_adj;      // sorted item ids per user
    std::vector<std::vector<int32_t>> item_adj;      // sorted user ids per item

    int32_t num_users() const { return users.size(); }
    int32_t num_items() const { return items.size(); }
    size_t num_edges() const { return edges.size(); }
    int32_t degree(int32_t user) const { return static_cast<int32_t>(user_adj[static_cast<size_t>(user)].size()); }
    bool has_edge(int32_t user, int32_t item) const;
    void rebuild_adjacency();
};

// Parses `user<TAB>item` lines; duplicates collapse to one edge.
InteractionGraph load_interactions(const std::string& path);

struct DatasetSplit {
    InteractionGraph train;
    InteractionGraph test;
    uint64_t seed = 0;
};

// Per-user random holdout: floor(test_fraction * degree) edges go to test,
// so degree-1 users stay entirely in train. Deterministic per seed and
// independent of user processing order.
DatasetSplit split_interactions(const InteractionGraph& g, double test_fraction, uint64_t seed);

// TSV exports (raw ids), one artifact per call.
void write_id_map(const IdMap& map, const std::string& path);
void write_triples_tsv(const KnowledgeGraph& kg, const std::string& path);
void write_interactions_tsv(const InteractionGraph& g, const std::string& path);

}  // namespace dskreg
