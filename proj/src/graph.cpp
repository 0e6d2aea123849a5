#include "dskreg/graph.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include "dskreg/rng.hpp"

namespace dskreg {
namespace {

// Splits a line on tabs. Fields may contain spaces; only '\t' delimits.
std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    for (;;) {
        size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw DataError("cannot open file: " + path);
    return in;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

struct TripleKey {
    uint64_t hr;
    uint64_t t;
    friend bool operator==(const TripleKey&, const TripleKey&) = default;
};

struct TripleKeyHash {
    size_t operator()(const TripleKey& k) const {
        return rng::splitmix64(k.hr ^ rng::splitmix64(k.t));
    }
};

}  // namespace

void KnowledgeGraph::mark_items(const std::unordered_set<std::string>& raw_item_ids) {
    is_item.assign(static_cast<size_t>(num_entities()), 0);
    for (int32_t e = 0; e < num_entities(); ++e) {
        if (raw_item_ids.count(entities.name(e))) is_item[static_cast<size_t>(e)] = 1;
    }
}

size_t KnowledgeGraph::num_item_entities() const {
    return static_cast<size_t>(std::count(is_item.begin(), is_item.end(), char(1)));
}

KnowledgeGraph load_triples(const std::string& path, const std::unordered_set<std::string>* item_raw_ids) {
    auto in = open_or_throw(path);
    KnowledgeGraph kg;
    std::unordered_set<TripleKey, TripleKeyHash> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 3) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
        }
        Triple t;
        t.head = kg.entities.get_or_add(fields[0]);
        t.rel = kg.relations.get_or_add(fields[1]);
        t.tail = kg.entities.get_or_add(fields[2]);
        TripleKey key{(static_cast<uint64_t>(static_cast<uint32_t>(t.head)) << 32) |
                          static_cast<uint32_t>(t.rel),
                      static_cast<uint64_t>(static_cast<uint32_t>(t.tail))};
        if (seen.insert(key).second) kg.triples.push_back(t);
    }
    kg.is_item.assign(static_cast<size_t>(kg.num_entities()), 0);
    if (item_raw_ids != nullptr) kg.mark_items(*item_raw_ids);
    return kg;
}

bool InteractionGraph::has_edge(int32_t user, int32_t item) const {
    const auto& adj = user_adj[static_cast<size_t>(user)];
    return std::binary_search(adj.begin(), adj.end(), item);
}

void InteractionGraph::rebuild_adjacency() {
    user_adj.assign(static_cast<size_t>(num_users()), {});
    item_adj.assign(static_cast<size_t>(num_items()), {});
    for (const auto& [u, i] : edges) {
        user_adj[static_cast<size_t>(u)].push_back(i);
        item_adj[static_cast<size_t>(i)].push_back(u);
    }
    for (auto& adj : user_adj) std::sort(adj.begin(), adj.end());
    for (auto& adj : item_adj) std::sort(adj.begin(), adj.end());
}

InteractionGraph load_interactions(const std::string& path) {
    auto in = open_or_throw(path);
    InteractionGraph g;
    std::unordered_set<uint64_t> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 2 tab-separated fields, got " +
                            std::to_string(fields.size()));
        }
        int32_t u = g.users.get_or_add(fields[0]);
        int32_t i = g.items.get_or_add(fields[1]);
        uint64_t key = (static_cast<uint64_t>(static_cast<uint32_t>(u)) << 32) | static_cast<uint32_t>(i);
        if (seen.insert(key).second) g.edges.emplace_back(u, i);
    }
    g.rebuild_adjacency();
    return g;
}

DatasetSplit split_interactions(const InteractionGraph& g, double test_fraction, uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must lie in (0, 1)");
    }
    if (g.num_edges() == 0) throw DataError("cannot split an empty interaction graph");

    DatasetSplit out;
    out.seed = seed;
    out.train.users = g.users;
    out.train.items = g.items;
    out.test.users = g.users;
    out.test.items = g.items;

    std::vector<std::pair<int32_t, int32_t>> train_edges;
    std::vector<std::pair<int32_t, int32_t>> test_edges;
    for (int32_t u = 0; u < g.num_users(); ++u) {
        std::vector<int32_t> items = g.user_adj[static_cast<size_t>(u)];  // sorted copy
        std::mt19937_64 prng(rng::mix({seed, rng::kSplitSalt, static_cast<uint64_t>(u)}));
        rng::shuffle(items, prng);
        size_t n_test = static_cast<size_t>(test_fraction * static_cast<double>(items.size()));
        for (size_t k = 0; k < items.size(); ++k) {
            auto& dst = (k < n_test) ? test_edges : train_edges;
            dst.emplace_back(u, items[k]);
        }
    }
    std::sort(train_edges.begin(), train_edges.end());
    std::sort(test_edges.begin(), test_edges.end());
    out.train.edges = std::move(train_edges);
    out.test.edges = std::move(test_edges);
    out.train.rebuild_adjacency();
    out.test.rebuild_adjacency();
    return out;
}

void write_id_map(const IdMap& map, const std::string& path) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf.is_open()) throw DataError("cannot write file: " + path);
    for (int32_t id = 0; id < map.size(); ++id) {
        outf << map.name(id) << '\t' << id << '\n';
    }
}

void write_triples_tsv(const KnowledgeGraph& kg, const std::string& path) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf.is_open()) throw DataError("cannot write file: " + path);
    for (const Triple& t : kg.triples) {
        outf << kg.entities.name(t.head) << '\t' << kg.relations.name(t.rel) << '\t'
             << kg.entities.name(t.tail) << '\n';
    }
}

void write_interactions_tsv(const InteractionGraph& g, const std::string& path) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf.is_open()) throw DataError("cannot write file: " + path);
    for (const auto& [u, i] : g.edges) {
        outf << g.users.name(u) << '\t' << g.items.name(i) << '\n';
    }
}

}  // namespace dskreg
