#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <tuple>

#include "dskreg/cograph.hpp"

using namespace dskreg;

namespace {

// Assembles a KG directly (no file) and an item universe of the first
// `num_items` entity names "i0..i{n-1}"; tails are "t0..".
struct TestWorld {
    KnowledgeGraph kg;
    std::vector<int32_t> entity_to_item;
    int32_t num_items = 0;

    TestWorld(int32_t items, const std::vector<std::tuple<int, int, int>>& triples_spec,
              int32_t relations) {
        num_items = items;
        for (int32_t i = 0; i < items; ++i) kg.entities.get_or_add("i" + std::to_string(i));
        for (int32_t r = 0; r < relations; ++r) kg.relations.get_or_add("r" + std::to_string(r));
        std::set<std::tuple<int, int, int>> seen;
        for (auto [h, r, t] : triples_spec) {
            if (!seen.insert({h, r, t}).second) continue;
            int32_t tail = kg.entities.get_or_add("t" + std::to_string(t));
            kg.triples.push_back({h, r, tail});
        }
        kg.is_item.assign(static_cast<size_t>(kg.num_entities()), 0);
        entity_to_item.assign(static_cast<size_t>(kg.num_entities()), -1);
        for (int32_t i = 0; i < items; ++i) {
            kg.is_item[static_cast<size_t>(i)] = 1;
            entity_to_item[static_cast<size_t>(i)] = i;
        }
    }
};

using EdgeSet = std::set<std::tuple<int32_t, int32_t, int32_t>>;  // (item, rel, item)

EdgeSet to_edge_set(const CoGraph& co) {
    auto edges = co.all_edges();
    return EdgeSet(edges.begin(), edges.end());
}

// Brute-force oracle: checks the defining condition directly for every
// (i1, r, i2) combination by scanning all tails.
EdgeSet brute_force_cograph(const TestWorld& w) {
    EdgeSet out;
    std::set<std::tuple<int32_t, int32_t, int32_t>> triple_set;
    for (const Triple& t : w.kg.triples) triple_set.insert({t.head, t.rel, t.tail});
    for (int32_t i1 = 0; i1 < w.num_items; ++i1) {
        for (int32_t i2 = 0; i2 < w.num_items; ++i2) {
            if (i1 == i2) continue;
            for (int32_t r = 0; r < w.kg.num_relations(); ++r) {
                bool connected = false;
                for (int32_t e = 0; e < w.kg.num_entities() && !connected; ++e) {
                    if (triple_set.count({i1, r, e}) && triple_set.count({i2, r, e})) connected = true;
                }
                if (connected) out.insert({i1, r, i2});
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("build_cograph: the defining case") {
    TestWorld w(2, {{0, 0, 0}, {1, 0, 0}}, 1);
    auto co = build_cograph(w.kg, w.entity_to_item, w.num_items);
    EdgeSet expected = {{0, 0, 1}, {1, 0, 0}};
    CHECK(to_edge_set(co) == expected);
}

TEST_CASE("build_cograph: a single triple produces no edges") {
    TestWorld w(2, {{0, 0, 0}}, 1);
    auto co = build_cograph(w.kg, w.entity_to_item, w.num_items);
    CHECK(co.num_directed_edges() == 0);
}

TEST_CASE("build_cograph: no self loops, shared tails collapse") {
    // item 0 and 1 share two tails under r0: still a single edge
    TestWorld w(2, {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, {1, 0, 1}}, 1);
    auto co = build_cograph(w.kg, w.entity_to_item, w.num_items);
    CHECK(to_edge_set(co).size() == 2);  // both directions of one edge
    CHECK(co.neighbors[0].size() == 1);
    CHECK(co.neighbors[0][0].count == 2);
}

TEST_CASE("build_cograph: random instances match the brute-force oracle and are symmetric") {
    std::mt19937_64 prng(2024);
    for (int rep = 0; rep < 30; ++rep) {
        int items = 5 + static_cast<int>(prng() % 16);
        int relations = 1 + static_cast<int>(prng() % 3);
        int tails = 3 + static_cast<int>(prng() % 13);
        int n_triples = static_cast<int>(prng() % 60);
        std::vector<std::tuple<int, int, int>> spec;
        for (int t = 0; t < n_triples; ++t) {
            spec.emplace_back(static_cast<int>(prng() % items), static_cast<int>(prng() % relations),
                              static_cast<int>(prng() % tails));
        }
        TestWorld w(items, spec, relations);
        auto co = build_cograph(w.kg, w.entity_to_item, w.num_items);
        auto got = to_edge_set(co);
        CHECK(got == brute_force_cograph(w));
        for (const auto& [i, r, j] : got) {
            CHECK(got.count({j, r, i}) == 1);
        }
    }
}

TEST_CASE("build_cograph: degree cap keeps the highest-count neighbors") {
    // item 0 shares 2 tails with item 1, 1 tail with items 2 and 3 (all r0)
    TestWorld w(4,
                {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, {1, 0, 1}, {0, 0, 2}, {2, 0, 2}, {0, 0, 3}, {3, 0, 3}},
                1);
    auto co = build_cograph(w.kg, w.entity_to_item, w.num_items, /*degree_cap=*/2);
    REQUIRE(co.neighbors[0].size() == 2);
    CHECK(co.neighbors[0][0].nbr == 1);  // count 2 wins, then tie broken by id
    CHECK(co.neighbors[0][1].nbr == 2);
}

TEST_CASE("build_cograph: neighbor lists are sorted by (relation, neighbor)") {
    TestWorld w(4, {{0, 1, 0}, {3, 1, 0}, {0, 0, 1}, {2, 0, 1}, {0, 1, 2}, {1, 1, 2}}, 2);
    auto co = build_cograph(w.kg, w.entity_to_item, w.num_items);
    const auto& lst = co.neighbors[0];
    REQUIRE(lst.size() == 3);
    CHECK(lst[0].rel == 0);
    CHECK(lst[0].nbr == 2);
    CHECK(lst[1].rel == 1);
    CHECK(lst[1].nbr == 1);
    CHECK(lst[2].rel == 1);
    CHECK(lst[2].nbr == 3);
}

namespace {

InteractionGraph make_train(int32_t n_users, int32_t n_items,
                            const std::vector<std::pair<int32_t, int32_t>>& edges) {
    InteractionGraph g;
    for (int32_t u = 0; u < n_users; ++u) g.users.get_or_add("u" + std::to_string(u));
    for (int32_t i = 0; i < n_items; ++i) g.items.get_or_add("i" + std::to_string(i));
    g.edges = edges;
    g.rebuild_adjacency();
    return g;
}

}  // namespace

TEST_CASE("unify: empty co-graph plus one edge") {
    TestWorld w(2, {}, 1);
    auto co = build_cograph(w.kg, w.entity_to_item, 2);
    auto train = make_train(1, 2, {{0, 0}});
    auto rg = unify(co, train);
    CHECK(rg.item_neighbors[0].empty());
    CHECK(rg.user_neighbors[0].size() == 1);
    CHECK(rg.user_neighbors[0][0].nbr == 0);
    CHECK(rg.user_neighbors[0][0].rel == rg.interact_relation);
    CHECK(rg.item_user_neighbors[0] == std::vector<int32_t>{0});
    CHECK(rg.item_user_neighbors[1].empty());
}

TEST_CASE("unify: transpose identity on random input") {
    std::mt19937_64 prng(7);
    std::set<std::pair<int32_t, int32_t>> edge_set;
    for (int e = 0; e < 120; ++e) {
        edge_set.emplace(static_cast<int32_t>(prng() % 20), static_cast<int32_t>(prng() % 30));
    }
    TestWorld w(30, {}, 1);
    auto co = build_cograph(w.kg, w.entity_to_item, 30);
    auto train = make_train(20, 30, {edge_set.begin(), edge_set.end()});
    auto rg = unify(co, train);
    for (int32_t u = 0; u < rg.num_users; ++u) {
        for (const auto& e : rg.user_neighbors[static_cast<size_t>(u)]) {
            const auto& users = rg.item_user_neighbors[static_cast<size_t>(e.nbr)];
            CHECK(std::count(users.begin(), users.end(), u) == 1);
        }
    }
    size_t total = 0;
    for (const auto& lst : rg.item_user_neighbors) total += lst.size();
    CHECK(total == edge_set.size());

    // lossless over train edges: reconstruct the interaction set
    std::set<std::pair<int32_t, int32_t>> rebuilt;
    for (int32_t u = 0; u < rg.num_users; ++u) {
        for (const auto& e : rg.user_neighbors[static_cast<size_t>(u)]) rebuilt.emplace(u, e.nbr);
    }
    CHECK(rebuilt == edge_set);
}

TEST_CASE("unify: item with co-edges but no interactions keeps them") {
    TestWorld w(3, {{1, 0, 0}, {2, 0, 0}}, 1);
    auto co = build_cograph(w.kg, w.entity_to_item, 3);
    auto train = make_train(1, 3, {{0, 0}});
    auto rg = unify(co, train);
    CHECK(rg.item_neighbors[1].size() == 1);
    CHECK(rg.item_user_neighbors[1].empty());
}

TEST_CASE("unify: rejects mismatched item spaces") {
    TestWorld w(2, {}, 1);
    auto co = build_cograph(w.kg, w.entity_to_item, 2);
    auto train = make_train(1, 5, {{0, 0}});
    CHECK_THROWS_AS(unify(co, train), DataError);
}

TEST_CASE("degree_stats: uniform two-neighbor graph and empty graph") {
    TestWorld w(3, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, 1);  // triangle: everyone has 2 neighbors
    auto co = build_cograph(w.kg, w.entity_to_item, 3);
    auto rg = unify(co, make_train(1, 3, {{0, 0}}));
    auto hist = degree_stats(rg);
    REQUIRE(hist.size() == 1);
    CHECK(hist[2] == 3);

    RelationalGraph empty;
    CHECK(degree_stats(empty).empty());
}

TEST_CASE("degree_stats: counts sum to the item count on random graphs") {
    std::mt19937_64 prng(31);
    std::vector<std::tuple<int, int, int>> spec;
    for (int t = 0; t < 80; ++t) {
        spec.emplace_back(static_cast<int>(prng() % 25), static_cast<int>(prng() % 3),
                          static_cast<int>(prng() % 10));
    }
    TestWorld w(25, spec, 3);
    auto co = build_cograph(w.kg, w.entity_to_item, 25);
    auto rg = unify(co, make_train(4, 25, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}));
    auto hist = degree_stats(rg);
    size_t total = 0;
    for (const auto& [len, count] : hist) {
        total += count;
        size_t recount = 0;
        for (const auto& lst : rg.item_neighbors) {
            if (lst.size() == len) ++recount;
        }
        CHECK(recount == count);
    }
    CHECK(total == 25);
}
