#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <unordered_set>

#include "dskreg/experiment.hpp"
#include "dskreg/gradcheck.hpp"
#include "dskreg/metrics.hpp"
#include "dskreg/model.hpp"
#include "dskreg/synthetic.hpp"

namespace py = pybind11;
using namespace dskreg;

namespace {

// pybind11 copies std::span poorly; small adapters keep the bound API plain.
std::vector<NeighborEdge> to_edges(const std::vector<std::pair<int32_t, int32_t>>& pairs) {
    std::vector<NeighborEdge> out;
    out.reserve(pairs.size());
    for (const auto& [nbr, rel] : pairs) out.push_back({nbr, rel});
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core: relational graph construction, differentiable top-K sampling, "
              "preference-aware aggregation, BPR training and top-N metrics";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
        .def_property_readonly("num_entities", &KnowledgeGraph::num_entities)
        .def_property_readonly("num_relations", &KnowledgeGraph::num_relations)
        .def_property_readonly("num_triples", &KnowledgeGraph::num_triples)
        .def_property_readonly("num_item_entities", &KnowledgeGraph::num_item_entities)
        .def("triples",
             [](const KnowledgeGraph& kg) {
                 std::vector<std::tuple<int32_t, int32_t, int32_t>> out;
                 out.reserve(kg.triples.size());
                 for (const Triple& t : kg.triples) out.emplace_back(t.head, t.rel, t.tail);
                 return out;
             })
        .def("entity_name", [](const KnowledgeGraph& kg, int32_t id) { return kg.entities.name(id); })
        .def("relation_name", [](const KnowledgeGraph& kg, int32_t id) { return kg.relations.name(id); });

    py::class_<InteractionGraph>(m, "InteractionGraph")
        .def_property_readonly("num_users", &InteractionGraph::num_users)
        .def_property_readonly("num_items", &InteractionGraph::num_items)
        .def_property_readonly("num_edges", &InteractionGraph::num_edges)
        .def("edges", [](const InteractionGraph& g) { return g.edges; })
        .def("items_of_user",
             [](const InteractionGraph& g, int32_t u) { return g.user_adj[static_cast<size_t>(u)]; })
        .def("user_name", [](const InteractionGraph& g, int32_t id) { return g.users.name(id); })
        .def("item_name", [](const InteractionGraph& g, int32_t id) { return g.items.name(id); });

    py::class_<DatasetSplit>(m, "DatasetSplit")
        .def_readonly("train", &DatasetSplit::train)
        .def_readonly("test", &DatasetSplit::test)
        .def_readonly("seed", &DatasetSplit::seed);

    py::class_<CoGraph>(m, "CoGraph")
        .def_property_readonly("num_items", [](const CoGraph& c) { return c.num_items; })
        .def_property_readonly("num_co_relations", [](const CoGraph& c) { return c.num_co_relations; })
        .def_property_readonly("co_relation_names", [](const CoGraph& c) { return c.co_relation_names; })
        .def("all_edges", &CoGraph::all_edges);

    py::class_<RelationalGraph>(m, "RelationalGraph")
        .def_property_readonly("num_users", [](const RelationalGraph& g) { return g.num_users; })
        .def_property_readonly("num_items", [](const RelationalGraph& g) { return g.num_items; })
        .def_property_readonly("interact_relation",
                               [](const RelationalGraph& g) { return g.interact_relation; })
        .def_property_readonly("num_relation_rows", &RelationalGraph::num_relation_rows)
        .def("item_neighbors",
             [](const RelationalGraph& g, int32_t i) {
                 std::vector<std::pair<int32_t, int32_t>> out;
                 for (const auto& e : g.item_neighbors[static_cast<size_t>(i)]) {
                     out.emplace_back(e.nbr, e.rel);
                 }
                 return out;
             })
        .def("user_neighbors",
             [](const RelationalGraph& g, int32_t u) {
                 std::vector<std::pair<int32_t, int32_t>> out;
                 for (const auto& e : g.user_neighbors[static_cast<size_t>(u)]) {
                     out.emplace_back(e.nbr, e.rel);
                 }
                 return out;
             })
        .def("item_user_neighbors",
             [](const RelationalGraph& g, int32_t i) { return g.item_user_neighbors[static_cast<size_t>(i)]; });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("dim", &TrainConfig::dim)
        .def_readwrite("k", &TrainConfig::k)
        .def_readwrite("tau_init", &TrainConfig::tau_init)
        .def_readwrite("tau_min", &TrainConfig::tau_min)
        .def_readwrite("tau_decay", &TrainConfig::tau_decay)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("lambda_", &TrainConfig::lambda)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("depth", &TrainConfig::depth)
        .def_property("strategy",
                      [](const TrainConfig& c) { return to_string(c.strategy); },
                      [](TrainConfig& c, const std::string& s) { c.strategy = strategy_from_string(s); })
        .def("tau_at", &TrainConfig::tau_at);

    py::class_<ParamStore>(m, "ParamStore")
        .def_property_readonly("num_users", [](const ParamStore& p) { return p.num_users; })
        .def_property_readonly("num_items", [](const ParamStore& p) { return p.num_items; })
        .def_property_readonly("num_relations", [](const ParamStore& p) { return p.num_relations; })
        .def_property_readonly("dim", [](const ParamStore& p) { return p.dim; })
        .def("user_embedding",
             [](const ParamStore& p, int32_t u) {
                 auto row = p.user_emb.row(static_cast<size_t>(u));
                 return std::vector<double>(row.begin(), row.end());
             })
        .def("item_embedding",
             [](const ParamStore& p, int32_t i) {
                 auto row = p.item_emb.row(static_cast<size_t>(i));
                 return std::vector<double>(row.begin(), row.end());
             })
        .def("relation_embedding", [](const ParamStore& p, int32_t r) {
            auto row = p.relation_emb.row(static_cast<size_t>(r));
            return std::vector<double>(row.begin(), row.end());
        });

    py::class_<RelevanceDistribution>(m, "RelevanceDistribution")
        .def_readonly("logits", &RelevanceDistribution::logits)
        .def_readonly("probs", &RelevanceDistribution::probs)
        .def("neighbor_ids", [](const RelevanceDistribution& d) {
            std::vector<int32_t> out;
            for (const auto& e : d.neighbors) out.push_back(e.nbr);
            return out;
        });

    py::class_<KHotSelection>(m, "KHotSelection")
        .def_readonly("soft", &KHotSelection::soft)
        .def_readonly("hard", &KHotSelection::hard)
        .def_readonly("stochastic", &KHotSelection::stochastic)
        .def("hard01", &KHotSelection::hard01);

    py::class_<RankedList>(m, "RankedList")
        .def_readonly("user", &RankedList::user)
        .def_readonly("items", &RankedList::items)
        .def_readonly("scores", &RankedList::scores);

    py::class_<MetricTable>(m, "MetricTable")
        .def_readonly("ns", &MetricTable::ns)
        .def_readonly("recall", &MetricTable::recall)
        .def_readonly("precision", &MetricTable::precision)
        .def_readonly("ndcg", &MetricTable::ndcg)
        .def_readonly("users_evaluated", &MetricTable::users_evaluated)
        .def("to_tsv", &MetricTable::to_tsv)
        .def("to_text", &MetricTable::to_text);

    py::class_<SyntheticConfig>(m, "SyntheticConfig")
        .def(py::init<>())
        .def_readwrite("users", &SyntheticConfig::users)
        .def_readwrite("items", &SyntheticConfig::items)
        .def_readwrite("clusters", &SyntheticConfig::clusters)
        .def_readwrite("relevant_relations", &SyntheticConfig::relevant_relations)
        .def_readwrite("noise_relations", &SyntheticConfig::noise_relations)
        .def_readwrite("interactions_per_user", &SyntheticConfig::interactions_per_user)
        .def_readwrite("seed", &SyntheticConfig::seed);

    m.def(
        "load_triples",
        [](const std::string& path, const std::optional<std::vector<std::string>>& item_ids) {
            if (!item_ids) return load_triples(path);
            std::unordered_set<std::string> set(item_ids->begin(), item_ids->end());
            return load_triples(path, &set);
        },
        py::arg("path"), py::arg("item_ids") = std::nullopt);
    m.def("load_interactions", &load_interactions, py::arg("path"));
    m.def("split_interactions", &split_interactions, py::arg("graph"), py::arg("test_fraction"),
          py::arg("seed"));
    m.def("map_entities_to_items", &map_entities_to_items);
    m.def("build_cograph", &build_cograph, py::arg("kg"), py::arg("entity_to_item"),
          py::arg("num_items"), py::arg("degree_cap") = 0);
    m.def("unify", &unify, py::arg("cograph"), py::arg("train"));
    m.def("degree_stats", [](const RelationalGraph& rg) {
        std::map<size_t, size_t> h = degree_stats(rg);
        return std::vector<std::pair<size_t, size_t>>(h.begin(), h.end());
    });
    m.def("softmax",
          [](const std::vector<double>& x) { return softmax(std::span<const double>(x)); });
    m.def("init_params", &init_params, py::arg("num_users"), py::arg("num_items"),
          py::arg("num_relations"), py::arg("dim"), py::arg("seed"), py::arg("scale"));
    m.def(
        "relevance_scores",
        [](int32_t node, bool is_user, const std::vector<std::pair<int32_t, int32_t>>& nbrs,
           const ParamStore& p) { return relevance_scores(node, is_user, to_edges(nbrs), p); },
        py::arg("node"), py::arg("node_is_user"), py::arg("neighbors"), py::arg("params"));
    m.def(
        "ablation_scores",
        [](int32_t node, bool is_user, const std::vector<std::pair<int32_t, int32_t>>& nbrs,
           const ParamStore& p, const std::string& strategy) {
            return ablation_scores(node, is_user, to_edges(nbrs), p, strategy_from_string(strategy));
        },
        py::arg("node"), py::arg("node_is_user"), py::arg("neighbors"), py::arg("params"),
        py::arg("strategy"));
    m.def("gumbel_topk", &gumbel_topk, py::arg("dist"), py::arg("k"), py::arg("tau"), py::arg("seed"));
    m.def("deterministic_topk", &deterministic_topk, py::arg("dist"), py::arg("k"));
    m.def("aggregate_item", &aggregate_item, py::arg("item"), py::arg("user_context"), py::arg("rg"),
          py::arg("selection"), py::arg("params"), py::arg("renorm") = false);
    m.def("aggregate_user", &aggregate_user, py::arg("user"), py::arg("rg"), py::arg("selection"),
          py::arg("params"), py::arg("renorm") = false);
    m.def("predict", [](const std::vector<double>& u, const std::vector<double>& i) {
        return predict(std::span<const double>(u), std::span<const double>(i));
    });
    m.def("train_epoch",
          [](const RelationalGraph& rg, const InteractionGraph& train, ParamStore& params,
             const TrainConfig& cfg, int32_t epoch) { return train_epoch(rg, train, params, cfg, epoch); },
          py::arg("rg"), py::arg("train"), py::arg("params"), py::arg("config"), py::arg("epoch"));
    m.def("rank_items", &rank_items, py::arg("user"), py::arg("rg"), py::arg("params"),
          py::arg("config"), py::arg("train"));
    m.def(
        "recall_at",
        [](const RankedList& rl, const std::vector<int32_t>& rel, int32_t n) {
            return recall_at(rl, std::set<int32_t>(rel.begin(), rel.end()), n);
        },
        py::arg("ranked"), py::arg("relevant"), py::arg("n"));
    m.def(
        "precision_at",
        [](const RankedList& rl, const std::vector<int32_t>& rel, int32_t n) {
            return precision_at(rl, std::set<int32_t>(rel.begin(), rel.end()), n);
        },
        py::arg("ranked"), py::arg("relevant"), py::arg("n"));
    m.def(
        "ndcg_at",
        [](const RankedList& rl, const std::vector<int32_t>& rel, int32_t n) {
            return ndcg_at(rl, std::set<int32_t>(rel.begin(), rel.end()), n);
        },
        py::arg("ranked"), py::arg("relevant"), py::arg("n"));
    m.def("evaluate", &evaluate, py::arg("split"), py::arg("rg"), py::arg("params"), py::arg("config"),
          py::arg("ns"), py::arg("user_sample") = 0, py::arg("sample_seed") = 0);
    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("params"), py::arg("config"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("write_synthetic_dataset", &write_synthetic_dataset, py::arg("config"),
          py::arg("triples_path"), py::arg("interactions_path"));
}
