#include "dskreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dskreg/rng.hpp"

namespace dskreg {

RankedList rank_items(int32_t user, const RelationalGraph& rg, const ParamStore& params,
                      const TrainConfig& cfg, const InteractionGraph& train) {
    if (user < 0 || user >= train.num_users()) {
        throw DataError("rank_items: unknown user " + std::to_string(user));
    }
    if (train.degree(user) == 0) {
        throw DataError("rank_items: user " + std::to_string(user) + " has no training history");
    }
    auto user_out = infer_embedding(rg, params, cfg, user, true, user);

    RankedList rl;
    rl.user = user;
    const auto& train_items = train.user_adj[static_cast<size_t>(user)];
    for (int32_t v = 0; v < train.num_items(); ++v) {
        if (std::binary_search(train_items.begin(), train_items.end(), v)) continue;
        auto item_out = infer_embedding(rg, params, cfg, v, false, user);
        rl.items.push_back(v);
        rl.scores.push_back(predict(user_out, item_out));
    }
    std::vector<size_t> order(rl.items.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (rl.scores[a] != rl.scores[b]) return rl.scores[a] > rl.scores[b];
        return rl.items[a] < rl.items[b];
    });
    RankedList sorted;
    sorted.user = user;
    sorted.items.reserve(order.size());
    sorted.scores.reserve(order.size());
    for (size_t idx : order) {
        sorted.items.push_back(rl.items[idx]);
        sorted.scores.push_back(rl.scores[idx]);
    }
    return sorted;
}

namespace {

size_t hits_in_top_n(const RankedList& rl, const std::set<int32_t>& relevant, int32_t n) {
    const size_t top = std::min(static_cast<size_t>(n), rl.items.size());
    size_t hits = 0;
    for (size_t k = 0; k < top; ++k) {
        if (relevant.count(rl.items[k])) ++hits;
    }
    return hits;
}

void require_relevant(const std::set<int32_t>& relevant) {
    if (relevant.empty()) throw DataError("metrics: empty relevant set");
}

}  // namespace

double recall_at(const RankedList& rl, const std::set<int32_t>& relevant, int32_t n) {
    require_relevant(relevant);
    return static_cast<double>(hits_in_top_n(rl, relevant, n)) / static_cast<double>(relevant.size());
}

double precision_at(const RankedList& rl, const std::set<int32_t>& relevant, int32_t n) {
    require_relevant(relevant);
    return static_cast<double>(hits_in_top_n(rl, relevant, n)) / static_cast<double>(n);
}

double ndcg_at(const RankedList& rl, const std::set<int32_t>& relevant, int32_t n) {
    require_relevant(relevant);
    const size_t top = std::min(static_cast<size_t>(n), rl.items.size());
    double dcg = 0.0;
    for (size_t k = 0; k < top; ++k) {
        if (relevant.count(rl.items[k])) {
            dcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
        }
    }
    const size_t ideal = std::min(static_cast<size_t>(n), relevant.size());
    double idcg = 0.0;
    for (size_t k = 0; k < ideal; ++k) {
        idcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
    }
    return dcg / idcg;
}

double MetricTable::recall_at_n(int32_t n) const {
    for (size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] == n) return recall[i];
    }
    throw ConfigError("metric table has no column for N=" + std::to_string(n));
}

std::string MetricTable::to_tsv() const {
    std::ostringstream out;
    for (size_t i = 0; i < ns.size(); ++i) out << (i ? "\t" : "") << "R@" << ns[i];
    for (int32_t n : ns) out << "\tP@" << n;
    for (int32_t n : ns) out << "\tN@" << n;
    out << '\n';
    auto emit = [&](const std::vector<double>& vals, bool first) {
        for (size_t i = 0; i < vals.size(); ++i) {
            if (!first || i) out << '\t';
            out << format_double(vals[i]);
        }
    };
    emit(recall, true);
    emit(precision, false);
    emit(ndcg, false);
    out << '\n';
    return out.str();
}

std::string MetricTable::to_text() const {
    std::ostringstream head, row;
    char buf[32];
    auto cell = [&](std::ostringstream& os, const std::string& s) {
        os << s;
        for (size_t i = s.size(); i < 10; ++i) os << ' ';
    };
    for (int32_t n : ns) cell(head, "R@" + std::to_string(n));
    for (int32_t n : ns) cell(head, "P@" + std::to_string(n));
    for (int32_t n : ns) cell(head, "N@" + std::to_string(n));
    auto vals = [&](const std::vector<double>& v) {
        for (double x : v) {
            std::snprintf(buf, sizeof(buf), "%.4f", x);
            cell(row, buf);
        }
    };
    vals(recall);
    vals(precision);
    vals(ndcg);
    return head.str() + "\n" + row.str() + "\n";
}

MetricTable evaluate(const DatasetSplit& split, const RelationalGraph& rg, const ParamStore& params,
                     const TrainConfig& cfg, const std::vector<int32_t>& ns, int32_t user_sample,
                     uint64_t sample_seed) {
    if (split.test.num_edges() == 0) throw DataError("evaluate: empty test set");

    std::vector<int32_t> users;
    for (int32_t u = 0; u < split.test.num_users(); ++u) {
        if (split.test.degree(u) > 0 && split.train.degree(u) > 0) users.push_back(u);
    }
    if (users.empty()) throw DataError("evaluate: no evaluable test users");
    if (user_sample > 0 && static_cast<size_t>(user_sample) < users.size()) {
        std::mt19937_64 prng(rng::mix({sample_seed, rng::kEvalSampleSalt}));
        rng::shuffle(users, prng);
        users.resize(static_cast<size_t>(user_sample));
        std::sort(users.begin(), users.end());
    }

    MetricTable table;
    table.ns = ns;
    table.recall.assign(ns.size(), 0.0);
    table.precision.assign(ns.size(), 0.0);
    table.ndcg.assign(ns.size(), 0.0);
    table.users_evaluated = users.size();

    for (int32_t u : users) {
        RankedList rl = rank_items(u, rg, params, cfg, split.train);
        const auto& test_items = split.test.user_adj[static_cast<size_t>(u)];
        std::set<int32_t> relevant(test_items.begin(), test_items.end());
        for (size_t i = 0; i < ns.size(); ++i) {
            table.recall[i] += recall_at(rl, relevant, ns[i]);
            table.precision[i] += precision_at(rl, relevant, ns[i]);
            table.ndcg[i] += ndcg_at(rl, relevant, ns[i]);
        }
    }
    const double denom = static_cast<double>(users.size());
    for (size_t i = 0; i < ns.size(); ++i) {
        table.recall[i] /= denom;
        table.precision[i] /= denom;
        table.ndcg[i] /= denom;
    }
    return table;
}

}  // namespace dskreg
