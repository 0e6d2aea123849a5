#include "dskreg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dskreg/rng.hpp"

namespace dskreg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

RelevanceDistribution score_neighbors(int32_t node, bool node_is_user,
                                      std::span<const NeighborEdge> neighbors,
                                      const ParamStore& params, Strategy strategy) {
    if (neighbors.empty()) {
        throw DataError("relevance scoring over an empty neighbor list (node " + std::to_string(node) + ")");
    }
    RelevanceDistribution dist;
    dist.node = node;
    dist.node_is_user = node_is_user;
    dist.neighbors.assign(neighbors.begin(), neighbors.end());
    const size_t n = neighbors.size();
    dist.logits.resize(n);
    const auto d = static_cast<size_t>(params.dim);

    for (size_t k = 0; k < n; ++k) {
        auto rel = params.relation_emb.row(static_cast<size_t>(neighbors[k].rel));
        auto emb = params.item_emb.row(static_cast<size_t>(neighbors[k].nbr));
        switch (strategy) {
            case Strategy::GS: {
                double z = params.sampler_b;
                for (size_t j = 0; j < d; ++j) z += params.sampler_w[j] * rel[j];
                for (size_t j = 0; j < d; ++j) z += params.sampler_w[d + j] * emb[j];
                dist.logits[k] = z;
                break;
            }
            case Strategy::Uniform:
                dist.logits[k] = 0.0;
                break;
            case Strategy::L2: {
                double s = 0.0;
                for (size_t j = 0; j < d; ++j) {
                    double diff = rel[j] - emb[j];
                    s += diff * diff;
                }
                dist.logits[k] = -std::sqrt(s);  // smaller distance => higher probability
                break;
            }
            case Strategy::Inner:
                dist.logits[k] = dot(rel, emb);
                break;
        }
    }
    dist.probs = softmax(dist.logits);
    const double lse = log_sum_exp(dist.logits);
    dist.logp.resize(n);
    for (size_t k = 0; k < n; ++k) dist.logp[k] = dist.logits[k] - lse;
    return dist;
}

RelevanceDistribution relevance_scores(int32_t node, bool node_is_user,
                                       std::span<const NeighborEdge> neighbors,
                                       const ParamStore& params) {
    return score_neighbors(node, node_is_user, neighbors, params, Strategy::GS);
}

RelevanceDistribution ablation_scores(int32_t node, bool node_is_user,
                                      std::span<const NeighborEdge> neighbors,
                                      const ParamStore& params, Strategy strategy) {
    if (strategy == Strategy::GS) throw ConfigError("ablation_scores expects uniform, l2 or inner");
    return score_neighbors(node, node_is_user, neighbors, params, strategy);
}

std::vector<double> KHotSelection::hard01() const {
    std::vector<double> out(soft.size(), 0.0);
    for (int32_t idx : hard) out[static_cast<size_t>(idx)] = 1.0;
    return out;
}

namespace {

KHotSelection all_selected(size_t n) {
    KHotSelection sel;
    sel.soft.assign(n, 1.0);
    sel.hard.resize(n);
    std::iota(sel.hard.begin(), sel.hard.end(), 0);
    sel.stochastic = false;
    return sel;
}

KHotSelection run_gumbel_draws(const RelevanceDistribution& dist, int32_t k, double tau,
                               std::vector<std::vector<double>> noise) {
    const size_t n = dist.size();
    KHotSelection sel;
    sel.tau = tau;
    sel.stochastic = true;
    sel.soft.assign(n, 0.0);
    sel.noise = std::move(noise);

    std::vector<char> masked(n, 0);
    std::vector<double> z(n);
    for (int32_t t = 0; t < k; ++t) {
        const auto& g = sel.noise[static_cast<size_t>(t)];
        for (size_t j = 0; j < n; ++j) {
            z[j] = masked[j] ? kNegInf : (dist.logp[j] + g[j]) / tau;
        }
        // softmax over unmasked positions
        double m = kNegInf;
        for (size_t j = 0; j < n; ++j) m = std::max(m, z[j]);
        std::vector<double> y(n, 0.0);
        double sum = 0.0;
        size_t arg = 0;
        double best = kNegInf;
        for (size_t j = 0; j < n; ++j) {
            if (masked[j]) continue;
            y[j] = std::exp(z[j] - m);
            sum += y[j];
            if (z[j] > best) {
                best = z[j];
                arg = j;
            }
        }
        for (size_t j = 0; j < n; ++j) y[j] /= sum;
        for (size_t j = 0; j < n; ++j) sel.soft[j] += y[j];
        sel.hard.push_back(static_cast<int32_t>(arg));
        masked[arg] = 1;
        sel.draws.push_back(std::move(y));
    }
    return sel;
}

}  // namespace

KHotSelection gumbel_topk(const RelevanceDistribution& dist, int32_t k, double tau, uint64_t seed) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    const size_t n = dist.size();
    if (n == 0) throw DataError("sampling from an empty distribution");
    if (n <= static_cast<size_t>(k)) return all_selected(n);

    std::mt19937_64 prng(seed);
    std::vector<std::vector<double>> noise(static_cast<size_t>(k));
    for (auto& row : noise) {
        row.resize(n);
        for (double& g : row) g = rng::gumbel(prng);
    }
    return run_gumbel_draws(dist, k, tau, std::move(noise));
}

KHotSelection gumbel_topk_with_noise(const RelevanceDistribution& dist, int32_t k, double tau,
                                     const std::vector<std::vector<double>>& noise) {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    const size_t n = dist.size();
    if (n == 0) throw DataError("sampling from an empty distribution");
    if (n <= static_cast<size_t>(k)) return all_selected(n);
    if (noise.size() < static_cast<size_t>(k)) throw ConfigError("noise matrix has fewer than k rows");
    std::vector<std::vector<double>> rows(noise.begin(), noise.begin() + k);
    for (const auto& row : rows) {
        if (row.size() != n) throw ConfigError("noise row length does not match neighbor count");
    }
    return run_gumbel_draws(dist, k, tau, std::move(rows));
}

KHotSelection deterministic_topk(const RelevanceDistribution& dist, int32_t k) {
    if (k < 1) throw ConfigError("k must be >= 1");
    const size_t n = dist.size();
    if (n == 0) throw DataError("selecting from an empty distribution");
    if (n <= static_cast<size_t>(k)) return all_selected(n);

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (dist.probs[a] != dist.probs[b]) return dist.probs[a] > dist.probs[b];
        if (dist.neighbors[a].nbr != dist.neighbors[b].nbr) return dist.neighbors[a].nbr < dist.neighbors[b].nbr;
        return a < b;
    });
    KHotSelection sel;
    sel.stochastic = false;
    sel.soft.assign(n, 0.0);
    for (int32_t t = 0; t < k; ++t) {
        sel.hard.push_back(static_cast<int32_t>(order[static_cast<size_t>(t)]));
        sel.soft[order[static_cast<size_t>(t)]] = 1.0;
    }
    return sel;
}

std::vector<double> khot_backward_logits(const RelevanceDistribution& dist, const KHotSelection& sel,
                                         std::span<const double> d_soft) {
    const size_t n = dist.size();
    std::vector<double> d_logp(n, 0.0);
    if (!sel.stochastic) return d_logp;  // constant selection, no gradient

    std::vector<char> masked(n, 0);
    for (size_t t = 0; t < sel.draws.size(); ++t) {
        const auto& y = sel.draws[t];
        // softmax backward restricted to positions available at this draw
        double inner = 0.0;
        for (size_t j = 0; j < n; ++j) {
            if (!masked[j]) inner += y[j] * d_soft[j];
        }
        for (size_t j = 0; j < n; ++j) {
            if (!masked[j]) d_logp[j] += y[j] * (d_soft[j] - inner) / sel.tau;
        }
        masked[static_cast<size_t>(sel.hard[t])] = 1;
    }
    // logp = logits - logsumexp(logits)
    double total = 0.0;
    for (double v : d_logp) total += v;
    std::vector<double> d_logits(n);
    for (size_t j = 0; j < n; ++j) d_logits[j] = d_logp[j] - dist.probs[j] * total;
    return d_logits;
}

void accumulate_score_grads(const RelevanceDistribution& dist, Strategy strategy,
                            std::span<const double> d_logits, ParamStore& params) {
    const auto d = static_cast<size_t>(params.dim);
    const size_t n = dist.size();
    switch (strategy) {
        case Strategy::Uniform:
            return;  // constant logits
        case Strategy::GS: {
            for (size_t k = 0; k < n; ++k) {
                const double g = d_logits[k];
                if (g == 0.0) continue;
                auto rel = params.relation_emb.row(static_cast<size_t>(dist.neighbors[k].rel));
                auto emb = params.item_emb.row(static_cast<size_t>(dist.neighbors[k].nbr));
                auto rel_g = params.relation_grad.row(static_cast<size_t>(dist.neighbors[k].rel));
                auto emb_g = params.item_grad.row(static_cast<size_t>(dist.neighbors[k].nbr));
                for (size_t j = 0; j < d; ++j) {
                    params.sampler_w_grad[j] += g * rel[j];
                    params.sampler_w_grad[d + j] += g * emb[j];
                    rel_g[j] += g * params.sampler_w[j];
                    emb_g[j] += g * params.sampler_w[d + j];
                }
                params.sampler_b_grad += g;
                params.touch_relation(dist.neighbors[k].rel);
                params.touch_item(dist.neighbors[k].nbr);
            }
            params.touch_shared();
            return;
        }
        case Strategy::L2: {
            for (size_t k = 0; k < n; ++k) {
                const double g = d_logits[k];
                if (g == 0.0) continue;
                auto rel = params.relation_emb.row(static_cast<size_t>(dist.neighbors[k].rel));
                auto emb = params.item_emb.row(static_cast<size_t>(dist.neighbors[k].nbr));
                auto rel_g = params.relation_grad.row(static_cast<size_t>(dist.neighbors[k].rel));
                auto emb_g = params.item_grad.row(static_cast<size_t>(dist.neighbors[k].nbr));
                const double norm = -dist.logits[k];  // ||r - e||
                if (norm <= 0.0) continue;            // subgradient 0 at the tip
                for (size_t j = 0; j < d; ++j) {
                    double unit = (rel[j] - emb[j]) / norm;
                    rel_g[j] += g * (-unit);
                    emb_g[j] += g * unit;
                }
                params.touch_relation(dist.neighbors[k].rel);
                params.touch_item(dist.neighbors[k].nbr);
            }
            return;
        }
        case Strategy::Inner: {
            for (size_t k = 0; k < n; ++k) {
                const double g = d_logits[k];
                if (g == 0.0) continue;
                auto rel = params.relation_emb.row(static_cast<size_t>(dist.neighbors[k].rel));
                auto emb = params.item_emb.row(static_cast<size_t>(dist.neighbors[k].nbr));
                auto rel_g = params.relation_grad.row(static_cast<size_t>(dist.neighbors[k].rel));
                auto emb_g = params.item_grad.row(static_cast<size_t>(dist.neighbors[k].nbr));
                for (size_t j = 0; j < d; ++j) {
                    rel_g[j] += g * emb[j];
                    emb_g[j] += g * rel[j];
                }
                params.touch_relation(dist.neighbors[k].rel);
                params.touch_item(dist.neighbors[k].nbr);
            }
            return;
        }
    }
}

}  // namespace dskreg
