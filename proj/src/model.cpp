#include "dskreg/model.hpp"

#include <algorithm>
#include <cmath>

#include "dskreg/rng.hpp"

namespace dskreg {

namespace {

// phi = a .* softmax(logits); in renorm mode the softmax denominator is
// replaced by the gated sum so phi sums to 1 over selected positions.
struct AttentionCore {
    std::vector<double> s;  // softmax(l), or exp(l - max) in renorm mode
    double denom = 0.0;     // renorm only
    std::vector<double> phi;
};

AttentionCore attention_core(std::span<const double> logits, std::span<const double> a, bool renorm) {
    const size_t n = logits.size();
    AttentionCore out;
    out.s.resize(n);
    out.phi.resize(n);
    double m = -std::numeric_limits<double>::infinity();
    for (double v : logits) m = std::max(m, v);
    if (!renorm) {
        double sum = 0.0;
        for (size_t k = 0; k < n; ++k) {
            out.s[k] = std::exp(logits[k] - m);
            sum += out.s[k];
        }
        for (size_t k = 0; k < n; ++k) {
            out.s[k] /= sum;
            out.phi[k] = a[k] * out.s[k];
        }
    } else {
        double sum = 0.0;
        for (size_t k = 0; k < n; ++k) {
            out.s[k] = std::exp(logits[k] - m);
            sum += a[k] * out.s[k];
        }
        out.denom = sum;
        for (size_t k = 0; k < n; ++k) {
            out.phi[k] = sum > 0.0 ? a[k] * out.s[k] / sum : 0.0;
        }
    }
    return out;
}

std::vector<double> attention_logits(bool node_is_user, int32_t query_user,
                                     std::span<const NeighborEdge> neighbors, const ParamStore& p) {
    auto q = p.user_emb.row(static_cast<size_t>(query_user));
    std::vector<double> logits(neighbors.size());
    for (size_t k = 0; k < neighbors.size(); ++k) {
        auto key = node_is_user ? p.item_emb.row(static_cast<size_t>(neighbors[k].nbr))
                                : p.relation_emb.row(static_cast<size_t>(neighbors[k].rel));
        logits[k] = dot(q, key);
    }
    return logits;
}

void affine_sigmoid(std::span<const double> h, const ParamStore& p, std::vector<double>& out) {
    const auto d = static_cast<size_t>(p.dim);
    out.resize(d);
    for (size_t i = 0; i < d; ++i) {
        double z = p.agg_b[i];
        auto w_row = p.agg_w.row(i);
        for (size_t j = 0; j < d; ++j) z += w_row[j] * h[j];
        out[i] = sigmoid(z);
    }
}

uint64_t node_uid(const RelationalGraph& rg, int32_t node, bool is_user) {
    return is_user ? static_cast<uint64_t>(rg.num_items) + static_cast<uint64_t>(node)
                   : static_cast<uint64_t>(node);
}

}  // namespace

AttentionWeights attention_weights(int32_t node, bool node_is_user, int32_t query_user,
                                   std::span<const NeighborEdge> neighbors, std::span<const double> a,
                                   const ParamStore& params, bool renorm) {
    if (a.size() != neighbors.size()) {
        throw DataError("attention: K-hot length does not match the neighbor list");
    }
    auto logits = attention_logits(node_is_user, query_user, neighbors, params);
    auto core = attention_core(logits, a, renorm);
    return AttentionWeights{node, std::move(core.phi)};
}

std::unique_ptr<AggTape> forward_node(FwdCtx& ctx, int32_t node, bool is_user, int32_t layer) {
    const ParamStore& P = ctx.params;
    auto tape = std::make_unique<AggTape>();
    tape->node = node;
    tape->is_user = is_user;
    tape->layer = layer;
    tape->nbrs = is_user ? std::span<const NeighborEdge>(ctx.rg.user_neighbors[static_cast<size_t>(node)])
                         : std::span<const NeighborEdge>(ctx.rg.item_neighbors[static_cast<size_t>(node)]);

    if (ctx.mut != nullptr) ctx.mut->touch_shared();

    // self input: raw embedding at layer 1, previous layer output above
    if (layer == 1) {
        auto self = is_user ? P.user_emb.row(static_cast<size_t>(node))
                            : P.item_emb.row(static_cast<size_t>(node));
        tape->self_in.assign(self.begin(), self.end());
        if (ctx.mut != nullptr) {
            if (is_user) ctx.mut->touch_user(node);
            else ctx.mut->touch_item(node);
        }
    } else {
        tape->self_child = forward_node(ctx, node, is_user, layer - 1);
        tape->self_in = tape->self_child->out;
    }

    const size_t n = tape->nbrs.size();
    std::vector<double> hvec = tape->self_in;
    if (n > 0) {
        tape->dist = score_neighbors(node, is_user, tape->nbrs, P, ctx.cfg.strategy);
        if (ctx.mut != nullptr && ctx.cfg.strategy != Strategy::Uniform) {
            for (const NeighborEdge& e : tape->nbrs) {
                ctx.mut->touch_relation(e.rel);
                ctx.mut->touch_item(e.nbr);
            }
        }
        if (ctx.stochastic) {
            uint64_t uid = node_uid(ctx.rg, node, is_user);
            uint32_t counter = 0;
            if (ctx.draw_counters != nullptr) counter = (*ctx.draw_counters)[uid]++;
            uint64_t seed = rng::mix({ctx.noise_key, rng::kGumbelSalt, uid, counter});
            tape->sel = gumbel_topk(tape->dist, ctx.cfg.k, ctx.tau, seed);
            if (ctx.cfg.khot == KHotMode::HardST && tape->sel.stochastic) {
                tape->a = tape->sel.hard01();
                tape->straight_through = true;
            } else {
                tape->a = tape->sel.soft;
            }
        } else {
            tape->sel = deterministic_topk(tape->dist, ctx.cfg.k);
            tape->a = tape->sel.soft;  // exact 0/1
        }

        auto att_l = attention_logits(is_user, is_user ? node : ctx.user_context, tape->nbrs, P);
        if (ctx.mut != nullptr) {
            ctx.mut->touch_user(is_user ? node : ctx.user_context);
            for (const NeighborEdge& e : tape->nbrs) {
                if (is_user) ctx.mut->touch_item(e.nbr);
                else ctx.mut->touch_relation(e.rel);
            }
        }
        auto core = attention_core(att_l, tape->a, ctx.cfg.renorm_attention);
        tape->att_s = std::move(core.s);
        tape->att_denom = core.denom;
        tape->phi = std::move(core.phi);

        // message: phi-weighted sum of neighbor representations
        if (layer == 1) {
            for (size_t k = 0; k < n; ++k) {
                if (tape->phi[k] == 0.0 && ctx.mut == nullptr) continue;
                axpy(tape->phi[k], P.item_emb.row(static_cast<size_t>(tape->nbrs[k].nbr)), hvec);
                if (ctx.mut != nullptr) ctx.mut->touch_item(tape->nbrs[k].nbr);
            }
        } else {
            tape->children.resize(n);
            for (size_t k = 0; k < n; ++k) {
                // a zero gate carries no value and no gradient; skip the
                // subtree unless training needs it for the backward pass
                if (tape->phi[k] == 0.0 && ctx.mut == nullptr && !tape->straight_through) continue;
                tape->children[k] = forward_node(ctx, tape->nbrs[k].nbr, false, layer - 1);
                axpy(tape->phi[k], tape->children[k]->out, hvec);
            }
        }
    }
    tape->h = std::move(hvec);
    affine_sigmoid(tape->h, P, tape->out);
    return tape;
}

void backward_node(FwdCtx& ctx, const AggTape& tape, std::span<const double> d_out) {
    ParamStore& P = *ctx.mut;
    const auto d = static_cast<size_t>(P.dim);

    // out = sigmoid(W h + b)
    std::vector<double> dz(d);
    for (size_t i = 0; i < d; ++i) dz[i] = d_out[i] * tape.out[i] * (1.0 - tape.out[i]);
    std::vector<double> dh(d, 0.0);
    for (size_t i = 0; i < d; ++i) {
        auto w_row = P.agg_w.row(i);
        auto g_row = P.agg_w_grad.row(i);
        for (size_t j = 0; j < d; ++j) {
            g_row[j] += dz[i] * tape.h[j];
            dh[j] += w_row[j] * dz[i];
        }
        P.agg_b_grad[i] += dz[i];
    }

    // self path
    if (tape.layer == 1) {
        auto g = tape.is_user ? P.user_grad.row(static_cast<size_t>(tape.node))
                              : P.item_grad.row(static_cast<size_t>(tape.node));
        axpy(1.0, dh, g);
    } else {
        backward_node(ctx, *tape.self_child, dh);
    }

    const size_t n = tape.nbrs.size();
    if (n == 0) return;

    auto child_out = [&](size_t k) -> std::span<const double> {
        if (tape.layer == 1) return P.item_emb.row(static_cast<size_t>(tape.nbrs[k].nbr));
        return tape.children[k]->out;
    };

    std::vector<double> dphi(n);
    for (size_t k = 0; k < n; ++k) {
        dphi[k] = dot(dh, child_out(k));
        if (tape.phi[k] != 0.0) {
            if (tape.layer == 1) {
                axpy(tape.phi[k], dh, P.item_grad.row(static_cast<size_t>(tape.nbrs[k].nbr)));
            } else {
                std::vector<double> dchild(d);
                for (size_t j = 0; j < d; ++j) dchild[j] = tape.phi[k] * dh[j];
                backward_node(ctx, *tape.children[k], dchild);
            }
        }
    }

    // attention backward
    std::vector<double> da(n, 0.0);
    std::vector<double> dl(n, 0.0);
    if (!ctx.cfg.renorm_attention) {
        // phi_k = a_k * s_k, s = softmax(l)
        std::vector<double> ds(n);
        double inner = 0.0;
        for (size_t k = 0; k < n; ++k) {
            da[k] = tape.att_s[k] * dphi[k];
            ds[k] = tape.a[k] * dphi[k];
            inner += tape.att_s[k] * ds[k];
        }
        for (size_t k = 0; k < n; ++k) dl[k] = tape.att_s[k] * (ds[k] - inner);
    } else {
        // phi_k = a_k E_k / S with E = exp(l - max), S = sum a E
        const double S = tape.att_denom;
        if (S > 0.0) {
            double inner = 0.0;
            for (size_t k = 0; k < n; ++k) inner += dphi[k] * tape.phi[k];
            for (size_t k = 0; k < n; ++k) {
                double dw = (dphi[k] - inner) / S;
                da[k] = dw * tape.att_s[k];
                dl[k] = dw * tape.a[k] * tape.att_s[k];
            }
        }
    }

    const int32_t query = tape.is_user ? tape.node : ctx.user_context;
    auto q_row = P.user_emb.row(static_cast<size_t>(query));
    auto q_grad = P.user_grad.row(static_cast<size_t>(query));
    for (size_t k = 0; k < n; ++k) {
        if (dl[k] == 0.0) continue;
        if (tape.is_user) {
            axpy(dl[k], P.item_emb.row(static_cast<size_t>(tape.nbrs[k].nbr)), q_grad);
            axpy(dl[k], q_row, P.item_grad.row(static_cast<size_t>(tape.nbrs[k].nbr)));
        } else {
            axpy(dl[k], P.relation_emb.row(static_cast<size_t>(tape.nbrs[k].rel)), q_grad);
            axpy(dl[k], q_row, P.relation_grad.row(static_cast<size_t>(tape.nbrs[k].rel)));
        }
    }

    // sampler backward: gradients flow through the soft draws (directly in
    // soft mode, via the straight-through estimator in hard_st mode)
    if (tape.sel.stochastic) {
        auto d_logits = khot_backward_logits(tape.dist, tape.sel, da);
        accumulate_score_grads(tape.dist, ctx.cfg.strategy, d_logits, P);
    }
}

namespace {

std::vector<double> aggregate_with_selection(int32_t node, bool is_user, int32_t query_user,
                                             std::span<const NeighborEdge> nbrs,
                                             const KHotSelection& sel, const ParamStore& P,
                                             bool renorm) {
    if (sel.size() != nbrs.size()) {
        throw DataError("aggregation: selection length does not match the neighbor list");
    }
    auto self = is_user ? P.user_emb.row(static_cast<size_t>(node))
                        : P.item_emb.row(static_cast<size_t>(node));
    std::vector<double> h(self.begin(), self.end());
    if (!nbrs.empty()) {
        auto logits = attention_logits(is_user, query_user, nbrs, P);
        auto core = attention_core(logits, sel.soft, renorm);
        for (size_t k = 0; k < nbrs.size(); ++k) {
            axpy(core.phi[k], P.item_emb.row(static_cast<size_t>(nbrs[k].nbr)), h);
        }
    }
    std::vector<double> out;
    affine_sigmoid(h, P, out);
    return out;
}

}  // namespace

std::vector<double> aggregate_item(int32_t item, int32_t user_context, const RelationalGraph& rg,
                                   const KHotSelection& sel, const ParamStore& params, bool renorm) {
    return aggregate_with_selection(item, false, user_context,
                                    rg.item_neighbors[static_cast<size_t>(item)], sel, params, renorm);
}

std::vector<double> aggregate_user(int32_t user, const RelationalGraph& rg, const KHotSelection& sel,
                                   const ParamStore& params, bool renorm) {
    return aggregate_with_selection(user, true, user, rg.user_neighbors[static_cast<size_t>(user)], sel,
                                    params, renorm);
}

std::vector<double> infer_embedding(const RelationalGraph& rg, const ParamStore& params,
                                    const TrainConfig& cfg, int32_t node, bool is_user,
                                    int32_t user_context) {
    FwdCtx ctx{rg, params, nullptr, cfg};
    ctx.stochastic = false;
    ctx.user_context = user_context;
    auto tape = forward_node(ctx, node, is_user, cfg.depth);
    return tape->out;
}

double predict(std::span<const double> user_out, std::span<const double> item_out) {
    if (user_out.size() != item_out.size()) throw DataError("predict: dimension mismatch");
    return sigmoid(dot(user_out, item_out));
}

int32_t sample_negative(const InteractionGraph& train, int32_t user, std::mt19937_64& prng) {
    if (train.degree(user) >= train.num_items()) {
        throw DataError("user " + std::to_string(user) + " interacted with every item; no negative exists");
    }
    for (;;) {
        auto cand = static_cast<int32_t>(rng::uniform_below(prng, static_cast<uint64_t>(train.num_items())));
        if (!train.has_edge(user, cand)) return cand;
    }
}

std::vector<BprTriplet> sample_negatives(const InteractionGraph& train,
                                         std::span<const std::pair<int32_t, int32_t>> batch,
                                         std::mt19937_64& prng) {
    std::vector<BprTriplet> out;
    out.reserve(batch.size());
    for (const auto& [u, i] : batch) {
        out.push_back({u, i, sample_negative(train, u, prng)});
    }
    return out;
}

double bpr_loss(std::span<const double> scores_pos, std::span<const double> scores_neg,
                const ParamStore& params, double lambda) {
    if (scores_pos.size() != scores_neg.size()) throw DataError("bpr_loss: score length mismatch");
    double loss = 0.0;
    for (size_t t = 0; t < scores_pos.size(); ++t) {
        loss += softplus(-(scores_pos[t] - scores_neg[t]));
    }
    return loss + lambda * params.l2_touched();
}

double batch_objective(const RelationalGraph& rg, ParamStore& params, const TrainConfig& cfg,
                       double tau, std::span<const BprTriplet> triplets, uint64_t noise_key,
                       bool accumulate) {
    params.zero_grads();
    std::unordered_map<uint64_t, uint32_t> counters;
    FwdCtx ctx{rg, params, &params, cfg};
    ctx.tau = tau;
    ctx.stochastic = true;
    ctx.noise_key = noise_key;
    ctx.draw_counters = &counters;

    const auto d = static_cast<size_t>(params.dim);
    double loss = 0.0;
    for (const BprTriplet& t : triplets) {
        ctx.user_context = t.user;
        auto tape_u = forward_node(ctx, t.user, true, cfg.depth);
        auto tape_i = forward_node(ctx, t.pos_item, false, cfg.depth);
        auto tape_j = forward_node(ctx, t.neg_item, false, cfg.depth);
        const double su = dot(tape_u->out, tape_i->out);
        const double sj = dot(tape_u->out, tape_j->out);
        double pos = su, neg = sj;
        if (cfg.bpr_on_sigmoid) {
            pos = sigmoid(su);
            neg = sigmoid(sj);
        }
        const double delta = pos - neg;
        loss += softplus(-delta);
        if (accumulate) {
            const double ddelta = sigmoid(delta) - 1.0;
            double dsu = ddelta;
            double dsj = -ddelta;
            if (cfg.bpr_on_sigmoid) {
                dsu *= pos * (1.0 - pos);
                dsj *= neg * (1.0 - neg);
            }
            std::vector<double> d_u(d), d_i(d), d_j(d);
            for (size_t x = 0; x < d; ++x) {
                d_u[x] = dsu * tape_i->out[x] + dsj * tape_j->out[x];
                d_i[x] = dsu * tape_u->out[x];
                d_j[x] = dsj * tape_u->out[x];
            }
            backward_node(ctx, *tape_u, d_u);
            backward_node(ctx, *tape_i, d_i);
            backward_node(ctx, *tape_j, d_j);
        }
    }
    loss += cfg.lambda * params.l2_touched();
    return loss;
}

double train_epoch(const RelationalGraph& rg, const InteractionGraph& train, ParamStore& params,
                   const TrainConfig& cfg, int32_t epoch, AdamState* adam) {
    const double tau = cfg.tau_at(epoch);
    std::vector<std::pair<int32_t, int32_t>> edges = train.edges;
    std::mt19937_64 shuffle_rng(rng::mix({cfg.seed, rng::kShuffleSalt, static_cast<uint64_t>(epoch)}));
    rng::shuffle(edges, shuffle_rng);
    std::mt19937_64 neg_rng(rng::mix({cfg.seed, rng::kNegativeSalt, static_cast<uint64_t>(epoch)}));

    double loss_total = 0.0;
    size_t pos = 0;
    uint64_t batch_idx = 0;
    while (pos < edges.size()) {
        const size_t end = std::min(pos + static_cast<size_t>(cfg.batch_size), edges.size());
        std::span<const std::pair<int32_t, int32_t>> chunk(edges.data() + pos, end - pos);
        auto triplets = sample_negatives(train, chunk, neg_rng);
        const uint64_t noise_key =
            rng::mix({cfg.seed, static_cast<uint64_t>(epoch), batch_idx});
        const double batch_loss =
            batch_objective(rg, params, cfg, tau, triplets, noise_key, /*accumulate=*/true);
        if (!std::isfinite(batch_loss)) {
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch_idx));
        }
        if (cfg.optimizer == Optimizer::Adam) {
            adam_step(params, *adam, cfg.lr, cfg.lambda);
        } else {
            sgd_step(params, cfg.lr, cfg.lambda);
        }
        loss_total += batch_loss;
        pos = end;
        ++batch_idx;
    }
    return loss_total / static_cast<double>(edges.size());
}

}  // namespace dskreg
