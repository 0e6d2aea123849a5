#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dskreg/matrix.hpp"

namespace dskreg {

enum class Strategy { GS, Uniform, L2, Inner };
enum class Optimizer { SGD, Adam };
enum class KHotMode { Soft, HardST };

std::string to_string(Strategy s);
std::string to_string(Optimizer o);
std::string to_string(KHotMode m);
Strategy strategy_from_string(const std::string& s);
Optimizer optimizer_from_string(const std::string& s);
KHotMode khot_mode_from_string(const std::string& s);

// Everything the training loop needs to know. Serialized into checkpoints so
// evaluation reuses the exact model semantics the parameters were trained
// with.
struct TrainConfig {
    int32_t dim = 16;
    int32_t k = 8;
    double tau_init = 1.0;
    double tau_min = 0.1;
    double tau_decay = 0.9;  // multiplicative per epoch
    double lr = 0.01;
    double lambda = 1e-5;
    int32_t epochs = 30;
    int32_t batch_size = 256;
    uint64_t seed = 42;
    Strategy strategy = Strategy::GS;
    Optimizer optimizer = Optimizer::SGD;
    KHotMode khot = KHotMode::Soft;
    int32_t depth = 1;
    bool bpr_on_sigmoid = false;    // feed sigmoid scores instead of raw dot products into BPR
    bool renorm_attention = false;  // renormalize attention over selected neighbors only
    double init_scale = 0.1;

    double tau_at(int32_t epoch) const;
    void validate() const;  // throws ConfigError

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string train_config_to_kv(const TrainConfig& cfg);
TrainConfig train_config_from_kv(const std::string& text);
// Returns false when the key is not a TrainConfig key.
bool apply_train_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value);

// Named view over one tensor and its gradient slot; used by the optimizer,
// the checkpoint writer and the gradient checker.
struct TensorView {
    const char* name;
    std::span<double> value;
    std::span<double> grad;
};

// All learnable tensors plus same-shape gradient accumulators and the
// touched-this-batch bookkeeping that sparse updates and the batch L2 term
// run on.
struct ParamStore {
    int32_t num_users = 0;
    int32_t num_items = 0;
    int32_t num_relations = 0;  // co-relations + 1 interact row
    int32_t dim = 0;

    Matrix user_emb, item_emb, relation_emb;
    Matrix user_grad, item_grad, relation_grad;
    std::vector<double> sampler_w, sampler_w_grad;  // length 2*dim
    double sampler_b = 0.0, sampler_b_grad = 0.0;
    Matrix agg_w, agg_w_grad;                       // dim x dim
    std::vector<double> agg_b, agg_b_grad;          // length dim

    std::vector<char> user_touched_mask, item_touched_mask, relation_touched_mask;
    std::vector<int32_t> touched_users, touched_items, touched_relations;
    bool shared_touched = false;

    void touch_user(int32_t u);
    void touch_item(int32_t i);
    void touch_relation(int32_t r);
    void touch_shared() { shared_touched = true; }

    void zero_grads();            // zeroes all gradient slots, clears touched sets
    double l2_touched() const;    // sum of squares over touched rows and shared weights
    void add_l2_grads(double lambda);  // grad += 2*lambda*theta on touched entries

    std::vector<TensorView> tensor_views();  // fixed order, full tensors
    bool values_finite() const;

    friend bool operator==(const ParamStore&, const ParamStore&) = default;
};

// Entries i.i.d. uniform in [-scale, +scale], filled in a fixed tensor order
// so a seed pins the whole store bit-exactly.
ParamStore init_params(int32_t num_users, int32_t num_items, int32_t num_relations, int32_t dim,
                       uint64_t seed, double scale);

// theta <- theta - lr * (grad + 2*lambda*theta) on touched parameters only;
// gradients are zeroed afterwards. Throws NumericError naming the tensor on
// a non-finite gradient.
void sgd_step(ParamStore& params, double lr, double lambda);

struct AdamState {
    Matrix m_user, v_user, m_item, v_item, m_rel, v_rel;
    std::vector<double> m_w, v_w, m_ab, v_ab;
    double m_b = 0.0, v_b = 0.0;
    Matrix m_aw, v_aw;
    int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

AdamState make_adam_state(const ParamStore& params);
void adam_step(ParamStore& params, AdamState& state, double lr, double lambda);

// Versioned binary checkpoint; round-trips parameters bit-exactly.
void save_checkpoint(const std::string& path, const ParamStore& params, const TrainConfig& cfg);
std::pair<ParamStore, TrainConfig> load_checkpoint(const std::string& path);

// %.17g formatting: enough digits for exact double round trips in text files.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);
int64_t parse_int(const std::string& s, const std::string& context);

}  // namespace dskreg
