#include "dskreg/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "dskreg/errors.hpp"
#include "dskreg/rng.hpp"

namespace dskreg {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::GS: return "gs";
        case Strategy::Uniform: return "uniform";
        case Strategy::L2: return "l2";
        case Strategy::Inner: return "inner";
    }
    return "gs";
}

std::string to_string(Optimizer o) { return o == Optimizer::SGD ? "sgd" : "adam"; }

std::string to_string(KHotMode m) { return m == KHotMode::Soft ? "soft" : "hard_st"; }

Strategy strategy_from_string(const std::string& s) {
    if (s == "gs") return Strategy::GS;
    if (s == "uniform") return Strategy::Uniform;
    if (s == "l2") return Strategy::L2;
    if (s == "inner") return Strategy::Inner;
    throw ConfigError("unknown sampling strategy: '" + s + "' (expected gs|uniform|l2|inner)");
}

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "sgd") return Optimizer::SGD;
    if (s == "adam") return Optimizer::Adam;
    throw ConfigError("unknown optimizer: '" + s + "' (expected sgd|adam)");
}

KHotMode khot_mode_from_string(const std::string& s) {
    if (s == "soft") return KHotMode::Soft;
    if (s == "hard_st") return KHotMode::HardST;
    throw ConfigError("unknown k-hot mode: '" + s + "' (expected soft|hard_st)");
}

double TrainConfig::tau_at(int32_t epoch) const {
    return std::max(tau_min, tau_init * std::pow(tau_decay, static_cast<double>(epoch)));
}

void TrainConfig::validate() const {
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(tau_init > 0.0) || !(tau_min > 0.0)) throw ConfigError("temperatures must be > 0");
    if (!(tau_decay > 0.0 && tau_decay <= 1.0)) throw ConfigError("tau_decay must lie in (0, 1]");
    if (lr < 0.0) throw ConfigError("lr must be >= 0");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (!(init_scale > 0.0)) throw ConfigError("init_scale must be > 0");
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid numeric value '" + s + "' for " + context);
    }
}

int64_t parse_int(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer value '" + s + "' for " + context);
    }
}

std::string train_config_to_kv(const TrainConfig& cfg) {
    std::ostringstream out;
    out << "batch_size=" << cfg.batch_size << '\n';
    out << "bpr_on_sigmoid=" << (cfg.bpr_on_sigmoid ? 1 : 0) << '\n';
    out << "depth=" << cfg.depth << '\n';
    out << "dim=" << cfg.dim << '\n';
    out << "epochs=" << cfg.epochs << '\n';
    out << "init_scale=" << format_double(cfg.init_scale) << '\n';
    out << "k=" << cfg.k << '\n';
    out << "khot=" << to_string(cfg.khot) << '\n';
    out << "lambda=" << format_double(cfg.lambda) << '\n';
    out << "lr=" << format_double(cfg.lr) << '\n';
    out << "optimizer=" << to_string(cfg.optimizer) << '\n';
    out << "renorm_attention=" << (cfg.renorm_attention ? 1 : 0) << '\n';
    out << "seed=" << cfg.seed << '\n';
    out << "strategy=" << to_string(cfg.strategy) << '\n';
    out << "tau_decay=" << format_double(cfg.tau_decay) << '\n';
    out << "tau_init=" << format_double(cfg.tau_init) << '\n';
    out << "tau_min=" << format_double(cfg.tau_min) << '\n';
    return out.str();
}

bool apply_train_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dim") cfg.dim = static_cast<int32_t>(parse_int(value, key));
    else if (key == "k") cfg.k = static_cast<int32_t>(parse_int(value, key));
    else if (key == "tau_init") cfg.tau_init = parse_double(value, key);
    else if (key == "tau_min") cfg.tau_min = parse_double(value, key);
    else if (key == "tau_decay") cfg.tau_decay = parse_double(value, key);
    else if (key == "lr") cfg.lr = parse_double(value, key);
    else if (key == "lambda") cfg.lambda = parse_double(value, key);
    else if (key == "epochs") cfg.epochs = static_cast<int32_t>(parse_int(value, key));
    else if (key == "batch_size") cfg.batch_size = static_cast<int32_t>(parse_int(value, key));
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(value, key));
    else if (key == "strategy") cfg.strategy = strategy_from_string(value);
    else if (key == "optimizer") cfg.optimizer = optimizer_from_string(value);
    else if (key == "khot") cfg.khot = khot_mode_from_string(value);
    else if (key == "depth") cfg.depth = static_cast<int32_t>(parse_int(value, key));
    else if (key == "bpr_on_sigmoid") cfg.bpr_on_sigmoid = parse_int(value, key) != 0;
    else if (key == "renorm_attention") cfg.renorm_attention = parse_int(value, key) != 0;
    else if (key == "init_scale") cfg.init_scale = parse_double(value, key);
    else return false;
    return true;
}

TrainConfig train_config_from_kv(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed config line: '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (!apply_train_config_kv(cfg, key, value)) {
            throw ConfigError("unknown train config key: '" + key + "'");
        }
    }
    return cfg;
}

void ParamStore::touch_user(int32_t u) {
    auto idx = static_cast<size_t>(u);
    if (!user_touched_mask[idx]) {
        user_touched_mask[idx] = 1;
        touched_users.push_back(u);
    }
}

void ParamStore::touch_item(int32_t i) {
    auto idx = static_cast<size_t>(i);
    if (!item_touched_mask[idx]) {
        item_touched_mask[idx] = 1;
        touched_items.push_back(i);
    }
}

void ParamStore::touch_relation(int32_t r) {
    auto idx = static_cast<size_t>(r);
    if (!relation_touched_mask[idx]) {
        relation_touched_mask[idx] = 1;
        touched_relations.push_back(r);
    }
}

void ParamStore::zero_grads() {
    user_grad.fill(0.0);
    item_grad.fill(0.0);
    relation_grad.fill(0.0);
    std::fill(sampler_w_grad.begin(), sampler_w_grad.end(), 0.0);
    sampler_b_grad = 0.0;
    agg_w_grad.fill(0.0);
    std::fill(agg_b_grad.begin(), agg_b_grad.end(), 0.0);
    for (int32_t u : touched_users) user_touched_mask[static_cast<size_t>(u)] = 0;
    for (int32_t i : touched_items) item_touched_mask[static_cast<size_t>(i)] = 0;
    for (int32_t r : touched_relations) relation_touched_mask[static_cast<size_t>(r)] = 0;
    touched_users.clear();
    touched_items.clear();
    touched_relations.clear();
    shared_touched = false;
}

double ParamStore::l2_touched() const {
    double s = 0.0;
    for (int32_t u : touched_users) {
        for (double v : user_emb.row(static_cast<size_t>(u))) s += v * v;
    }
    for (int32_t i : touched_items) {
        for (double v : item_emb.row(static_cast<size_t>(i))) s += v * v;
    }
    for (int32_t r : touched_relations) {
        for (double v : relation_emb.row(static_cast<size_t>(r))) s += v * v;
    }
    if (shared_touched) {
        for (double v : sampler_w) s += v * v;
        s += sampler_b * sampler_b;
        for (double v : agg_w.data) s += v * v;
        for (double v : agg_b) s += v * v;
    }
    return s;
}

void ParamStore::add_l2_grads(double lambda) {
    if (lambda == 0.0) return;
    const double c = 2.0 * lambda;
    for (int32_t u : touched_users) axpy(c, user_emb.row(static_cast<size_t>(u)), user_grad.row(static_cast<size_t>(u)));
    for (int32_t i : touched_items) axpy(c, item_emb.row(static_cast<size_t>(i)), item_grad.row(static_cast<size_t>(i)));
    for (int32_t r : touched_relations)
        axpy(c, relation_emb.row(static_cast<size_t>(r)), relation_grad.row(static_cast<size_t>(r)));
    if (shared_touched) {
        axpy(c, std::span<const double>(sampler_w), std::span<double>(sampler_w_grad));
        sampler_b_grad += c * sampler_b;
        axpy(c, std::span<const double>(agg_w.data), std::span<double>(agg_w_grad.data));
        axpy(c, std::span<const double>(agg_b), std::span<double>(agg_b_grad));
    }
}

std::vector<TensorView> ParamStore::tensor_views() {
    return {
        {"user_emb", std::span<double>(user_emb.data), std::span<double>(user_grad.data)},
        {"item_emb", std::span<double>(item_emb.data), std::span<double>(item_grad.data)},
        {"relation_emb", std::span<double>(relation_emb.data), std::span<double>(relation_grad.data)},
        {"sampler_w", std::span<double>(sampler_w), std::span<double>(sampler_w_grad)},
        {"sampler_b", std::span<double>(&sampler_b, 1), std::span<double>(&sampler_b_grad, 1)},
        {"agg_w", std::span<double>(agg_w.data), std::span<double>(agg_w_grad.data)},
        {"agg_b", std::span<double>(agg_b), std::span<double>(agg_b_grad)},
    };
}

bool ParamStore::values_finite() const {
    return all_finite(user_emb.data) && all_finite(item_emb.data) && all_finite(relation_emb.data) &&
           all_finite(sampler_w) && std::isfinite(sampler_b) && all_finite(agg_w.data) &&
           all_finite(agg_b);
}

ParamStore init_params(int32_t num_users, int32_t num_items, int32_t num_relations, int32_t dim,
                       uint64_t seed, double scale) {
    if (!(scale > 0.0)) throw ConfigError("init scale must be > 0");
    ParamStore p;
    p.num_users = num_users;
    p.num_items = num_items;
    p.num_relations = num_relations;
    p.dim = dim;
    auto d = static_cast<size_t>(dim);
    p.user_emb = Matrix(static_cast<size_t>(num_users), d);
    p.item_emb = Matrix(static_cast<size_t>(num_items), d);
    p.relation_emb = Matrix(static_cast<size_t>(num_relations), d);
    p.user_grad = p.user_emb;
    p.item_grad = p.item_emb;
    p.relation_grad = p.relation_emb;
    p.sampler_w.assign(2 * d, 0.0);
    p.sampler_w_grad.assign(2 * d, 0.0);
    p.agg_w = Matrix(d, d);
    p.agg_w_grad = Matrix(d, d);
    p.agg_b.assign(d, 0.0);
    p.agg_b_grad.assign(d, 0.0);
    p.user_touched_mask.assign(static_cast<size_t>(num_users), 0);
    p.item_touched_mask.assign(static_cast<size_t>(num_items), 0);
    p.relation_touched_mask.assign(static_cast<size_t>(num_relations), 0);

    std::mt19937_64 prng(rng::mix({seed, rng::kInitSalt}));
    auto fill = [&](std::span<double> x) {
        for (double& v : x) v = scale * (2.0 * rng::uniform01(prng) - 1.0);
    };
    fill(p.user_emb.data);
    fill(p.item_emb.data);
    fill(p.relation_emb.data);
    fill(p.sampler_w);
    fill(std::span<double>(&p.sampler_b, 1));
    fill(p.agg_w.data);
    fill(p.agg_b);
    return p;
}

namespace {

void check_grad_finite(const char* name, std::span<const double> grad) {
    for (double v : grad) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite gradient in ") + name);
    }
}

}  // namespace

void sgd_step(ParamStore& p, double lr, double lambda) {
    auto update_row = [&](Matrix& value, Matrix& grad, int32_t row, const char* name) {
        auto v = value.row(static_cast<size_t>(row));
        auto g = grad.row(static_cast<size_t>(row));
        check_grad_finite(name, g);
        for (size_t j = 0; j < v.size(); ++j) v[j] -= lr * (g[j] + 2.0 * lambda * v[j]);
    };
    for (int32_t u : p.touched_users) update_row(p.user_emb, p.user_grad, u, "user_emb");
    for (int32_t i : p.touched_items) update_row(p.item_emb, p.item_grad, i, "item_emb");
    for (int32_t r : p.touched_relations) update_row(p.relation_emb, p.relation_grad, r, "relation_emb");
    if (p.shared_touched) {
        check_grad_finite("sampler_w", p.sampler_w_grad);
        for (size_t j = 0; j < p.sampler_w.size(); ++j)
            p.sampler_w[j] -= lr * (p.sampler_w_grad[j] + 2.0 * lambda * p.sampler_w[j]);
        if (!std::isfinite(p.sampler_b_grad)) throw NumericError("non-finite gradient in sampler_b");
        p.sampler_b -= lr * (p.sampler_b_grad + 2.0 * lambda * p.sampler_b);
        check_grad_finite("agg_w", p.agg_w_grad.data);
        for (size_t j = 0; j < p.agg_w.data.size(); ++j)
            p.agg_w.data[j] -= lr * (p.agg_w_grad.data[j] + 2.0 * lambda * p.agg_w.data[j]);
        check_grad_finite("agg_b", p.agg_b_grad);
        for (size_t j = 0; j < p.agg_b.size(); ++j)
            p.agg_b[j] -= lr * (p.agg_b_grad[j] + 2.0 * lambda * p.agg_b[j]);
    }
    p.zero_grads();
}

AdamState make_adam_state(const ParamStore& p) {
    AdamState s;
    auto d = static_cast<size_t>(p.dim);
    s.m_user = Matrix(p.user_emb.rows, d);
    s.v_user = s.m_user;
    s.m_item = Matrix(p.item_emb.rows, d);
    s.v_item = s.m_item;
    s.m_rel = Matrix(p.relation_emb.rows, d);
    s.v_rel = s.m_rel;
    s.m_w.assign(2 * d, 0.0);
    s.v_w.assign(2 * d, 0.0);
    s.m_aw = Matrix(d, d);
    s.v_aw = s.m_aw;
    s.m_ab.assign(d, 0.0);
    s.v_ab.assign(d, 0.0);
    return s;
}

void adam_step(ParamStore& p, AdamState& s, double lr, double lambda) {
    s.step += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    auto update = [&](std::span<double> v, std::span<const double> g, std::span<double> m,
                      std::span<double> vv, const char* name) {
        check_grad_finite(name, g);
        for (size_t j = 0; j < v.size(); ++j) {
            double gj = g[j] + 2.0 * lambda * v[j];
            m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * gj;
            vv[j] = s.beta2 * vv[j] + (1.0 - s.beta2) * gj * gj;
            v[j] -= lr * (m[j] / bc1) / (std::sqrt(vv[j] / bc2) + s.eps);
        }
    };
    for (int32_t u : p.touched_users) {
        auto r = static_cast<size_t>(u);
        update(p.user_emb.row(r), p.user_grad.row(r), s.m_user.row(r), s.v_user.row(r), "user_emb");
    }
    for (int32_t i : p.touched_items) {
        auto r = static_cast<size_t>(i);
        update(p.item_emb.row(r), p.item_grad.row(r), s.m_item.row(r), s.v_item.row(r), "item_emb");
    }
    for (int32_t rel : p.touched_relations) {
        auto r = static_cast<size_t>(rel);
        update(p.relation_emb.row(r), p.relation_grad.row(r), s.m_rel.row(r), s.v_rel.row(r), "relation_emb");
    }
    if (p.shared_touched) {
        update(p.sampler_w, p.sampler_w_grad, s.m_w, s.v_w, "sampler_w");
        update(std::span<double>(&p.sampler_b, 1), std::span<const double>(&p.sampler_b_grad, 1),
               std::span<double>(&s.m_b, 1), std::span<double>(&s.v_b, 1), "sampler_b");
        update(p.agg_w.data, p.agg_w_grad.data, s.m_aw.data, s.v_aw.data, "agg_w");
        update(p.agg_b, p.agg_b_grad, s.m_ab, s.v_ab, "agg_b");
    }
    p.zero_grads();
}

namespace {

constexpr uint32_t kCheckpointMagic = 0x44534B31;  // "DSK1"
constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated checkpoint file");
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params, const TrainConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw DataError("cannot write checkpoint: " + path);
    write_pod(out, kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    std::string cfg_text = train_config_to_kv(cfg);
    uint64_t cfg_len = cfg_text.size();
    write_pod(out, cfg_len);
    out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
    auto views = const_cast<ParamStore&>(params).tensor_views();
    uint32_t n_tensors = static_cast<uint32_t>(views.size());
    write_pod(out, n_tensors);
    struct Shape { uint64_t rows, cols; };
    auto d = static_cast<uint64_t>(params.dim);
    std::vector<Shape> shapes = {
        {static_cast<uint64_t>(params.num_users), d},
        {static_cast<uint64_t>(params.num_items), d},
        {static_cast<uint64_t>(params.num_relations), d},
        {1, 2 * d},
        {1, 1},
        {d, d},
        {1, d},
    };
    for (size_t t = 0; t < views.size(); ++t) {
        uint8_t name_len = static_cast<uint8_t>(std::strlen(views[t].name));
        write_pod(out, name_len);
        out.write(views[t].name, name_len);
        write_pod(out, shapes[t].rows);
        write_pod(out, shapes[t].cols);
        out.write(reinterpret_cast<const char*>(views[t].value.data()),
                  static_cast<std::streamsize>(views[t].value.size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

std::pair<ParamStore, TrainConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw DataError("cannot open checkpoint: " + path);
    uint32_t magic = 0, version = 0;
    read_pod(in, magic);
    read_pod(in, version);
    if (magic != kCheckpointMagic) throw DataError("not a checkpoint file: " + path);
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    uint64_t cfg_len = 0;
    read_pod(in, cfg_len);
    std::string cfg_text(cfg_len, '\0');
    in.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
    if (!in) throw DataError("truncated checkpoint file");
    TrainConfig cfg = train_config_from_kv(cfg_text);

    uint32_t n_tensors = 0;
    read_pod(in, n_tensors);
    if (n_tensors != 7) throw DataError("unexpected tensor count in checkpoint");

    struct Loaded { std::string name; uint64_t rows, cols; std::vector<double> data; };
    std::vector<Loaded> tensors;
    for (uint32_t t = 0; t < n_tensors; ++t) {
        uint8_t name_len = 0;
        read_pod(in, name_len);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        Loaded l;
        l.name = name;
        read_pod(in, l.rows);
        read_pod(in, l.cols);
        l.data.resize(l.rows * l.cols);
        in.read(reinterpret_cast<char*>(l.data.data()),
                static_cast<std::streamsize>(l.data.size() * sizeof(double)));
        if (!in) throw DataError("truncated checkpoint file");
        tensors.push_back(std::move(l));
    }

    const auto& ue = tensors[0];
    const auto& ie = tensors[1];
    const auto& re = tensors[2];
    if (ue.name != "user_emb" || ie.name != "item_emb" || re.name != "relation_emb") {
        throw DataError("unexpected tensor layout in checkpoint");
    }
    ParamStore p = init_params(static_cast<int32_t>(ue.rows), static_cast<int32_t>(ie.rows),
                               static_cast<int32_t>(re.rows), static_cast<int32_t>(ue.cols),
                               /*seed=*/0, /*scale=*/1.0);
    auto views = p.tensor_views();
    for (size_t t = 0; t < views.size(); ++t) {
        if (tensors[t].name != views[t].name) throw DataError("unexpected tensor layout in checkpoint");
        if (tensors[t].data.size() != views[t].value.size()) {
            throw DataError("tensor shape mismatch in checkpoint for " + tensors[t].name);
        }
        std::copy(tensors[t].data.begin(), tensors[t].data.end(), views[t].value.begin());
    }
    p.zero_grads();
    return {std::move(p), cfg};
}

}  // namespace dskreg
