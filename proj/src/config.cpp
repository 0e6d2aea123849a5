#include "dskreg/config.hpp"

#include <fstream>
#include <sstream>

#include "dskreg/errors.hpp"

namespace dskreg {

namespace {

std::vector<int32_t> parse_int_list(const std::string& value, const std::string& context) {
    std::vector<int32_t> out;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        out.push_back(static_cast<int32_t>(parse_int(part, context)));
    }
    if (out.empty()) throw ConfigError("empty list for " + context);
    return out;
}

std::vector<std::string> parse_string_list(const std::string& value, const std::string& context) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) out.push_back(part);
    }
    if (out.empty()) throw ConfigError("empty list for " + context);
    return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::ostringstream out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out << ',';
        out << values[i];
    }
    return out.str();
}

}  // namespace

void ExperimentConfig::validate() const {
    train.validate();
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw ConfigError("split_fraction must lie in (0, 1)");
    }
    if (eval_ns.empty()) throw ConfigError("eval_ns must not be empty");
    for (int32_t n : eval_ns) {
        if (n < 1) throw ConfigError("eval_ns entries must be >= 1");
    }
    if (eval_user_sample < 0) throw ConfigError("eval_user_sample must be >= 0");
    if (degree_cap < 0) throw ConfigError("degree_cap must be >= 0");
    if (ablate_seeds < 1) throw ConfigError("ablate_seeds must be >= 1");
    for (const std::string& s : ablate_strategies) strategy_from_string(s);
    for (int32_t k : ablate_ks) {
        if (k < 1) throw ConfigError("ablate_ks entries must be >= 1");
    }
}

void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (apply_train_config_kv(cfg.train, key, value)) return;
    if (key == "triples") cfg.triples = value;
    else if (key == "interactions") cfg.interactions = value;
    else if (key == "workdir") cfg.workdir = value;
    else if (key == "split_fraction") cfg.split_fraction = parse_double(value, key);
    else if (key == "eval_ns") cfg.eval_ns = parse_int_list(value, key);
    else if (key == "eval_user_sample") cfg.eval_user_sample = static_cast<int32_t>(parse_int(value, key));
    else if (key == "degree_cap") cfg.degree_cap = static_cast<int32_t>(parse_int(value, key));
    else if (key == "ablate_strategies") cfg.ablate_strategies = parse_string_list(value, key);
    else if (key == "ablate_ks") cfg.ablate_ks = parse_int_list(value, key);
    else if (key == "ablate_seeds") cfg.ablate_seeds = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_users") cfg.synth.users = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_items") cfg.synth.items = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_clusters") cfg.synth.clusters = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_relevant_relations")
        cfg.synth.relevant_relations = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_noise_relations")
        cfg.synth.noise_relations = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_relevant_group")
        cfg.synth.relevant_group = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_noise_group") cfg.synth.noise_group = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_noise_membership") cfg.synth.noise_membership = parse_double(value, key);
    else if (key == "synth_interactions_per_user")
        cfg.synth.interactions_per_user = static_cast<int32_t>(parse_int(value, key));
    else if (key == "synth_cross_prob") cfg.synth.cross_cluster_prob = parse_double(value, key);
    else if (key == "synth_seed") cfg.synth.seed = static_cast<uint64_t>(parse_int(value, key));
    else throw ConfigError("unknown config key: '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                              line + "'");
        }
        apply_config_kv(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "ablate_ks=" << join(cfg.ablate_ks) << '\n';
    out << "ablate_seeds=" << cfg.ablate_seeds << '\n';
    out << "ablate_strategies=" << join(cfg.ablate_strategies) << '\n';
    out << train_config_to_kv(cfg.train);  // keys already sorted within the block
    out << "degree_cap=" << cfg.degree_cap << '\n';
    out << "eval_ns=" << join(cfg.eval_ns) << '\n';
    out << "eval_user_sample=" << cfg.eval_user_sample << '\n';
    out << "interactions=" << cfg.interactions << '\n';
    out << "split_fraction=" << format_double(cfg.split_fraction) << '\n';
    out << "synth_clusters=" << cfg.synth.clusters << '\n';
    out << "synth_cross_prob=" << format_double(cfg.synth.cross_cluster_prob) << '\n';
    out << "synth_interactions_per_user=" << cfg.synth.interactions_per_user << '\n';
    out << "synth_items=" << cfg.synth.items << '\n';
    out << "synth_noise_group=" << cfg.synth.noise_group << '\n';
    out << "synth_noise_membership=" << format_double(cfg.synth.noise_membership) << '\n';
    out << "synth_noise_relations=" << cfg.synth.noise_relations << '\n';
    out << "synth_relevant_group=" << cfg.synth.relevant_group << '\n';
    out << "synth_relevant_relations=" << cfg.synth.relevant_relations << '\n';
    out << "synth_seed=" << cfg.synth.seed << '\n';
    out << "synth_users=" << cfg.synth.users << '\n';
    out << "triples=" << cfg.triples << '\n';
    out << "workdir=" << cfg.workdir << '\n';
    return out.str();
}

}  // namespace dskreg
