#pragma once

#include <string>
#include <vector>

#include "dskreg/params.hpp"
#include "dskreg/synthetic.hpp"

namespace dskreg {

// Flat key=value experiment configuration. '#' starts a comment line; CLI
// --set key=value pairs override file values; --seed overrides the seed.
// serialize() emits every key sorted with full-precision numbers, so the
// written config.effective reproduces the run exactly.
struct ExperimentConfig {
    std::string triples;
    std::string interactions;
    std::string workdir = "runs";

    TrainConfig train;

    double split_fraction = 0.2;
    std::vector<int32_t> eval_ns = {5, 10, 20};
    int32_t eval_user_sample = 0;  // 0 = all eligible test users
    int32_t degree_cap = 0;        // 0 = unlimited

    std::vector<std::string> ablate_strategies = {"uniform", "l2", "inner", "gs"};
    std::vector<int32_t> ablate_ks = {2, 4, 8, 16, 32};
    int32_t ablate_seeds = 5;

    SyntheticConfig synth;

    void validate() const;  // throws ConfigError
    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace dskreg
