#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dskreg/experiment.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    int64_t seed = -1;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file (key=value lines)");
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set lr=0.05 (repeatable)");
    cmd->add_option("--seed", args.seed, "override the experiment seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

dskreg::ExperimentConfig build_config(const CommonArgs& args) {
    dskreg::ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = dskreg::load_config_file(args.config_path);
    for (const std::string& kv : args.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw dskreg::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        dskreg::apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed_set) cfg.train.seed = static_cast<uint64_t>(args.seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DSKReG experiment driver: knowledge-graph recommendation with "
                 "differentiable top-K neighbor sampling"};
    app.require_subcommand(1);

    CommonArgs synth_args, pre_args, train_args, eval_args, ablate_args;
    std::string checkpoint_path;

    CLI::App* synth = app.add_subcommand("synth", "generate the planted-relevance synthetic dataset");
    add_common(synth, synth_args);
    CLI::App* pre = app.add_subcommand("preprocess", "build ID maps, co-graph, split and stats");
    add_common(pre, pre_args);
    CLI::App* train = app.add_subcommand("train", "train and write checkpoint + per-epoch log");
    add_common(train, train_args);
    CLI::App* eval = app.add_subcommand("evaluate", "rank the catalog per test user and emit metrics");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate (default: the train run's)");
    CLI::App* ablate = app.add_subcommand("ablate", "sweep sampling strategies and neighbor sizes");
    add_common(ablate, ablate_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) dskreg::cmd_synth(build_config(synth_args));
        if (pre->parsed()) dskreg::cmd_preprocess(build_config(pre_args));
        if (train->parsed()) dskreg::cmd_train(build_config(train_args));
        if (eval->parsed()) dskreg::cmd_evaluate(build_config(eval_args), checkpoint_path);
        if (ablate->parsed()) dskreg::cmd_ablate(build_config(ablate_args));
    } catch (const dskreg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const dskreg::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const dskreg::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
