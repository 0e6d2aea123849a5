#include "dskreg/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "dskreg/model.hpp"
#include "dskreg/rng.hpp"
#include "dskreg/synthetic.hpp"

namespace fs = std::filesystem;

namespace dskreg {

namespace {

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw DataError("missing " + what + ": " + path);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("failed writing file: " + path);
}

std::string run_dir(const ExperimentConfig& cfg, const std::string& command) {
    return (fs::path(cfg.workdir) / (command + "-s" + std::to_string(cfg.train.seed))).string();
}

void prepare_run_dir(const std::string& dir, const ExperimentConfig& cfg) {
    fs::create_directories(dir);
    write_text_file((fs::path(dir) / "config.effective").string(), serialize_config(cfg));
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string preprocess_dir(const ExperimentConfig& cfg) { return run_dir(cfg, "preprocess"); }
std::string train_dir(const ExperimentConfig& cfg) { return run_dir(cfg, "train"); }
std::string evaluate_dir(const ExperimentConfig& cfg) { return run_dir(cfg, "evaluate"); }
std::string ablate_dir(const ExperimentConfig& cfg) { return run_dir(cfg, "ablate"); }

AssembledData assemble_data(const ExperimentConfig& cfg) {
    require_file(cfg.interactions, "interactions file");
    require_file(cfg.triples, "triples file");
    AssembledData data;
    data.interactions = load_interactions(cfg.interactions);
    std::unordered_set<std::string> item_raw(data.interactions.items.names().begin(),
                                             data.interactions.items.names().end());
    data.kg = load_triples(cfg.triples, &item_raw);
    auto entity_to_item = map_entities_to_items(data.kg, data.interactions);
    data.co = build_cograph(data.kg, entity_to_item, data.interactions.num_items(), cfg.degree_cap);
    data.split = split_interactions(data.interactions, cfg.split_fraction, cfg.train.seed);
    data.rg = unify(data.co, data.split.train);
    return data;
}

void cmd_synth(const ExperimentConfig& cfg) {
    if (cfg.triples.empty() || cfg.interactions.empty()) {
        throw ConfigError("synth requires triples= and interactions= output paths");
    }
    if (auto parent = fs::path(cfg.triples).parent_path(); !parent.empty()) fs::create_directories(parent);
    if (auto parent = fs::path(cfg.interactions).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    write_synthetic_dataset(cfg.synth, cfg.triples, cfg.interactions);
    std::cout << "synthetic dataset written to " << cfg.triples << " and " << cfg.interactions << "\n";
}

void cmd_preprocess(const ExperimentConfig& cfg) {
    cfg.validate();
    AssembledData data = assemble_data(cfg);
    const std::string dir = preprocess_dir(cfg);
    prepare_run_dir(dir, cfg);
    auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };

    write_id_map(data.kg.entities, p("entities.map"));
    write_id_map(data.kg.relations, p("relations.map"));
    write_id_map(data.interactions.users, p("users.map"));
    write_id_map(data.interactions.items, p("items.map"));
    write_cograph_tsv(data.co, data.interactions.items, p("cograph.tsv"));
    write_co_relations_map(data.co, p("co_relations.map"));
    write_interactions_tsv(data.split.train, p("split.train.tsv"));
    write_interactions_tsv(data.split.test, p("split.test.tsv"));

    std::ostringstream stats;
    stats << "neighbors\titems\n";
    for (const auto& [len, count] : degree_stats(data.rg)) {
        stats << len << '\t' << count << '\n';
    }
    write_text_file(p("degree_stats.tsv"), stats.str());

    std::cout << "preprocess: " << data.interactions.num_users() << " users, "
              << data.interactions.num_items() << " items, " << data.interactions.num_edges()
              << " interactions; KG " << data.kg.num_entities() << " entities, "
              << data.kg.num_relations() << " relations, " << data.kg.num_triples() << " triples; "
              << data.co.num_directed_edges() / 2 << " co-edges\n";
}

void cmd_train(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string pre = preprocess_dir(cfg);
    require_file((fs::path(pre) / "split.train.tsv").string(), "preprocess artifact (run preprocess first)");
    AssembledData data = assemble_data(cfg);

    const std::string dir = train_dir(cfg);
    prepare_run_dir(dir, cfg);
    const std::string ckpt_path = (fs::path(dir) / "checkpoint.bin").string();
    const std::string log_path = (fs::path(dir) / "train.log.tsv").string();

    ParamStore params = init_params(data.rg.num_users, data.rg.num_items, data.rg.num_relation_rows(),
                                    cfg.train.dim, cfg.train.seed, cfg.train.init_scale);
    AdamState adam = make_adam_state(params);
    save_checkpoint(ckpt_path, params, cfg.train);

    std::ostringstream log;
    log << "epoch\tloss\ttau\n";
    write_text_file(log_path, log.str());

    for (int32_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const double loss = train_epoch(data.rg, data.split.train, params, cfg.train, epoch, &adam);
        const double tau = cfg.train.tau_at(epoch);
        log << epoch << '\t' << format_double(loss) << '\t' << format_double(tau) << '\n';
        write_text_file(log_path, log.str());
        save_checkpoint(ckpt_path, params, cfg.train);
        std::cout << "epoch " << epoch << " loss " << format_double(loss) << " tau "
                  << format_double(tau) << " wall_ms " << elapsed_ms(start) << "\n";
        if (!params.values_finite()) {
            throw NumericError("parameters diverged after epoch " + std::to_string(epoch));
        }
    }
}

MetricTable cmd_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    cfg.validate();
    const std::string ckpt =
        checkpoint_path.empty() ? (fs::path(train_dir(cfg)) / "checkpoint.bin").string() : checkpoint_path;
    require_file(ckpt, "checkpoint");
    auto [params, train_cfg] = load_checkpoint(ckpt);

    AssembledData data = assemble_data(cfg);
    if (params.num_users != data.rg.num_users || params.num_items != data.rg.num_items ||
        params.num_relations != data.rg.num_relation_rows()) {
        throw DataError("checkpoint dimensions do not match the dataset (users/items/relations " +
                        std::to_string(params.num_users) + "/" + std::to_string(params.num_items) + "/" +
                        std::to_string(params.num_relations) + " vs " + std::to_string(data.rg.num_users) +
                        "/" + std::to_string(data.rg.num_items) + "/" +
                        std::to_string(data.rg.num_relation_rows()) + ")");
    }

    MetricTable table = evaluate(data.split, data.rg, params, train_cfg, cfg.eval_ns,
                                 cfg.eval_user_sample, cfg.train.seed);
    const std::string dir = evaluate_dir(cfg);
    prepare_run_dir(dir, cfg);
    write_text_file((fs::path(dir) / "metrics.tsv").string(), table.to_tsv());
    write_text_file((fs::path(dir) / "metrics.txt").string(), table.to_text());
    std::cout << table.to_text();
    return table;
}

void cmd_ablate(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string pre = preprocess_dir(cfg);
    require_file((fs::path(pre) / "split.train.tsv").string(), "preprocess artifact (run preprocess first)");
    AssembledData data = assemble_data(cfg);

    const std::string dir = ablate_dir(cfg);
    prepare_run_dir(dir, cfg);

    std::ostringstream report;
    report << "strategy\tk\tn_seeds\trecall20_mean\trecall20_std\trecall20_per_seed\n";
    for (const std::string& strategy_name : cfg.ablate_strategies) {
        const Strategy strategy = strategy_from_string(strategy_name);
        for (int32_t k : cfg.ablate_ks) {
            std::vector<double> recalls;
            for (int32_t s = 0; s < cfg.ablate_seeds; ++s) {
                TrainConfig cell_cfg = cfg.train;
                cell_cfg.strategy = strategy;
                cell_cfg.k = k;
                cell_cfg.seed = cfg.train.seed + static_cast<uint64_t>(s);

                const std::string cell_name =
                    strategy_name + "-K" + std::to_string(k) + "-s" + std::to_string(cell_cfg.seed);
                const std::string cell_dir = (fs::path(dir) / "cells" / cell_name).string();
                fs::create_directories(cell_dir);

                ParamStore params =
                    init_params(data.rg.num_users, data.rg.num_items, data.rg.num_relation_rows(),
                                cell_cfg.dim, cell_cfg.seed, cell_cfg.init_scale);
                AdamState adam = make_adam_state(params);
                std::ostringstream cell_log;
                cell_log << "epoch\tloss\ttau\n";
                for (int32_t epoch = 0; epoch < cell_cfg.epochs; ++epoch) {
                    const double loss =
                        train_epoch(data.rg, data.split.train, params, cell_cfg, epoch, &adam);
                    cell_log << epoch << '\t' << format_double(loss) << '\t'
                             << format_double(cell_cfg.tau_at(epoch)) << '\n';
                }
                write_text_file((fs::path(cell_dir) / "train.log.tsv").string(), cell_log.str());

                MetricTable table = evaluate(data.split, data.rg, params, cell_cfg, {20},
                                             cfg.eval_user_sample, cell_cfg.seed);
                write_text_file((fs::path(cell_dir) / "metrics.tsv").string(), table.to_tsv());
                recalls.push_back(table.recall_at_n(20));
                std::cout << "ablate cell " << cell_name << " recall@20 "
                          << format_double(recalls.back()) << "\n";
            }
            double mean = 0.0;
            for (double r : recalls) mean += r;
            mean /= static_cast<double>(recalls.size());
            double var = 0.0;
            for (double r : recalls) var += (r - mean) * (r - mean);
            const double stddev =
                recalls.size() > 1 ? std::sqrt(var / static_cast<double>(recalls.size() - 1)) : 0.0;
            report << strategy_name << '\t' << k << '\t' << recalls.size() << '\t' << format_double(mean)
                   << '\t' << format_double(stddev) << '\t';
            for (size_t i = 0; i < recalls.size(); ++i) {
                report << (i ? "," : "") << format_double(recalls[i]);
            }
            report << '\n';
        }
    }
    write_text_file((fs::path(dir) / "ablation.tsv").string(), report.str());
}

}  // namespace dskreg
