#pragma once

#include <string>

#include "dskreg/cograph.hpp"
#include "dskreg/config.hpp"
#include "dskreg/graph.hpp"
#include "dskreg/metrics.hpp"

namespace dskreg {

// Everything built from the raw inputs for one experiment: graphs, split and
// the unified relational graph over the training interactions.
struct AssembledData {
    KnowledgeGraph kg;
    InteractionGraph interactions;
    DatasetSplit split;
    CoGraph co;
    RelationalGraph rg;
};

AssembledData assemble_data(const ExperimentConfig& cfg);

// Run directories are derived from the command and seed so a rerun with the
// same config lands on (and must byte-identically reproduce) the same files.
std::string preprocess_dir(const ExperimentConfig& cfg);
std::string train_dir(const ExperimentConfig& cfg);
std::string evaluate_dir(const ExperimentConfig& cfg);
std::string ablate_dir(const ExperimentConfig& cfg);

// Commands; each writes `config.effective` plus its fixed artifact set into
// its run directory and throws Config/Data/NumericError on failure.
void cmd_synth(const ExperimentConfig& cfg);
void cmd_preprocess(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
MetricTable cmd_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path = "");
void cmd_ablate(const ExperimentConfig& cfg);

}  // namespace dskreg
