#pragma once

#include <string>

#include "cpmoe/dataset.hpp"
#include "cpmoe/model.hpp"
#include "cpmoe/trainer.hpp"

namespace cpmoe {

// Whole-run settings from one flat key=value file. The model's window and
// vocabulary fields are synced from the data section so each fact has exactly
// one key; validation reports every problem at once.
struct RunConfig {
    data::DatasetConfig data;
    model::ModelConfig model;
    train::TrainConfig training;
};

void validate_run_config(const RunConfig& c);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Every key with its effective value; parsing the dump reproduces the config.
std::string dump_run_config(const RunConfig& c);

}  // namespace cpmoe
