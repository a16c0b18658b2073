#pragma once

#include <string>
#include <vector>

#include "sharplab/data.hpp"
#include "sharplab/network.hpp"
#include "sharplab/robustness.hpp"

namespace sharplab {

/// Whole-run configuration, parsed from an INI-style key=value file with
/// [section] headers. Unknown sections or keys are rejected.
struct RunConfig {
    DatasetSpec dataset;
    TrainConfig train;
    AttackConfig attack;
    std::vector<double> scales = {0.25, 0.5, 1.0, 2.5, 5.0, 10.0, 50.0};
    double certify_epsilon = 0.1;
    double take_off_tau = 0.1;
    std::size_t detector_folds = 5;
    std::vector<std::size_t> hidden_dims = {16, 16};
    std::string out_dir = "out";
    std::uint64_t seed = 0;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Plain-text echo of the configuration for the run manifest.
std::string config_to_text(const RunConfig& cfg);

std::vector<double> parse_double_list(const std::string& s);

}  // namespace sharplab
