#pragma once

#include <filesystem>
#include <string>

#include "shiftuq/config.hpp"

namespace fixture {

/// Seconds-scale experiment: small data, small pools, few epochs.
inline shiftuq::harness::ExperimentConfig tiny_config(const std::string& kind = "tails") {
    auto cfg = shiftuq::harness::config_from_text(R"(
seed = 5
n_models_trained = 4
n_models_selected = 2
n_repeats = 2
ensemble_m = 3
ece_points = 9
[model]
hidden = [16]
feature_dim = 6
[train]
epochs = 4
[dataset.d]
kind = ")" + kind + R"("
n_train = 300
n_val = 100
n_test = 300
seed = 3
)");
    return cfg;
}

inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("shiftuq_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fixture
