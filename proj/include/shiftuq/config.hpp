#pragma once

// Experiment configuration and the method registry.
//
// Config files use a TOML-shaped subset: `key = value` lines, `[table]` and
// `[table.name]` headers, `#` comments, strings, numbers, booleans and
// single-line arrays.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "shiftuq/nn.hpp"
#include "shiftuq/selective.hpp"
#include "shiftuq/synthbench.hpp"

namespace shiftuq::harness {

/// Bad user input (flags, config contents, missing files): CLI exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class MethodKind {
    ConformalPrediction,
    Ensemble,
    Gaussian,
    GaussianEnsemble,
    QuantileRegression,
    GaussSelGmm,
    GaussSelKnn,
    GaussSelVariance,
    GaussEnsSelGmm,
    GaussEnsSelEnsVariance,
};

struct MethodId {
    MethodKind kind = MethodKind::Gaussian;
    std::size_t gmm_k = 4;
    std::size_t knn_k = 10;
    selective::KnnMetric knn_metric = selective::KnnMetric::Cosine;

    /// Registry name, with a variation suffix when a selective parameter
    /// differs from its default, e.g. "gauss_sel_knn:k=20,metric=l2".
    std::string name() const;
    nn::Head head() const noexcept;
    bool selective() const noexcept;
    bool ensemble() const noexcept;

    friend bool operator==(const MethodId&, const MethodId&) = default;
};

std::string base_name(MethodKind kind);
/// Accepts registry names with optional ":k=..,metric=.." variations.
MethodId method_from_string(const std::string& text);
/// The ten evaluated methods in registry order.
std::vector<MethodId> all_methods();
/// Conformal, Ensemble, Gaussian, Gaussian Ensemble, Quantile Regression.
std::vector<MethodId> non_selective_methods();

struct DatasetSource {
    std::string id;
    std::optional<synth::ShiftSpec> synthetic;
    std::optional<std::filesystem::path> csv;
    synth::CsvSchema schema;
};

struct ExperimentConfig {
    std::vector<DatasetSource> datasets;
    std::vector<MethodId> methods = all_methods();
    double alpha = 0.1;
    std::size_t n_models_trained = 20;
    std::size_t n_models_selected = 5;
    std::size_t n_repeats = 5;
    std::size_t ensemble_M = 5;
    double threshold_quantile = 0.95;
    std::size_t ece_points = 99;
    /// input_dim is taken from each dataset.
    nn::Architecture architecture;
    nn::TrainHyper hyper;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "results";
    bool save_checkpoints = false;
    /// Verbatim config text, echoed into results.json.
    std::string source_text;

    void validate() const;
    /// CI preset: 8 trained / 3 selected / 3 repeats and 1000/200/1000
    /// synthetic datasets.
    void apply_small();
};

using ConfigScalar = std::variant<bool, double, std::string>;
using ConfigValue = std::variant<bool, double, std::string, std::vector<ConfigScalar>>;
/// table name ("" for the root) -> key -> value
using ConfigTables = std::map<std::string, std::map<std::string, ConfigValue>>;

ConfigTables parse_config_text(const std::string& text);
ExperimentConfig config_from_text(const std::string& text);
/// Throws ConfigError naming the path when the file cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace shiftuq::harness
