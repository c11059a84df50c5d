#pragma once

// Feedforward regressor with a feature layer g(x) and one of three heads,
// trained with Adam. Targets (and inputs) are z-scored with train-split
// statistics; everything returned by the public inference functions is in
// raw target units.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftuq/matrix.hpp"

namespace shiftuq::nn {

enum class Head { Direct, Gaussian, Quantile };
enum class Activation { Tanh, ReLU };

std::string to_string(Head head);
Head head_from_string(const std::string& name);
std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct Architecture {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden{64, 64};
    /// Width of the penultimate (feature) layer. Forced to input_dim when
    /// `hidden` is empty: the model is then linear and g(x) is the input.
    std::size_t feature_dim = 32;
    Head head = Head::Direct;
    Activation activation = Activation::Tanh;

    /// input, hidden..., feature, head outputs
    std::vector<std::size_t> layer_widths() const;
    std::size_t head_outputs() const noexcept { return head == Head::Direct ? 1 : 2; }
    std::size_t parameter_count() const;
    bool is_linear() const noexcept { return hidden.empty(); }
    void validate() const;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct TrainHyper {
    int epochs = 75;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Affine maps applied before the network (inputs) and after it (targets).
struct Standardizer {
    std::vector<double> x_mean;
    std::vector<double> x_scale;
    double y_mean = 0.0;
    double y_scale = 1.0;

    static Standardizer identity(std::size_t input_dim);
    static Standardizer fit(const Matrix& x, std::span<const double> y);

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct TrainedModel {
    Architecture architecture;
    std::vector<double> weights;
    std::vector<double> train_loss_history;
    std::uint64_t seed = 0;
    Standardizer standardizer;
    /// Miscoverage rate the quantile head was trained for (0 for other heads).
    double quantile_alpha = 0.0;

    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

/// Raw-unit head values for a single input plus its feature vector.
struct HeadOutput {
    Head head = Head::Direct;
    /// Direct: f(x). Gaussian: mu(x). Quantile: q_lo(x).
    double first = 0.0;
    /// Direct: unused. Gaussian: sigma^2(x) > 0. Quantile: q_up(x).
    double second = 0.0;
    std::vector<double> feature;

    double prediction() const noexcept { return first; }
    double mu() const noexcept { return first; }
    double sigma2() const noexcept { return second; }
    double q_lo() const noexcept { return first; }
    double q_up() const noexcept { return second; }
};

/// Batched raw-unit outputs: column 0 and 1 follow HeadOutput::first/second.
struct BatchOutput {
    Matrix values;
    Matrix features;
};

/// Glorot-uniform weights (He-uniform for ReLU), zero biases.
TrainedModel init_model(Architecture arch, std::uint64_t seed);

HeadOutput forward(const TrainedModel& model, std::span<const double> x);
BatchOutput forward_batch(const TrainedModel& model, const Matrix& xs, bool with_features = true);
Matrix extract_features(const TrainedModel& model, const Matrix& xs);

/// Per-example loss in the units of `out` and `y`.
/// L2: (y - f)^2. Gaussian: NLL. Quantile: mean pinball loss of the
/// alpha/2 and 1 - alpha/2 quantiles.
double loss(Head head, const HeadOutput& out, double y, double alpha);
double pinball(double tau, double residual) noexcept;

/// Mean loss and its gradient w.r.t. the flat weights on a batch, in the
/// network's standardized space (inputs and targets already transformed).
double batch_loss_gradient(const Architecture& arch, std::span<const double> weights,
                           const Matrix& x_std, std::span<const double> y_std, double alpha,
                           std::vector<double>& grad);

/// Adam on the train split; throws std::runtime_error("training diverged at
/// epoch N") on a non-finite epoch loss.
TrainedModel train(TrainedModel model, const Matrix& x, std::span<const double> y,
                   const TrainHyper& hyper, double alpha = 0.1);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace shiftuq::nn
