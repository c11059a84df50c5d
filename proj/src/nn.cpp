#include "shiftuq/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "shiftuq/kernels.hpp"
#include "shiftuq/statkit.hpp"

namespace shiftuq::nn {

std::string to_string(Head head) {
    switch (head) {
        case Head::Direct: return "direct";
        case Head::Gaussian: return "gaussian";
        case Head::Quantile: return "quantile";
    }
    return "?";
}

Head head_from_string(const std::string& name) {
    if (name == "direct") return Head::Direct;
    if (name == "gaussian") return Head::Gaussian;
    if (name == "quantile") return Head::Quantile;
    throw std::invalid_argument("unknown head '" + name + "'");
}

std::string to_string(Activation act) { return act == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::ReLU;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

std::vector<std::size_t> Architecture::layer_widths() const {
    std::vector<std::size_t> w{input_dim};
    if (!hidden.empty()) {
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(feature_dim);
    }
    w.push_back(head_outputs());
    return w;
}

std::size_t Architecture::parameter_count() const {
    const auto w = layer_widths();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l] * w[l + 1] + w[l + 1];
    return n;
}

void Architecture::validate() const {
    if (input_dim == 0) throw std::invalid_argument("architecture: input_dim must be positive");
    for (auto h : hidden)
        if (h == 0) throw std::invalid_argument("architecture: hidden widths must be positive");
    if (feature_dim == 0) throw std::invalid_argument("architecture: feature_dim must be positive");
    if (hidden.empty() && feature_dim != input_dim)
        throw std::invalid_argument("architecture: a linear model has feature_dim == input_dim");
}

void TrainHyper::validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("train: Adam betas must lie in [0,1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("train: adam_eps must be > 0");
}

Standardizer Standardizer::identity(std::size_t input_dim) {
    return {std::vector<double>(input_dim, 0.0), std::vector<double>(input_dim, 1.0), 0.0, 1.0};
}

Standardizer Standardizer::fit(const Matrix& x, std::span<const double> y) {
    if (x.rows() == 0 || x.rows() != y.size())
        throw std::invalid_argument("standardizer: need matching nonempty inputs and targets");
    Standardizer s;
    const std::size_t n = x.rows(), d = x.cols();
    s.x_mean.assign(d, 0.0);
    s.x_scale.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.x_mean[j] += x(i, j);
    for (auto& m : s.x_mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = x(i, j) - s.x_mean[j];
            s.x_scale[j] += c * c;
        }
    for (auto& v : s.x_scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (!(v > 1e-12)) v = 1.0;
    }
    s.y_mean = stat::mean(y);
    s.y_scale = std::sqrt(stat::population_variance(y));
    if (!(s.y_scale > 1e-12)) s.y_scale = 1.0;
    return s;
}

namespace {

struct Layer {
    std::size_t in, out, w_off, b_off;
};

std::vector<Layer> layout(const Architecture& arch) {
    const auto w = arch.layer_widths();
    std::vector<Layer> layers;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        Layer L{w[l], w[l + 1], off, off + w[l] * w[l + 1]};
        off = L.b_off + L.out;
        layers.push_back(L);
    }
    return layers;
}

void activate(Activation act, double* z, std::size_t n) {
    if (act == Activation::Tanh) {
        kernels::tanh_inplace(z, n);
    } else {
        for (std::size_t i = 0; i < n; ++i) z[i] = z[i] > 0.0 ? z[i] : 0.0;
    }
}

/// Per-layer activations for a batch. acts[0] is the input, acts.back() the head.
struct Workspace {
    std::vector<std::vector<double>> acts;
    std::vector<double> delta, delta_prev, scratch_t;
};

void forward_std(const Architecture& arch, const std::vector<Layer>& layers,
                 std::span<const double> w, const double* x, std::size_t batch, Workspace& ws) {
    ws.acts.resize(layers.size() + 1);
    ws.acts[0].assign(x, x + batch * arch.input_dim);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& L = layers[l];
        auto& out = ws.acts[l + 1];
        out.resize(batch * L.out);
        for (std::size_t i = 0; i < batch; ++i)
            std::copy_n(w.data() + L.b_off, L.out, out.data() + i * L.out);
        kernels::gemm_acc(batch, L.out, L.in, ws.acts[l].data(), w.data() + L.w_off, out.data());
        if (l + 1 < layers.size()) activate(arch.activation, out.data(), out.size());
    }
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// Loss of one example in network space and d loss / d head outputs.
double head_loss_grad(Head head, const double* o, double y, double alpha, double* g) {
    switch (head) {
        case Head::Direct: {
            const double r = o[0] - y;
            g[0] = 2.0 * r;
            return r * r;
        }
        case Head::Gaussian: {
            const double s = o[1];
            const double inv_var = std::exp(-s);
            const double r = y - o[0];
            g[0] = -r * inv_var;
            g[1] = 0.5 - 0.5 * r * r * inv_var;
            return kHalfLog2Pi + 0.5 * s + 0.5 * r * r * inv_var;
        }
        case Head::Quantile: {
            const double tau_lo = alpha / 2.0, tau_up = 1.0 - alpha / 2.0;
            const double u_lo = y - o[0], u_up = y - o[1];
            g[0] = -0.5 * (tau_lo - (u_lo < 0.0 ? 1.0 : 0.0));
            g[1] = -0.5 * (tau_up - (u_up < 0.0 ? 1.0 : 0.0));
            return 0.5 * (pinball(tau_lo, u_lo) + pinball(tau_up, u_up));
        }
    }
    return 0.0;
}

double loss_and_backward(const Architecture& arch, const std::vector<Layer>& layers,
                         std::span<const double> w, const double* x, const double* y,
                         std::size_t batch, double alpha, Workspace& ws, std::vector<double>& grad) {
    forward_std(arch, layers, w, x, batch, ws);
    const std::size_t n_out = arch.head_outputs();
    const auto& head = ws.acts.back();
    ws.delta.assign(batch * n_out, 0.0);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        double g[2] = {0.0, 0.0};
        total += head_loss_grad(arch.head, head.data() + i * n_out, y[i], alpha, g);
        for (std::size_t k = 0; k < n_out; ++k) ws.delta[i * n_out + k] = g[k] * inv_b;
    }

    grad.assign(w.size(), 0.0);
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Layer& L = layers[l];
        const auto& a_in = ws.acts[l];
        ws.scratch_t.resize(L.in * batch);
        kernels::transpose(batch, L.in, a_in.data(), ws.scratch_t.data());
        kernels::gemm_acc(L.in, L.out, batch, ws.scratch_t.data(), ws.delta.data(),
                          grad.data() + L.w_off);
        double* gb = grad.data() + L.b_off;
        for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t k = 0; k < L.out; ++k) gb[k] += ws.delta[i * L.out + k];
        if (l == 0) break;

        ws.scratch_t.resize(L.out * L.in);
        kernels::transpose(L.in, L.out, w.data() + L.w_off, ws.scratch_t.data());
        ws.delta_prev.assign(batch * L.in, 0.0);
        kernels::gemm_acc(batch, L.in, L.out, ws.delta.data(), ws.scratch_t.data(),
                          ws.delta_prev.data());
        for (std::size_t t = 0; t < ws.delta_prev.size(); ++t) {
            const double a = a_in[t];
            ws.delta_prev[t] *= arch.activation == Activation::Tanh ? 1.0 - a * a
                                                                    : (a > 0.0 ? 1.0 : 0.0);
        }
        std::swap(ws.delta, ws.delta_prev);
    }
    return total * inv_b;
}

void standardize_rows(const Standardizer& s, const Matrix& xs, std::vector<double>& out) {
    const std::size_t d = xs.cols();
    if (s.x_mean.size() != d) throw std::invalid_argument("input dimension mismatch");
    out.resize(xs.rows() * d);
    for (std::size_t i = 0; i < xs.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double v = xs(i, j);
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite input value");
            out[i * d + j] = (v - s.x_mean[j]) / s.x_scale[j];
        }
}

}  // namespace

double pinball(double tau, double residual) noexcept {
    return residual * (tau - (residual < 0.0 ? 1.0 : 0.0));
}

TrainedModel init_model(Architecture arch, std::uint64_t seed) {
    if (arch.hidden.empty()) arch.feature_dim = arch.input_dim;
    arch.validate();
    TrainedModel m;
    m.architecture = arch;
    m.seed = seed;
    m.standardizer = Standardizer::identity(arch.input_dim);
    m.weights.assign(arch.parameter_count(), 0.0);
    stat::Rng rng = stat::Rng(seed).substream({stat::tag("init")});
    for (const Layer& L : layout(arch)) {
        const double limit = arch.activation == Activation::ReLU
                                 ? std::sqrt(6.0 / static_cast<double>(L.in))
                                 : std::sqrt(6.0 / static_cast<double>(L.in + L.out));
        for (std::size_t k = 0; k < L.in * L.out; ++k)
            m.weights[L.w_off + k] = rng.uniform(-limit, limit);
    }
    return m;
}

BatchOutput forward_batch(const TrainedModel& model, const Matrix& xs, bool with_features) {
    const Architecture& arch = model.architecture;
    if (xs.cols() != arch.input_dim) throw std::invalid_argument("input dimension mismatch");
    if (model.weights.size() != arch.parameter_count())
        throw std::invalid_argument("weight count does not match architecture");
    const auto layers = layout(arch);
    const std::size_t n = xs.rows(), n_out = arch.head_outputs();
    const std::size_t feat_dim = arch.feature_dim;
    const Standardizer& s = model.standardizer;

    std::vector<double> x_std;
    standardize_rows(s, xs, x_std);

    BatchOutput result{Matrix(n, 2), with_features ? Matrix(n, feat_dim) : Matrix()};
    Workspace ws;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t b = std::min(kChunk, n - start);
        forward_std(arch, layers, model.weights, x_std.data() + start * arch.input_dim, b, ws);
        const auto& head = ws.acts.back();
        const auto& feat = ws.acts[ws.acts.size() - 2];
        for (std::size_t i = 0; i < b; ++i) {
            const double* o = head.data() + i * n_out;
            double first = o[0] * s.y_scale + s.y_mean;
            double second = 0.0;
            if (arch.head == Head::Gaussian) second = std::exp(o[1]) * s.y_scale * s.y_scale;
            if (arch.head == Head::Quantile) second = o[1] * s.y_scale + s.y_mean;
            result.values(start + i, 0) = first;
            result.values(start + i, 1) = second;
            if (with_features)
                std::copy_n(feat.data() + i * feat_dim, feat_dim, result.features.row(start + i).data());
        }
    }
    return result;
}

HeadOutput forward(const TrainedModel& model, std::span<const double> x) {
    Matrix xs(1, x.size(), std::vector<double>(x.begin(), x.end()));
    auto out = forward_batch(model, xs, true);
    HeadOutput h;
    h.head = model.architecture.head;
    h.first = out.values(0, 0);
    h.second = out.values(0, 1);
    auto f = out.features.row(0);
    h.feature.assign(f.begin(), f.end());
    return h;
}

Matrix extract_features(const TrainedModel& model, const Matrix& xs) {
    return forward_batch(model, xs, true).features;
}

double loss(Head head, const HeadOutput& out, double y, double alpha) {
    switch (head) {
        case Head::Direct: return (y - out.first) * (y - out.first);
        case Head::Gaussian: {
            const double var = out.second;
            if (!(var > 0.0)) throw std::invalid_argument("gaussian loss needs sigma^2 > 0");
            const double r = y - out.first;
            return 0.5 * std::log(2.0 * std::numbers::pi * var) + r * r / (2.0 * var);
        }
        case Head::Quantile: {
            if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
            return 0.5 * (pinball(alpha / 2.0, y - out.first) +
                          pinball(1.0 - alpha / 2.0, y - out.second));
        }
    }
    return 0.0;
}

double batch_loss_gradient(const Architecture& arch, std::span<const double> weights,
                           const Matrix& x_std, std::span<const double> y_std, double alpha,
                           std::vector<double>& grad) {
    if (x_std.cols() != arch.input_dim || x_std.rows() != y_std.size() || x_std.rows() == 0)
        throw std::invalid_argument("batch shape mismatch");
    if (weights.size() != arch.parameter_count())
        throw std::invalid_argument("weight count does not match architecture");
    Workspace ws;
    return loss_and_backward(arch, layout(arch), weights, x_std.data(), y_std.data(),
                             x_std.rows(), alpha, ws, grad);
}

TrainedModel train(TrainedModel model, const Matrix& x, std::span<const double> y,
                   const TrainHyper& hyper, double alpha) {
    hyper.validate();
    const Architecture& arch = model.architecture;
    if (x.rows() == 0) throw std::invalid_argument("train: empty train split");
    if (x.rows() != y.size()) throw std::invalid_argument("train: inputs and targets differ in length");
    if (x.cols() != arch.input_dim) throw std::invalid_argument("input dimension mismatch");
    if (arch.head == Head::Quantile && !(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("train: quantile head needs alpha in (0,1)");
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("train: non-finite target");

    model.standardizer = Standardizer::fit(x, y);
    model.quantile_alpha = arch.head == Head::Quantile ? alpha : 0.0;
    const Standardizer& s = model.standardizer;
    std::vector<double> x_std;
    standardize_rows(s, x, x_std);
    std::vector<double> y_std(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) y_std[i] = (y[i] - s.y_mean) / s.y_scale;

    const auto layers = layout(arch);
    const std::size_t n = x.rows(), d = arch.input_dim, P = model.weights.size();
    const std::size_t bs = std::min(hyper.batch_size, n);
    std::vector<double> m(P, 0.0), v(P, 0.0), grad(P);
    std::vector<double> bx(bs * d), by(bs);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    stat::Rng shuffle = stat::Rng(hyper.seed).substream({stat::tag("shuffle")});
    Workspace ws;
    model.train_loss_history.clear();

    double b1_pow = 1.0, b2_pow = 1.0;
    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t b = std::min(bs, n - start);
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t r = order[start + i];
                std::copy_n(x_std.data() + r * d, d, bx.data() + i * d);
                by[i] = y_std[r];
            }
            const double batch_loss = loss_and_backward(arch, layers, model.weights, bx.data(),
                                                        by.data(), b, alpha, ws, grad);
            epoch_loss += batch_loss * static_cast<double>(b);
            b1_pow *= hyper.adam_beta1;
            b2_pow *= hyper.adam_beta2;
            const double lr_t = hyper.learning_rate * std::sqrt(1.0 - b2_pow) / (1.0 - b1_pow);
            kernels::adam_step(model.weights.data(), m.data(), v.data(), grad.data(), P, lr_t,
                               hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps);
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
        model.train_loss_history.push_back(epoch_loss);
    }
    return model;
}

nlohmann::json to_json(const TrainedModel& model) {
    const Architecture& a = model.architecture;
    return nlohmann::json{
        {"format", "shiftuq-model"},
        {"version", 1},
        {"architecture",
         {{"input_dim", a.input_dim},
          {"hidden", a.hidden},
          {"feature_dim", a.feature_dim},
          {"head", to_string(a.head)},
          {"activation", to_string(a.activation)}}},
        {"seed", model.seed},
        {"quantile_alpha", model.quantile_alpha},
        {"standardizer",
         {{"x_mean", model.standardizer.x_mean},
          {"x_scale", model.standardizer.x_scale},
          {"y_mean", model.standardizer.y_mean},
          {"y_scale", model.standardizer.y_scale}}},
        {"train_loss_history", model.train_loss_history},
        {"weights", model.weights},
    };
}

TrainedModel model_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "shiftuq-model")
        throw std::invalid_argument("not a shiftuq model checkpoint");
    if (j.at("version").get<int>() != 1)
        throw std::invalid_argument("unsupported checkpoint version");
    TrainedModel m;
    const auto& a = j.at("architecture");
    m.architecture.input_dim = a.at("input_dim").get<std::size_t>();
    m.architecture.hidden = a.at("hidden").get<std::vector<std::size_t>>();
    m.architecture.feature_dim = a.at("feature_dim").get<std::size_t>();
    m.architecture.head = head_from_string(a.at("head").get<std::string>());
    m.architecture.activation = activation_from_string(a.at("activation").get<std::string>());
    m.architecture.validate();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.quantile_alpha = j.at("quantile_alpha").get<double>();
    const auto& s = j.at("standardizer");
    m.standardizer.x_mean = s.at("x_mean").get<std::vector<double>>();
    m.standardizer.x_scale = s.at("x_scale").get<std::vector<double>>();
    m.standardizer.y_mean = s.at("y_mean").get<double>();
    m.standardizer.y_scale = s.at("y_scale").get<double>();
    m.train_loss_history = j.at("train_loss_history").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    if (m.weights.size() != m.architecture.parameter_count())
        throw std::invalid_argument("checkpoint weight count does not match architecture");
    return m;
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << to_json(model).dump() << '\n';
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return model_from_json(nlohmann::json::parse(in));
}

}  // namespace shiftuq::nn
