#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "shiftuq/nn.hpp"
#include "shiftuq/statkit.hpp"

using namespace shiftuq;
using nn::Architecture;
using nn::Head;

namespace {

Architecture small_arch(Head head, nn::Activation act = nn::Activation::Tanh) {
    Architecture a;
    a.input_dim = 3;
    a.hidden = {5, 4};
    a.feature_dim = 3;
    a.head = head;
    a.activation = act;
    return a;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("architecture shapes") {
    Architecture a = small_arch(Head::Gaussian);
    CHECK(a.layer_widths() == std::vector<std::size_t>{3, 5, 4, 3, 2});
    CHECK(a.parameter_count() == (3 * 5 + 5) + (5 * 4 + 4) + (4 * 3 + 3) + (3 * 2 + 2));
    Architecture lin;
    lin.input_dim = 4;
    lin.hidden = {};
    lin.feature_dim = 4;
    CHECK(lin.is_linear());
    CHECK(lin.parameter_count() == 5);
    lin.feature_dim = 3;
    CHECK_THROWS(lin.validate());
}

TEST_CASE("init determinism") {
    const auto a = nn::init_model(small_arch(Head::Direct), 5);
    const auto b = nn::init_model(small_arch(Head::Direct), 5);
    const auto c = nn::init_model(small_arch(Head::Direct), 6);
    CHECK(a.weights == b.weights);
    CHECK(a.weights != c.weights);
}

TEST_CASE("zero-weight models") {
    auto direct = nn::init_model(small_arch(Head::Direct), 1);
    std::fill(direct.weights.begin(), direct.weights.end(), 0.0);
    const std::vector<double> x{0.3, -2.0, 7.0};
    const auto out = nn::forward(direct, x);
    CHECK(out.prediction() == 0.0);
    CHECK(out.feature == std::vector<double>(3, 0.0));

    auto gauss = nn::init_model(small_arch(Head::Gaussian), 1);
    std::fill(gauss.weights.begin(), gauss.weights.end(), 0.0);
    const auto g = nn::forward(gauss, x);
    CHECK(g.mu() == 0.0);
    CHECK(g.sigma2() == 1.0);
    CHECK_THROWS(nn::forward(gauss, std::vector<double>{1.0, 2.0}));
}

TEST_CASE("hand-set linear model") {
    Architecture a;
    a.input_dim = 3;
    a.hidden = {};
    a.feature_dim = 3;
    auto m = nn::init_model(a, 0);
    m.weights = {0.5, -1.0, 2.0, 0.25};  // W (3x1) then bias
    const std::vector<double> x{2.0, 3.0, -1.0};
    CHECK(nn::forward(m, x).prediction() == doctest::Approx(0.5 * 2.0 - 3.0 - 2.0 + 0.25));
    CHECK(nn::forward(m, x).feature == x);
}

TEST_CASE("loss values") {
    nn::HeadOutput g{Head::Gaussian, 1.0, 1.0, {}};
    CHECK(nn::loss(Head::Gaussian, g, 1.0, 0.1) == doctest::Approx(0.5 * std::log(2 * std::numbers::pi)));
    nn::HeadOutput d{Head::Direct, 3.0, 0.0, {}};
    CHECK(nn::loss(Head::Direct, d, 1.0, 0.1) == 4.0);
    CHECK(nn::pinball(0.05, 1.0) == doctest::Approx(0.05));
    CHECK(nn::pinball(0.05, -1.0) == doctest::Approx(0.95));
    nn::HeadOutput q{Head::Quantile, 0.0, 2.0, {}};
    // y = 1: lower residual 1 at tau 0.05, upper residual -1 at tau 0.95.
    CHECK(nn::loss(Head::Quantile, q, 1.0, 0.1) == doctest::Approx(0.5 * (0.05 + 0.05)));
}

TEST_CASE("analytic gradients match central differences") {
    stat::Rng rng(11);
    for (int draw = 0; draw < 100; ++draw) {
        const Head head = draw % 3 == 0 ? Head::Direct : draw % 3 == 1 ? Head::Gaussian : Head::Quantile;
        const auto act = draw % 2 == 0 ? nn::Activation::Tanh : nn::Activation::ReLU;
        const Architecture a = small_arch(head, act);
        std::vector<double> w(a.parameter_count());
        for (auto& v : w) v = 0.6 * rng.normal();
        Matrix x(6, 3);
        std::vector<double> y(6);
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal();
            y[i] = rng.normal();
        }
        std::vector<double> grad, scratch;
        nn::batch_loss_gradient(a, w, x, y, 0.1, grad);
        std::vector<double> fd(w.size());
        const double h = 1e-5;
        for (std::size_t k = 0; k < w.size(); ++k) {
            auto wp = w, wm = w;
            wp[k] += h;
            wm[k] -= h;
            fd[k] = (nn::batch_loss_gradient(a, wp, x, y, 0.1, scratch) -
                     nn::batch_loss_gradient(a, wm, x, y, 0.1, scratch)) /
                    (2 * h);
        }
        std::vector<double> diff(w.size());
        for (std::size_t k = 0; k < w.size(); ++k) diff[k] = grad[k] - fd[k];
        const double rel = norm(diff) / std::max({norm(grad), norm(fd), 1e-12});
        CHECK_MESSAGE(rel <= 1e-4, "draw " << draw << " head " << nn::to_string(head));
    }
}

TEST_CASE("training recovers a linear map") {
    stat::Rng rng(2);
    const std::size_t n = 512;
    Matrix x(n, 1), xv(n, 1);
    std::vector<double> y(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1, 1);
        y[i] = 2 * x(i, 0);
        xv(i, 0) = rng.uniform(-1, 1);
        yv[i] = 2 * xv(i, 0);
    }
    Architecture a;
    a.hidden = {16};
    a.feature_dim = 8;
    nn::TrainHyper hyper;
    hyper.epochs = 100;
    hyper.batch_size = 32;
    hyper.learning_rate = 1e-2;
    hyper.seed = 4;
    const auto m = nn::train(nn::init_model(a, 4), x, y, hyper);
    const auto out = nn::forward_batch(m, xv, false);
    double mae = 0.0;
    for (std::size_t i = 0; i < n; ++i) mae += std::abs(out.values(i, 0) - yv[i]);
    CHECK(mae / n < 0.05);

    const auto again = nn::train(nn::init_model(a, 4), x, y, hyper);
    CHECK(again.weights == m.weights);
    CHECK(m.train_loss_history.size() == 100);
}

TEST_CASE("epoch loss decreases monotonically at a small learning rate") {
    stat::Rng rng(8);
    Matrix x(32, 1);
    std::vector<double> y(32);
    for (std::size_t i = 0; i < 32; ++i) {
        x(i, 0) = rng.uniform(-1, 1);
        y[i] = 3 * x(i, 0) + 1;
    }
    Architecture a;
    a.hidden = {8};
    a.feature_dim = 4;
    nn::TrainHyper hyper;
    hyper.epochs = 60;
    hyper.batch_size = 32;
    hyper.learning_rate = 1e-3;
    const auto m = nn::train(nn::init_model(a, 1), x, y, hyper);
    for (std::size_t e = 1; e < m.train_loss_history.size(); ++e)
        CHECK(m.train_loss_history[e] < m.train_loss_history[e - 1]);
}

TEST_CASE("training preconditions and divergence") {
    Matrix x(4, 1, {0, 1, 2, 3});
    std::vector<double> y{0, 1, 2, 3};
    Architecture a;
    a.hidden = {4};
    a.feature_dim = 2;
    nn::TrainHyper hyper;
    hyper.epochs = 0;
    CHECK_THROWS(nn::train(nn::init_model(a, 1), x, y, hyper));
    hyper.epochs = 20;
    hyper.learning_rate = 1e300;
    CHECK_THROWS_WITH(nn::train(nn::init_model(a, 1), x, y, hyper),
                      doctest::Contains("training diverged at epoch"));
}

TEST_CASE("features and variance") {
    auto m = nn::init_model(small_arch(Head::Gaussian), 3);
    Matrix xs(3, 3, {1, 2, 3, 1, 2, 3, -4, 0.5, 9});
    const auto f = nn::extract_features(m, xs);
    CHECK(f.cols() == 3);
    CHECK(std::vector<double>(f.row(0).begin(), f.row(0).end()) ==
          std::vector<double>(f.row(1).begin(), f.row(1).end()));
    stat::Rng rng(1);
    for (auto& w : m.weights) w = 3 * rng.normal();
    const auto out = nn::forward_batch(m, xs);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out.values(i, 1) > 0.0);
}

TEST_CASE("checkpoint round trip") {
    stat::Rng rng(5);
    Matrix x(40, 3);
    std::vector<double> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        for (std::size_t j = 0; j < 3; ++j) x(i, j) = rng.normal();
        y[i] = x(i, 0) * 10 + 100;
    }
    nn::TrainHyper hyper;
    hyper.epochs = 3;
    const auto m = nn::train(nn::init_model(small_arch(Head::Quantile), 2), x, y, hyper, 0.2);
    const auto path = std::filesystem::temp_directory_path() / "shiftuq_test_model.json";
    nn::save_checkpoint(m, path);
    const auto back = nn::load_checkpoint(path);
    CHECK(back == m);
    CHECK(back.quantile_alpha == 0.2);
    std::filesystem::remove(path);
    CHECK_THROWS(nn::model_from_json(nlohmann::json{{"format", "other"}}));
}
