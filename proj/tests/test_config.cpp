#include <doctest.h>

#include "shiftuq/config.hpp"

using namespace shiftuq;
using namespace shiftuq::harness;

TEST_CASE("method registry") {
    const auto all = all_methods();
    CHECK(all.size() == 10);
    CHECK(non_selective_methods().size() == 5);
    std::size_t selective = 0, ensembles = 0;
    for (const auto& m : all) {
        CHECK(method_from_string(m.name()) == m);
        selective += m.selective();
        ensembles += m.ensemble();
    }
    CHECK(selective == 5);
    CHECK(ensembles == 4);
    CHECK(method_from_string("conformal_prediction").head() == nn::Head::Direct);
    CHECK(method_from_string("ensemble").head() == nn::Head::Direct);
    CHECK(method_from_string("quantile_regression").head() == nn::Head::Quantile);
    CHECK(method_from_string("gauss_ens_sel_gmm").head() == nn::Head::Gaussian);

    const auto knn = method_from_string("gauss_sel_knn:k=20,metric=l2");
    CHECK(knn.knn_k == 20);
    CHECK(knn.knn_metric == selective::KnnMetric::L2);
    CHECK(knn.name() == "gauss_sel_knn:k=20,metric=l2");
    CHECK(method_from_string("gauss_sel_gmm:k=2").gmm_k == 2);
    CHECK_THROWS_AS(method_from_string("gaussian:k=2"), ConfigError);
    CHECK_THROWS_AS(method_from_string("bayes"), ConfigError);
    CHECK_THROWS_AS(method_from_string("gauss_sel_gmm:k=0"), ConfigError);
}

TEST_CASE("parse a full config") {
    const auto cfg = config_from_text(R"(
# comment
seed = 3
alpha = 0.2
methods = ["gaussian", "gauss_sel_gmm", "gauss_sel_knn"]   # trailing comment
n_models_trained = 6
n_models_selected = 2
n_repeats = 2
ensemble_m = 3
threshold_quantile = 0.9
ece_points = 19
output_dir = "out dir"
save_checkpoints = true

[model]
hidden = [32, 16]
feature_dim = 8
activation = "relu"

[train]
epochs = 10
batch_size = 16
learning_rate = 0.01

[selective]
gmm_k = 3
knn_k = 5
knn_metric = "l2"

[dataset.a]
kind = "intensity"
level = 2
base = "gap"
range = [0, 10]
band = [4, 6]
n_train = 100
n_val = 20
n_test = 50
seed = 9

[dataset.b]
csv = "data.csv"
target = "t"
features = ["u", "v"]
)");
    CHECK(cfg.seed == 3);
    CHECK(cfg.alpha == 0.2);
    CHECK(cfg.methods.size() == 3);
    CHECK(cfg.methods[1].gmm_k == 3);
    CHECK(cfg.methods[2].knn_k == 5);
    CHECK(cfg.methods[2].knn_metric == selective::KnnMetric::L2);
    CHECK(cfg.n_models_trained == 6);
    CHECK(cfg.ensemble_M == 3);
    CHECK(cfg.ece_points == 19);
    CHECK(cfg.output_dir == "out dir");
    CHECK(cfg.save_checkpoints);
    CHECK(cfg.architecture.hidden == std::vector<std::size_t>{32, 16});
    CHECK(cfg.architecture.activation == nn::Activation::ReLU);
    CHECK(cfg.hyper.epochs == 10);
    CHECK(cfg.hyper.learning_rate == 0.01);
    REQUIRE(cfg.datasets.size() == 2);
    const auto& a = cfg.datasets[0];
    CHECK(a.id == "a");
    REQUIRE(a.synthetic);
    CHECK(a.synthetic->kind == synth::ShiftKind::Intensity);
    CHECK(a.synthetic->intensity_base == synth::ShiftKind::Gap);
    CHECK(a.synthetic->band == synth::Range{4, 6});
    CHECK(a.synthetic->n_test == 50);
    const auto& b = cfg.datasets[1];
    CHECK(b.csv.value() == "data.csv");
    CHECK(b.schema.target_column == "t");
    CHECK(b.schema.feature_columns == std::vector<std::string>{"u", "v"});
    cfg.validate();
}

TEST_CASE("defaults and presets") {
    auto cfg = config_from_text("[dataset.x]\nkind = \"tails\"\n");
    CHECK(cfg.methods.size() == 10);
    CHECK(cfg.n_models_trained == 20);
    CHECK(cfg.n_models_selected == 5);
    CHECK(cfg.n_repeats == 5);
    CHECK(cfg.ensemble_M == 5);
    CHECK(cfg.alpha == 0.1);
    cfg.validate();
    cfg.apply_small();
    CHECK(cfg.n_models_trained == 8);
    CHECK(cfg.n_models_selected == 3);
    CHECK(cfg.n_repeats == 3);
    CHECK(cfg.datasets[0].synthetic->n_train == 1000);
    CHECK(cfg.datasets[0].synthetic->n_val == 200);
}

TEST_CASE("validation errors") {
    auto base = [] { return config_from_text("[dataset.x]\nkind = \"none\"\n"); };
    auto cfg = base();
    cfg.n_models_selected = 21;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = base();
    cfg.ensemble_M = 21;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = base();
    cfg.alpha = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = base();
    cfg.datasets.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = base();
    cfg.hyper.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("parse errors") {
    CHECK_THROWS_WITH_AS(config_from_text("seed = 1\nalpha 0.1\n"), doctest::Contains("line 2"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_text("sed = 1\n"), doctest::Contains("unknown key 'sed'"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_text("seed = \"x\"\n"), doctest::Contains("seed"), ConfigError);
    CHECK_THROWS_AS(config_from_text("seed = -1\n"), ConfigError);
    CHECK_THROWS_AS(config_from_text("[nope]\n"), ConfigError);
    CHECK_THROWS_AS(config_from_text("seed = 1\nseed = 2\n"), ConfigError);
    CHECK_THROWS_AS(config_from_text("output_dir = \"abc\n"), ConfigError);
    CHECK_THROWS_AS(config_from_text("methods = [\"gaussian\"\n"), ConfigError);
    CHECK_THROWS_AS(config_from_text("[dataset.x]\nkind = \"sideways\"\n"), ConfigError);
    CHECK_THROWS_WITH_AS(load_config("/nonexistent/cfg.toml"), doctest::Contains("/nonexistent/cfg.toml"),
                         ConfigError);
}
