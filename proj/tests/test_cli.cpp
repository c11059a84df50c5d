#include <doctest.h>

#include <fstream>
#include <sstream>
#include <vector>

#include "fixtures.hpp"
#include "shiftuq/cli.hpp"

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "shiftuq");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = shiftuq::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path tiny_config_file(const std::filesystem::path& dir) {
    const auto p = dir / "tiny.toml";
    std::ofstream(p) << R"(seed = 5
n_models_trained = 3
n_models_selected = 2
n_repeats = 2
ensemble_m = 2
ece_points = 9
methods = ["gaussian", "gauss_sel_gmm"]
[model]
hidden = [8]
feature_dim = 4
[train]
epochs = 2
[dataset.t]
kind = "tails"
n_train = 200
n_val = 50
n_test = 200
)";
    return p;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    auto r = run({});
    CHECK(r.code == 1);
    r = run({"evaluate", "--bogus"});
    CHECK(r.code == 1);
    CHECK(r.err.find("Usage") != std::string::npos);
    r = run({"frobnicate"});
    CHECK(r.code == 1);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).code == 0);
}

TEST_CASE("missing config exits 1 with the path") {
    const auto r = run({"evaluate", "--config", "/no/such/baseline.toml"});
    CHECK(r.code == 1);
    CHECK(r.err.find("/no/such/baseline.toml") != std::string::npos);
    CHECK(run({"evaluate"}).code == 1);
}

TEST_CASE("invalid config contents exit 1") {
    const auto dir = fixture::scratch("cli_bad");
    std::ofstream(dir / "bad.toml") << "n_models_trained = 2\nn_models_selected = 5\n[dataset.x]\nkind = \"none\"\n";
    CHECK(run({"evaluate", "--config", (dir / "bad.toml").string()}).code == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("generate, train, evaluate, report, sweep") {
    const auto dir = fixture::scratch("cli");
    auto r = run({"generate", "--kind", "gap", "--small", "--seed", "4", "--out", (dir / "data").string()});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "data" / "dataset.csv"));
    CHECK(std::filesystem::exists(dir / "data" / "manifest.json"));

    const auto cfg = tiny_config_file(dir);
    r = run({"train", "--data", (dir / "data" / "dataset.csv").string(), "--head", "quantile", "--config",
             cfg.string(), "--out", (dir / "models").string()});
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(dir / "models" / "quantile.json"));
    CHECK(run({"train", "--data", (dir / "nope.csv").string()}).code == 1);
    CHECK(run({"train", "--data", (dir / "data" / "dataset.csv").string(), "--head", "cubic"}).code == 1);

    r = run({"evaluate", "--config", cfg.string(), "--out", (dir / "eval").string(), "--alpha", "0.2"});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "eval" / "results.csv"));
    CHECK(r.out.find("gauss_sel_gmm") != std::string::npos);

    const auto before = std::filesystem::file_size(dir / "eval" / "results.csv");
    r = run({"report", "--in", (dir / "eval").string(), "--out", (dir / "again").string()});
    CHECK(r.code == 0);
    CHECK(std::filesystem::file_size(dir / "again" / "results.csv") == before);

    r = run({"sweep", "--kind", "tails", "--levels", "2", "--config", cfg.string(), "--out",
             (dir / "sweep").string()});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "sweep" / "shiftsweep.csv"));
    CHECK(r.out.find("1,gaussian,") != std::string::npos);
    CHECK(run({"sweep", "--kind", "sideways", "--config", cfg.string()}).code == 1);
    std::filesystem::remove_all(dir);
}
