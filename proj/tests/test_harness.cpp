#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "shiftuq/harness.hpp"
#include "shiftuq/report.hpp"

using namespace shiftuq;
using namespace shiftuq::harness;

namespace {

RepeatResult repeat_with_coverage(double c) {
    RepeatResult r;
    r.metrics.coverage = c;
    return r;
}

std::string read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const ReportRow& row_for(const std::vector<ReportRow>& rows, const std::string& method) {
    for (const auto& r : rows)
        if (r.method == method) return r;
    throw std::runtime_error("no row " + method);
}

}  // namespace

TEST_CASE("aggregate") {
    ReportRow a;
    a.repeats = {repeat_with_coverage(0.9), repeat_with_coverage(0.9)};
    ReportRow b;
    b.repeats = {repeat_with_coverage(0.8), repeat_with_coverage(1.0)};
    ReportRow c;
    c.repeats = {repeat_with_coverage(0.7)};
    ReportRow d;
    d.repeats = {repeat_with_coverage(0.7), RepeatResult{1, {}, false, "empty selective subset", {}}};
    const auto rows = aggregate({a, b, c, d});
    CHECK(rows[0].summary.mean[0] == doctest::Approx(0.9));
    CHECK(rows[0].summary.std[0] == 0.0);
    CHECK(rows[1].summary.mean[0] == doctest::Approx(0.9));
    CHECK(rows[1].summary.std[0] == doctest::Approx(0.1414213562).epsilon(1e-9));
    CHECK(rows[1].summary.status == "ok");
    CHECK(rows[2].summary.std[0] == 0.0);
    CHECK(rows[2].summary.status == "n=1");
    CHECK(rows[3].summary.n == 1);
    CHECK(rows[3].summary.message.find("1 of 2 repeats failed") != std::string::npos);
    CHECK(metrics_from_vector(rows[1].summary.mean, 0.1).coverage == rows[1].summary.mean[0]);
}

TEST_CASE("parallel_for runs every job and reports the first failure") {
    std::vector<int> hit(100, 0);
    parallel_for(100, [&](std::size_t i) { hit[i] = 1; }, 4);
    CHECK(std::count(hit.begin(), hit.end(), 1) == 100);
    CHECK_THROWS_WITH(parallel_for(10, [](std::size_t i) {
                          if (i == 3 || i == 7) throw std::runtime_error("job " + std::to_string(i));
                      }, 3),
                      "job 3");
}

TEST_CASE("experiment run: structure, sharing and determinism") {
    auto cfg = fixture::tiny_config("tails");
    const auto rows = run_experiment(cfg);
    REQUIRE(rows.size() == 10);
    for (const auto& r : rows) {
        CHECK(r.dataset == "d");
        CHECK_MESSAGE(r.summary.status == "ok", r.method << ": " << r.summary.message);
        const MethodId m = method_from_string(r.method);
        CHECK(r.repeats.size() == (m.ensemble() ? cfg.n_repeats : cfg.n_models_selected));
        for (const auto& rep : r.repeats) {
            const std::set<std::size_t> distinct(rep.members.begin(), rep.members.end());
            CHECK(distinct.size() == rep.members.size());
            CHECK(rep.members.size() == (m.ensemble() ? cfg.ensemble_M : 1));
            CHECK(rep.metrics.coverage >= 0.0);
            CHECK(rep.metrics.coverage <= 1.0);
            CHECK(rep.metrics.val_coverage <= 1 - cfg.alpha + 1.0 / 100 + 1e-12);
            CHECK(rep.metrics.val_coverage >= 1 - cfg.alpha - 1e-12);
            if (m.selective()) {
                CHECK(!std::isnan(rep.metrics.tau));
                CHECK(rep.metrics.prediction_rate < 1.0);
            } else {
                CHECK(rep.metrics.prediction_rate == 1.0);
            }
        }
    }
    // Methods on the same pool reuse the same draws and val statistics.
    const auto& g = row_for(rows, "gaussian");
    const auto& sel = row_for(rows, "gauss_sel_gmm");
    const auto& ge = row_for(rows, "gaussian_ensemble");
    const auto& ges = row_for(rows, "gauss_ens_sel_ens_variance");
    for (std::size_t r = 0; r < g.repeats.size(); ++r) {
        CHECK(g.repeats[r].members == sel.repeats[r].members);
        CHECK(g.repeats[r].metrics.mae_val == sel.repeats[r].metrics.mae_val);
    }
    for (std::size_t r = 0; r < ge.repeats.size(); ++r) CHECK(ge.repeats[r].members == ges.repeats[r].members);

    const auto again = run_experiment(cfg);
    CHECK(report::results_csv(again) == report::results_csv(rows));
    cfg.seed += 1;
    CHECK(report::results_csv(run_experiment(cfg)) != report::results_csv(rows));
}

TEST_CASE("replay from checkpoints and dataset csv") {
    auto cfg = fixture::tiny_config("gap");
    cfg.save_checkpoints = true;
    cfg.output_dir = fixture::scratch("replay");
    const auto rows = run_experiment(cfg);

    const auto dir = cfg.output_dir / "checkpoints";
    const auto ds = synth::load_csv(dir / "d.csv");
    const auto pools = load_pools(cfg, "d", dir);
    const auto replayed = evaluate_dataset(cfg, "d", ds, pools);
    CHECK(report::results_csv(replayed) == report::results_csv(rows));
    std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("failures are recorded per cell") {
    auto cfg = fixture::tiny_config("none");
    cfg.methods = {method_from_string("gaussian"), method_from_string("gauss_sel_variance")};
    cfg.hyper.learning_rate = 1e300;
    const auto rows = run_experiment(cfg);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.summary.status == "failed");
        CHECK(r.summary.message.find("training diverged") != std::string::npos);
        CHECK(std::isnan(r.summary.mean[0]));
    }
}

TEST_CASE("emit_report") {
    auto cfg = fixture::tiny_config("none");
    cfg.methods = {method_from_string("conformal_prediction"), method_from_string("gauss_sel_knn")};
    const auto rows = run_experiment(cfg);
    const auto dir = fixture::scratch("emit");
    report::emit_report(rows, dir / "a", "seed = 5\n");
    report::emit_report(rows, dir / "b", "seed = 5\n");
    CHECK(read(dir / "a" / "results.csv") == read(dir / "b" / "results.csv"));
    CHECK(read(dir / "a" / "results.json") == read(dir / "b" / "results.json"));
    CHECK(!std::filesystem::exists(dir / "a" / "shiftsweep.csv"));

    const auto j = nlohmann::json::parse(read(dir / "a" / "results.json"));
    CHECK(j["config_echo"] == "seed = 5\n");
    CHECK(j["library_version"] == report::library_version());
    const auto back = report::rows_from_json(j);
    CHECK(report::results_csv(back) == report::results_csv(rows));
    CHECK(report::to_json(back, "seed = 5\n").dump() == j.dump());

    report::emit_report({}, dir / "empty", "");
    const auto header = read(dir / "empty" / "results.csv");
    CHECK(std::count(header.begin(), header.end(), '\n') == 1);
    CHECK(header.rfind("schema_version,dataset,method,alpha,repeat,status,coverage", 0) == 0);

    // 1 + 2 repeats + mean + std per method.
    const auto csv = read(dir / "a" / "results.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 4);
    std::filesystem::remove_all(dir);
}

TEST_CASE("number formatting round-trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -0.0})
        CHECK(std::stod(report::format_number(v)) == v);
    CHECK(report::format_number(std::nan("")).empty());
}

TEST_CASE("intensity sweep") {
    auto cfg = fixture::tiny_config("none");
    cfg.methods = non_selective_methods();
    const auto res = run_sweep(cfg, synth::ShiftKind::Tails, 3);
    CHECK(res.rows.size() == 15);
    REQUIRE(res.points.size() == 15);
    CHECK(res.points.front().level == 0);
    CHECK(res.points.back().level == 2);
    CHECK(res.rows.back().dataset == "tails-L2");
    CHECK_THROWS_AS(run_sweep(cfg, synth::ShiftKind::Tails, 6), ConfigError);
    const auto csv = report::sweep_csv(res.points);
    CHECK(csv.rfind("level,method,coverage\n0,conformal_prediction,", 0) == 0);
}
