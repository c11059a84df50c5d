#include "shiftuq/cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "shiftuq/config.hpp"
#include "shiftuq/harness.hpp"
#include "shiftuq/nn.hpp"
#include "shiftuq/report.hpp"
#include "shiftuq/synthbench.hpp"

namespace shiftuq::cli {

namespace {

using harness::ConfigError;

struct CommonFlags {
    std::string config;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    bool small = false;
    std::string out;
    std::vector<std::string> methods;
    bool verbose = false;
};

harness::ExperimentConfig build_config(const CommonFlags& f, bool require_file,
                                       bool need_template = false) {
    harness::ExperimentConfig cfg;
    if (!f.config.empty())
        cfg = harness::load_config(f.config);
    else if (require_file)
        throw ConfigError("--config is required");
    if (need_template && cfg.datasets.empty()) {
        harness::DatasetSource src;
        src.id = "template";
        src.synthetic = synth::ShiftSpec{};
        cfg.datasets.push_back(src);
    }
    if (f.alpha) cfg.alpha = *f.alpha;
    if (f.seed) cfg.seed = *f.seed;
    if (!f.methods.empty()) {
        cfg.methods.clear();
        for (const auto& m : f.methods) cfg.methods.push_back(harness::method_from_string(m));
    }
    if (f.small) cfg.apply_small();
    if (!f.out.empty()) cfg.output_dir = f.out;
    return cfg;
}

void add_common(CLI::App* app, CommonFlags& f, bool with_methods) {
    app->add_option("--config", f.config, "Experiment config file");
    app->add_option("--alpha", f.alpha, "Miscoverage rate")->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", f.seed, "Root seed");
    app->add_flag("--small", f.small, "Reduced pools and datasets");
    app->add_option("--out", f.out, "Output directory");
    if (with_methods)
        app->add_option("--methods", f.methods, "Methods to run (overrides the config)")
            ->delimiter(',');
    app->add_flag("-v,--verbose", f.verbose, "Progress on stderr");
}

synth::ShiftSpec first_synthetic(const harness::ExperimentConfig& cfg) {
    for (const auto& d : cfg.datasets)
        if (d.synthetic) return *d.synthetic;
    return {};
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Uncertainty quantification under distribution shift: synthetic benchmarks, "
                 "interval methods and selective prediction."};
    app.name("shiftuq");
    app.require_subcommand(1);
    app.set_version_flag("--version", report::library_version());

    // generate
    CommonFlags gen;
    std::string gen_kind = "none", gen_base = "tails";
    int gen_level = 0;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset CSV");
    add_common(generate, gen, false);
    generate->add_option("--kind", gen_kind, "none|tails|gap|intensity");
    generate->add_option("--level", gen_level, "Intensity level 0..4");
    generate->add_option("--base", gen_base, "Intensity base: tails|gap");

    // train
    CommonFlags tr;
    std::string tr_data, tr_head = "gaussian";
    auto* train = app.add_subcommand("train", "Train one model on a dataset CSV");
    add_common(train, tr, false);
    train->add_option("--data", tr_data, "Dataset CSV")->required();
    train->add_option("--head", tr_head, "direct|gaussian|quantile");

    // evaluate
    CommonFlags ev;
    auto* evaluate = app.add_subcommand("evaluate", "Run the method grid from a config file");
    add_common(evaluate, ev, true);

    // report
    std::string rp_in, rp_out;
    auto* rep = app.add_subcommand("report", "Re-emit reports from an existing results.json");
    rep->add_option("--in", rp_in, "results.json or the directory holding it")->required();
    rep->add_option("--out", rp_out, "Output directory (default: alongside the input)");

    // sweep
    CommonFlags sw;
    std::string sw_kind = "tails";
    int sw_levels = 5;
    auto* sweep = app.add_subcommand("sweep", "Intensity ladder toward a tails or gap shift");
    add_common(sweep, sw, true);
    sweep->add_option("--kind", sw_kind, "tails|gap");
    sweep->add_option("--levels", sw_levels, "Number of levels, 1..5");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << report::library_version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*generate) {
            harness::ExperimentConfig cfg = build_config(gen, false);
            synth::ShiftSpec spec = first_synthetic(cfg);
            if (!generate->get_option("--kind")->empty() || gen.config.empty())
                spec.kind = synth::shift_kind_from_string(gen_kind);
            if (!generate->get_option("--level")->empty()) spec.level = gen_level;
            if (!generate->get_option("--base")->empty())
                spec.intensity_base = synth::shift_kind_from_string(gen_base);
            if (gen.seed) spec.seed = *gen.seed;
            if (gen.small) spec.small();
            const std::filesystem::path dir = gen.out.empty() ? "data" : gen.out;
            std::filesystem::create_directories(dir);
            const auto ds = synth::generate(spec);
            synth::save_csv(ds, dir / "dataset.csv");
            synth::save_manifest(ds, dir / "manifest.json");
            out << "wrote " << (dir / "dataset.csv").string() << " (" << ds.size() << " rows)\n";
            return 0;
        }
        if (*train) {
            harness::ExperimentConfig cfg = build_config(tr, false);
            const auto ds = synth::load_csv(tr_data);
            ds.validate();
            const auto data = ds.subset(synth::Split::Train);
            nn::Architecture arch = cfg.architecture;
            arch.input_dim = ds.dim();
            arch.head = nn::head_from_string(tr_head);
            if (arch.is_linear()) arch.feature_dim = arch.input_dim;
            nn::TrainHyper hyper = cfg.hyper;
            hyper.seed = cfg.seed;
            if (tr.small) hyper.epochs = std::min(hyper.epochs, 20);
            auto model = nn::train(nn::init_model(arch, cfg.seed), data.x, data.y, hyper, cfg.alpha);
            const std::filesystem::path dir = tr.out.empty() ? "models" : tr.out;
            std::filesystem::create_directories(dir);
            const auto path = dir / (nn::to_string(arch.head) + ".json");
            nn::save_checkpoint(model, path);
            out << "wrote " << path.string() << " (final train loss "
                << model.train_loss_history.back() << ")\n";
            return 0;
        }
        if (*evaluate) {
            harness::ExperimentConfig cfg = build_config(ev, true);
            harness::RunOptions opts;
            if (ev.verbose) opts.log = &err;
            const auto rows = harness::run_experiment(cfg, opts);
            report::emit_report(rows, cfg.output_dir, cfg.source_text);
            out << report::summary_table(rows);
            out << "wrote " << (cfg.output_dir / "results.csv").string() << "\n";
            return 0;
        }
        if (*rep) {
            std::filesystem::path in = rp_in;
            if (std::filesystem::is_directory(in)) in /= "results.json";
            std::ifstream f(in);
            if (!f) throw ConfigError("cannot read " + in.string());
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(f);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("invalid results file " + in.string() + ": " + e.what());
            }
            const auto rows = report::rows_from_json(j);
            const auto points = report::sweep_from_json(j);
            const std::filesystem::path dir = rp_out.empty() ? in.parent_path() : std::filesystem::path(rp_out);
            report::emit_report(rows, dir, j.value("config_echo", std::string()),
                                j.contains("sweep") ? &points : nullptr);
            out << report::summary_table(rows);
            return 0;
        }
        if (*sweep) {
            harness::ExperimentConfig cfg = build_config(sw, false, true);
            if (sw.methods.empty() && sw.config.empty()) cfg.methods = harness::non_selective_methods();
            harness::RunOptions opts;
            if (sw.verbose) opts.log = &err;
            const auto result =
                harness::run_sweep(cfg, synth::shift_kind_from_string(sw_kind), sw_levels, opts);
            report::emit_report(result.rows, cfg.output_dir, cfg.source_text, &result.points);
            out << "level,method,coverage\n";
            for (const auto& p : result.points)
                out << p.level << ',' << p.method << ',' << report::format_number(p.coverage) << '\n';
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace shiftuq::cli
