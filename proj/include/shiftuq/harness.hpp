#pragma once

// Experiment orchestration: model pools per head type, the method grid,
// repeat aggregation and intensity sweeps.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "shiftuq/config.hpp"
#include "shiftuq/metrics.hpp"
#include "shiftuq/nn.hpp"
#include "shiftuq/synthbench.hpp"

namespace shiftuq::harness {

/// Number of worker threads: SHIFTUQ_WORKERS if set, else the hardware count.
std::size_t worker_count();
/// Runs fn(0..n-1) on a bounded pool. The first exception (lowest index)
/// is rethrown after all jobs finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = 0);

struct RepeatResult {
    std::size_t index = 0;
    /// Pool indices of the models used.
    std::vector<std::size_t> members;
    bool ok = true;
    std::string message;
    metrics::MetricsReport metrics;
};

/// Names and order of the per-repeat numeric columns.
inline constexpr std::array<const char*, 11> kMetricNames = {
    "coverage",      "prediction_rate", "mae_val",      "interval_length_val",
    "ece",           "coverage_error",  "n_evaluated",  "val_coverage",
    "tau",           "quantile_crossings", "collapsed_intervals"};
using MetricVector = std::array<double, kMetricNames.size()>;
MetricVector metric_vector(const metrics::MetricsReport& m);
metrics::MetricsReport metrics_from_vector(const MetricVector& v, double alpha);

struct Summary {
    MetricVector mean{};
    MetricVector std{};
    /// Successful repeats.
    std::size_t n = 0;
    /// "ok", "n=1" (single repeat, std reported as 0) or "failed".
    std::string status = "failed";
    std::string message;
};

struct ReportRow {
    std::string dataset;
    std::string method;
    double alpha = 0.1;
    std::vector<RepeatResult> repeats;
    Summary summary;
};

/// Recomputes every row's summary from its repeats: mean and (n-1)
/// standard deviation over the successful repeats.
std::vector<ReportRow> aggregate(std::vector<ReportRow> rows);
Summary summarize(const std::vector<RepeatResult>& repeats);

/// Trained models for one head type.
struct ModelPool {
    nn::Head head = nn::Head::Direct;
    std::vector<nn::TrainedModel> models;
    /// Empty when member i trained successfully.
    std::vector<std::string> errors;
};

struct PoolSet {
    std::optional<ModelPool> direct;
    std::optional<ModelPool> gaussian;
    std::optional<ModelPool> quantile;

    const ModelPool* find(nn::Head head) const;
};

std::string pool_name(nn::Head head);
/// Seed of pool member `index`, from (config seed, dataset id, head, index).
std::uint64_t member_seed(std::uint64_t seed, const std::string& dataset_id, nn::Head head,
                          std::size_t index);
/// Trains every pool the configured methods need.
PoolSet train_pools(const ExperimentConfig& config, const std::string& dataset_id,
                    const synth::Dataset& dataset, std::ostream* log = nullptr);

/// Builds one row per method for a dataset with already-trained pools.
std::vector<ReportRow> evaluate_dataset(const ExperimentConfig& config,
                                        const std::string& dataset_id,
                                        const synth::Dataset& dataset, const PoolSet& pools,
                                        std::ostream* log = nullptr);

synth::Dataset materialize(const DatasetSource& source);

struct RunOptions {
    std::ostream* log = nullptr;
};

std::vector<ReportRow> run_experiment(const ExperimentConfig& config,
                                      const RunOptions& options = {});

/// Checkpoint layout under a directory: <dir>/<dataset>.csv and
/// <dir>/<dataset>/<pool>_<i>.json.
void save_pools(const PoolSet& pools, const synth::Dataset& dataset,
                const std::string& dataset_id, const std::filesystem::path& dir);
PoolSet load_pools(const ExperimentConfig& config, const std::string& dataset_id,
                   const std::filesystem::path& dir);

struct SweepPoint {
    int level = 0;
    std::string method;
    double coverage = 0.0;
};

struct SweepResult {
    std::vector<ReportRow> rows;
    std::vector<SweepPoint> points;
};

/// Intensity ladder toward `base` (Tails or Gap), levels 0..levels-1. Uses
/// the first synthetic dataset of the config as the template; datasets are
/// named "<base>-L<level>".
SweepResult run_sweep(ExperimentConfig config, synth::ShiftKind base, int levels,
                      const RunOptions& options = {});

}  // namespace shiftuq::harness
