#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "shiftuq/intervals.hpp"

namespace shiftuq::metrics {

using intervals::PredictionInterval;

struct MetricsReport {
    /// Test coverage over the accepted subset.
    double coverage = 0.0;
    double prediction_rate = 1.0;
    double mae_val = 0.0;
    double interval_length_val = 0.0;
    double ece = 0.0;
    double coverage_error = 0.0;
    double alpha = 0.1;
    std::size_t n_evaluated = 0;

    // Diagnostics.
    double val_coverage = 0.0;
    double tau = std::numeric_limits<double>::quiet_NaN();
    std::size_t quantile_crossings = 0;
    std::size_t collapsed_intervals = 0;
};

/// Fraction of (accepted) targets inside their closed interval. Throws
/// std::invalid_argument("empty selective subset") when nothing is accepted.
double coverage(std::span<const PredictionInterval> intervals, std::span<const double> targets,
                const std::vector<bool>* accepted = nullptr);
double prediction_rate(const std::vector<bool>& accepted);
double prediction_rate(std::span<const double> scores, double tau);

double mae(std::span<const double> points, std::span<const double> targets);
double mean_interval_length(std::span<const PredictionInterval> intervals);

double coverage_error(double coverage, double alpha) noexcept;

/// Produces intervals for the evaluation inputs at a requested alpha.
using IntervalSource = std::function<std::vector<PredictionInterval>(double alpha)>;

/// alpha_j = j / (m + 1), j = 1..m.
std::vector<double> ece_grid(std::size_t m);
/// Mean |coverage(C_alpha_j) - (1 - alpha_j)| over the grid.
double ece(const IntervalSource& source, std::span<const double> targets, std::size_t m = 99,
           const std::vector<bool>* accepted = nullptr);
double ece(const IntervalSource& source, std::span<const double> targets,
           std::span<const double> grid, const std::vector<bool>* accepted = nullptr);

}  // namespace shiftuq::metrics
