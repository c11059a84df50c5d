#include "shiftuq/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace shiftuq::metrics {

double coverage(std::span<const PredictionInterval> intervals, std::span<const double> targets,
                const std::vector<bool>* accepted) {
    if (intervals.size() != targets.size())
        throw std::invalid_argument("coverage: intervals and targets differ in length");
    if (accepted && accepted->size() != targets.size())
        throw std::invalid_argument("coverage: mask length mismatch");
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (accepted && !(*accepted)[i]) continue;
        ++total;
        hit += intervals[i].contains(targets[i]) ? 1 : 0;
    }
    if (total == 0) throw std::invalid_argument("empty selective subset");
    return static_cast<double>(hit) / static_cast<double>(total);
}

double prediction_rate(const std::vector<bool>& accepted) {
    if (accepted.empty()) throw std::invalid_argument("prediction rate of empty input");
    std::size_t k = 0;
    for (bool a : accepted) k += a ? 1 : 0;
    return static_cast<double>(k) / static_cast<double>(accepted.size());
}

double prediction_rate(std::span<const double> scores, double tau) {
    std::vector<bool> mask(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) mask[i] = scores[i] <= tau;
    return prediction_rate(mask);
}

double mae(std::span<const double> points, std::span<const double> targets) {
    if (points.size() != targets.size()) throw std::invalid_argument("mae: length mismatch");
    if (points.empty()) throw std::invalid_argument("mae of empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += std::abs(points[i] - targets[i]);
    return s / static_cast<double>(points.size());
}

double mean_interval_length(std::span<const PredictionInterval> intervals) {
    if (intervals.empty()) throw std::invalid_argument("interval length of empty input");
    double s = 0.0;
    for (const auto& iv : intervals) s += iv.length();
    return s / static_cast<double>(intervals.size());
}

double coverage_error(double coverage, double alpha) noexcept {
    return std::abs(coverage - (1.0 - alpha));
}

std::vector<double> ece_grid(std::size_t m) {
    if (m == 0) throw std::invalid_argument("ece grid needs m >= 1");
    std::vector<double> g(m);
    for (std::size_t j = 1; j <= m; ++j) g[j - 1] = static_cast<double>(j) / static_cast<double>(m + 1);
    return g;
}

double ece(const IntervalSource& source, std::span<const double> targets, std::size_t m,
           const std::vector<bool>* accepted) {
    const auto grid = ece_grid(m);
    return ece(source, targets, grid, accepted);
}

double ece(const IntervalSource& source, std::span<const double> targets,
           std::span<const double> grid, const std::vector<bool>* accepted) {
    if (grid.empty()) throw std::invalid_argument("ece grid is empty");
    double s = 0.0;
    for (double a : grid) {
        std::vector<PredictionInterval> ivs;
        try {
            ivs = source(a);
        } catch (const std::exception& e) {
            throw std::runtime_error("ece: interval method failed at alpha=" + std::to_string(a) +
                                     ": " + e.what());
        }
        s += std::abs(coverage(ivs, targets, accepted) - (1.0 - a));
    }
    return s / static_cast<double>(grid.size());
}

}  // namespace shiftuq::metrics
