#include "shiftuq/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shiftuq/statkit.hpp"

namespace shiftuq::intervals {

namespace {
void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
}
}  // namespace

double conformal_halfwidth(std::span<const double> residuals, double alpha) {
    if (residuals.empty()) throw std::invalid_argument("empty residuals");
    check_alpha(alpha);
    return stat::empirical_quantile(residuals, 1.0 - alpha);
}

PredictionInterval conformal_interval(double prediction, double halfwidth, double alpha) {
    return {prediction - halfwidth, prediction + halfwidth, prediction, alpha};
}

PredictionInterval gaussian_interval(const GaussianPrediction& p, double alpha) {
    check_alpha(alpha);
    if (!(p.sigma2 >= 0.0)) throw std::invalid_argument("gaussian interval needs sigma^2 >= 0");
    const double half = std::sqrt(p.sigma2) * stat::inv_std_normal_cdf(1.0 - alpha / 2.0);
    return {p.mu - half, p.mu + half, p.mu, alpha};
}

PredictionInterval quantile_interval(double q_lo, double q_up, double alpha, bool* crossed) {
    if (crossed) *crossed = q_lo > q_up;
    const double lo = std::min(q_lo, q_up), hi = std::max(q_lo, q_up);
    return {lo, hi, lo + 0.5 * (hi - lo), alpha};
}

GaussianPrediction fuse_gaussian_ensemble(std::span<const GaussianPrediction> members) {
    if (members.size() < 2) throw std::invalid_argument("ensemble needs at least 2 members");
    const double m = static_cast<double>(members.size());
    double mu = 0.0;
    for (const auto& p : members) mu += p.mu;
    mu /= m;
    double var = 0.0;
    for (const auto& p : members) var += (mu - p.mu) * (mu - p.mu) + p.sigma2;
    return {mu, var / m};
}

GaussianPrediction direct_ensemble_stats(std::span<const double> preds) {
    if (preds.size() < 2) throw std::invalid_argument("ensemble needs at least 2 members");
    return {stat::mean(preds), stat::population_variance(preds)};
}

}  // namespace shiftuq::intervals
