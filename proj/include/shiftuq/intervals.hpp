#pragma once

#include <span>

namespace shiftuq::intervals {

struct PredictionInterval {
    double lower = 0.0;
    double upper = 0.0;
    double point = 0.0;
    double alpha = 0.1;

    double length() const noexcept { return upper - lower; }
    bool contains(double y) const noexcept { return y >= lower && y <= upper; }
};

/// sigma2 >= 0; zero only arises from a degenerate direct ensemble.
struct GaussianPrediction {
    double mu = 0.0;
    double sigma2 = 1.0;
};

/// Q_{1-alpha} of absolute calibration residuals (conformal order statistic).
double conformal_halfwidth(std::span<const double> residuals, double alpha);
PredictionInterval conformal_interval(double prediction, double halfwidth, double alpha);

/// mu -+ sigma * Phi^{-1}(1 - alpha/2), point = mu.
PredictionInterval gaussian_interval(const GaussianPrediction& p, double alpha);

/// Quantile crossing is resolved by ordering the two outputs; `crossed`
/// (if given) reports whether that happened.
PredictionInterval quantile_interval(double q_lo, double q_up, double alpha = 0.1,
                                     bool* crossed = nullptr);

/// Mean of member means; mean of (disagreement^2 + member variance).
GaussianPrediction fuse_gaussian_ensemble(std::span<const GaussianPrediction> members);

/// Mean and population variance of member point predictions.
GaussianPrediction direct_ensemble_stats(std::span<const double> preds);

}  // namespace shiftuq::intervals
