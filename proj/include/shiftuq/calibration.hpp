#pragma once

// Val-set recalibration: conformity scores E_i = max(L_i - y_i, y_i - U_i),
// offset q = Q_{1-alpha}(E), calibrated interval [L - q, U + q].

#include <span>
#include <vector>

#include "shiftuq/intervals.hpp"
#include "shiftuq/matrix.hpp"
#include "shiftuq/nn.hpp"

namespace shiftuq::calibration {

using intervals::PredictionInterval;

struct ConformityScores {
    std::vector<double> scores;
    double alpha = 0.1;
    std::size_t source_size = 0;
};

struct CalibrationOffset {
    double q = 0.0;
};

struct CalibrationStats {
    /// Intervals collapsed to zero width by a negative offset.
    std::size_t collapsed = 0;
};

ConformityScores conformity_scores(std::span<const PredictionInterval> intervals,
                                   std::span<const double> targets);
CalibrationOffset calibration_offset(const ConformityScores& scores);

/// Widens (q > 0) or shrinks (q < 0) every interval by q on both sides. An
/// interval that would invert collapses to zero width at its point.
std::vector<PredictionInterval> calibrate(std::span<const PredictionInterval> intervals,
                                          CalibrationOffset offset,
                                          CalibrationStats* stats = nullptr);
PredictionInterval calibrate_one(const PredictionInterval& interval, CalibrationOffset offset,
                                 bool* collapsed = nullptr);

/// Split conformal around a direct-head model, with the val split as the
/// calibration set.
std::vector<PredictionInterval> split_conformal(const nn::TrainedModel& model, const Matrix& cal_x,
                                                std::span<const double> cal_y,
                                                const Matrix& test_x, double alpha);

}  // namespace shiftuq::calibration
