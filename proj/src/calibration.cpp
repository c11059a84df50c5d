#include "shiftuq/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shiftuq/statkit.hpp"

namespace shiftuq::calibration {

ConformityScores conformity_scores(std::span<const PredictionInterval> intervals,
                                   std::span<const double> targets) {
    if (intervals.size() != targets.size())
        throw std::invalid_argument("conformity scores: intervals and targets differ in length");
    if (intervals.empty()) throw std::invalid_argument("conformity scores: empty input");
    ConformityScores out;
    out.alpha = intervals.front().alpha;
    out.source_size = intervals.size();
    out.scores.reserve(intervals.size());
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        if (intervals[i].alpha != out.alpha)
            throw std::invalid_argument("conformity scores: mixed alpha across intervals");
        out.scores.push_back(
            std::max(intervals[i].lower - targets[i], targets[i] - intervals[i].upper));
    }
    return out;
}

CalibrationOffset calibration_offset(const ConformityScores& scores) {
    return {stat::empirical_quantile(scores.scores, 1.0 - scores.alpha)};
}

PredictionInterval calibrate_one(const PredictionInterval& in, CalibrationOffset offset,
                                 bool* collapsed) {
    PredictionInterval out = in;
    out.lower = in.lower - offset.q;
    out.upper = in.upper + offset.q;
    bool c = false;
    if (out.lower > in.point || out.upper < in.point || out.lower > out.upper) {
        out.lower = out.upper = in.point;
        c = true;
    }
    if (collapsed) *collapsed = c;
    return out;
}

std::vector<PredictionInterval> calibrate(std::span<const PredictionInterval> intervals,
                                          CalibrationOffset offset, CalibrationStats* stats) {
    if (!std::isfinite(offset.q)) throw std::invalid_argument("calibration offset must be finite");
    std::vector<PredictionInterval> out;
    out.reserve(intervals.size());
    std::size_t collapsed = 0;
    for (const auto& iv : intervals) {
        bool c = false;
        out.push_back(calibrate_one(iv, offset, &c));
        collapsed += c ? 1 : 0;
    }
    if (stats) stats->collapsed = collapsed;
    return out;
}

std::vector<PredictionInterval> split_conformal(const nn::TrainedModel& model, const Matrix& cal_x,
                                                std::span<const double> cal_y,
                                                const Matrix& test_x, double alpha) {
    if (model.architecture.head != nn::Head::Direct)
        throw std::invalid_argument("split conformal needs a direct-head model");
    if (cal_x.rows() == 0) throw std::invalid_argument("empty calibration set");
    if (cal_x.rows() != cal_y.size())
        throw std::invalid_argument("calibration inputs and targets differ in length");
    const auto cal_pred = nn::forward_batch(model, cal_x, false).values;
    std::vector<double> residuals(cal_y.size());
    for (std::size_t i = 0; i < cal_y.size(); ++i) residuals[i] = std::abs(cal_y[i] - cal_pred(i, 0));
    const double q = intervals::conformal_halfwidth(residuals, alpha);

    const auto test_pred = nn::forward_batch(model, test_x, false).values;
    std::vector<PredictionInterval> out;
    out.reserve(test_x.rows());
    for (std::size_t i = 0; i < test_x.rows(); ++i)
        out.push_back(intervals::conformal_interval(test_pred(i, 0), q, alpha));
    return out;
}

}  // namespace shiftuq::calibration
