#pragma once

// Uncertainty functions for selective prediction and the val-quantile
// acceptance threshold. Higher score means more uncertain; an input is
// accepted iff score <= tau.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "shiftuq/intervals.hpp"
#include "shiftuq/matrix.hpp"

namespace shiftuq::selective {

struct GmmOptions {
    int max_iter = 200;
    /// Stop once the log-likelihood gain drops below tol * n.
    double tol = 1e-7;
    /// Added to each covariance diagonal, relative to trace / d.
    double ridge = 1e-6;
};

/// Full-covariance Gaussian mixture.
class GmmModel {
public:
    GmmModel() = default;
    GmmModel(std::vector<double> weights, Matrix means, std::vector<Matrix> covariances,
             std::vector<double> fit_log = {});

    std::size_t k() const noexcept { return weights_.size(); }
    std::size_t dim() const noexcept { return means_.cols(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const Matrix& means() const noexcept { return means_; }
    const std::vector<Matrix>& covariances() const noexcept { return covs_; }
    /// Train log-likelihood after each accepted EM iteration (non-decreasing).
    const std::vector<double>& fit_log() const noexcept { return fit_log_; }

    /// log p(x) for each row.
    std::vector<double> log_density(const Matrix& xs) const;
    double log_density(std::span<const double> x) const;

private:
    friend GmmModel fit_gmm(const Matrix&, std::size_t, std::uint64_t, const GmmOptions&);
    /// Per-component log weight + log normalizer, and inverse Cholesky factor.
    void prepare();
    /// n x k matrix of log(pi_k) + log N(x_i; mu_k, Sigma_k).
    Matrix component_log_probs(const Matrix& xs) const;

    std::vector<double> weights_;
    Matrix means_;
    std::vector<Matrix> covs_;
    std::vector<double> fit_log_;
    std::vector<Matrix> chol_inv_;
    std::vector<double> log_coef_;
};

/// EM with k-means++ seeding drawn from `seed`.
GmmModel fit_gmm(const Matrix& features, std::size_t k, std::uint64_t seed,
                 const GmmOptions& options = {});

/// -log p(g(x)); a strictly increasing transform of the negative density.
double gmm_score(const GmmModel& model, std::span<const double> feature);
std::vector<double> gmm_scores(const GmmModel& model, const Matrix& features);

/// -log((1/M) sum_i p_i(g_i(x))).
double ensemble_gmm_score(std::span<const GmmModel> models,
                          std::span<const std::vector<double>> features_per_member);
/// Batched: features_per_member[i] holds member i's features for all inputs.
std::vector<double> ensemble_gmm_scores(std::span<const GmmModel> models,
                                        std::span<const Matrix> features_per_member);

enum class KnnMetric { Cosine, L2 };
std::string to_string(KnnMetric metric);
KnnMetric knn_metric_from_string(const std::string& name);

/// Exact brute-force k-nearest-neighbour average distance.
class KnnScorer {
public:
    KnnScorer() = default;
    KnnScorer(Matrix reference, std::size_t k, KnnMetric metric = KnnMetric::Cosine);

    std::size_t k() const noexcept { return k_; }
    KnnMetric metric() const noexcept { return metric_; }
    const Matrix& reference() const noexcept { return reference_; }

    double score(std::span<const double> feature) const;
    std::vector<double> scores(const Matrix& features) const;

private:
    double score_with(std::span<const double> feature, std::vector<double>& dist) const;

    Matrix reference_;
    Matrix reference_t_;
    std::vector<double> ref_norms_;
    std::size_t k_ = 10;
    KnnMetric metric_ = KnnMetric::Cosine;
};

double variance_score(const intervals::GaussianPrediction& p);
double ensemble_variance_score(std::span<const double> member_means);

struct Threshold {
    double tau = 0.0;
    double quantile = 0.95;
};

Threshold select_threshold(std::span<const double> val_scores, double quantile = 0.95);
inline bool accept(double score, const Threshold& t) noexcept { return score <= t.tau; }
std::vector<bool> accept_mask(std::span<const double> scores, const Threshold& t);

nlohmann::json to_json(const GmmModel& model);
GmmModel gmm_from_json(const nlohmann::json& j);
nlohmann::json to_json(const KnnScorer& scorer);
KnnScorer knn_from_json(const nlohmann::json& j);

}  // namespace shiftuq::selective
