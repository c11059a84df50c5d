#include "shiftuq/selective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "shiftuq/kernels.hpp"
#include "shiftuq/statkit.hpp"

namespace shiftuq::selective {

namespace {

constexpr double kLog2Pi = 1.83787706640934548356;

/// Lower Cholesky factor; throws if the matrix is not positive definite.
Matrix cholesky(const Matrix& a) {
    const std::size_t d = a.rows();
    Matrix l(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = a(j, j);
        for (std::size_t p = 0; p < j; ++p) s -= l(j, p) * l(j, p);
        if (!(s > 0.0)) throw std::runtime_error("covariance is not positive definite");
        l(j, j) = std::sqrt(s);
        for (std::size_t i = j + 1; i < d; ++i) {
            double t = a(i, j);
            for (std::size_t p = 0; p < j; ++p) t -= l(i, p) * l(j, p);
            l(i, j) = t / l(j, j);
        }
    }
    return l;
}

Matrix lower_inverse(const Matrix& l) {
    const std::size_t d = l.rows();
    Matrix inv(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        inv(j, j) = 1.0 / l(j, j);
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = 0.0;
            for (std::size_t p = j; p < i; ++p) s += l(i, p) * inv(p, j);
            inv(i, j) = -s / l(i, i);
        }
    }
    return inv;
}

void check_finite(const Matrix& x) {
    for (double v : x.flat())
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
}

}  // namespace

GmmModel::GmmModel(std::vector<double> weights, Matrix means, std::vector<Matrix> covariances,
                   std::vector<double> fit_log)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      covs_(std::move(covariances)),
      fit_log_(std::move(fit_log)) {
    if (weights_.empty() || weights_.size() != means_.rows() || weights_.size() != covs_.size())
        throw std::invalid_argument("gmm: inconsistent component counts");
    for (const auto& c : covs_)
        if (c.rows() != means_.cols() || c.cols() != means_.cols())
            throw std::invalid_argument("gmm: covariance shape mismatch");
    prepare();
}

void GmmModel::prepare() {
    const std::size_t d = dim();
    chol_inv_.clear();
    log_coef_.clear();
    for (std::size_t c = 0; c < k(); ++c) {
        const Matrix l = cholesky(covs_[c]);
        double log_det = 0.0;
        for (std::size_t j = 0; j < d; ++j) log_det += 2.0 * std::log(l(j, j));
        chol_inv_.push_back(lower_inverse(l));
        log_coef_.push_back(std::log(weights_[c]) - 0.5 * (static_cast<double>(d) * kLog2Pi + log_det));
    }
}

Matrix GmmModel::component_log_probs(const Matrix& xs) const {
    const std::size_t n = xs.rows(), d = dim();
    if (xs.cols() != d) throw std::invalid_argument("gmm: feature dimension mismatch");
    Matrix out(n, k());
    std::vector<double> centered(n * d), z(n * d), linv_t(d * d);
    for (std::size_t c = 0; c < k(); ++c) {
        const auto mu = means_.row(c);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) centered[i * d + j] = xs(i, j) - mu[j];
        kernels::transpose(d, d, chol_inv_[c].data(), linv_t.data());
        std::fill(z.begin(), z.end(), 0.0);
        kernels::gemm_acc(n, d, d, centered.data(), linv_t.data(), z.data());
        for (std::size_t i = 0; i < n; ++i) {
            const double maha = kernels::dot(z.data() + i * d, z.data() + i * d, d);
            out(i, c) = log_coef_[c] - 0.5 * maha;
        }
    }
    return out;
}

std::vector<double> GmmModel::log_density(const Matrix& xs) const {
    const Matrix lp = component_log_probs(xs);
    std::vector<double> out(xs.rows());
    for (std::size_t i = 0; i < xs.rows(); ++i) out[i] = stat::log_sum_exp(lp.row(i));
    return out;
}

double GmmModel::log_density(std::span<const double> x) const {
    Matrix xs(1, x.size(), std::vector<double>(x.begin(), x.end()));
    return log_density(xs).front();
}

namespace {

struct MStepResult {
    std::vector<double> weights;
    Matrix means;
    std::vector<Matrix> covs;
};

MStepResult m_step(const Matrix& x, const Matrix& resp, double ridge_rel,
                   const Matrix& fallback_means, const Matrix& global_cov) {
    const std::size_t n = x.rows(), d = x.cols(), k = resp.cols();
    MStepResult r{std::vector<double>(k), Matrix(k, d), {}};
    std::vector<double> w(n * d), wt(d * n);
    for (std::size_t c = 0; c < k; ++c) {
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) nk += resp(i, c);
        Matrix cov(d, d);
        if (nk < 1e-10 * static_cast<double>(n)) {
            // Empty component: keep it alive at its seed with the global spread.
            nk = 1e-10 * static_cast<double>(n);
            for (std::size_t j = 0; j < d; ++j) r.means(c, j) = fallback_means(c, j);
            cov = global_cov;
        } else {
            auto mu = r.means.row(c);
            for (std::size_t i = 0; i < n; ++i)
                kernels::axpy(resp(i, c), x.row(i).data(), mu.data(), d);
            for (auto& v : mu) v /= nk;
            for (std::size_t i = 0; i < n; ++i) {
                const double s = std::sqrt(resp(i, c));
                for (std::size_t j = 0; j < d; ++j) w[i * d + j] = s * (x(i, j) - mu[j]);
            }
            kernels::transpose(n, d, w.data(), wt.data());
            kernels::gemm_acc(d, d, n, wt.data(), w.data(), cov.data());
            for (auto& v : cov.storage()) v /= nk;
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < a; ++b) cov(a, b) = cov(b, a) = 0.5 * (cov(a, b) + cov(b, a));
        }
        double trace = 0.0;
        for (std::size_t j = 0; j < d; ++j) trace += cov(j, j);
        const double ridge = std::max(ridge_rel * trace / static_cast<double>(d), 1e-12);
        for (std::size_t j = 0; j < d; ++j) cov(j, j) += ridge;
        r.weights[c] = nk;
        r.covs.push_back(std::move(cov));
    }
    double total = 0.0;
    for (double v : r.weights) total += v;
    for (double& v : r.weights) v /= total;
    return r;
}

}  // namespace

GmmModel fit_gmm(const Matrix& x, std::size_t k, std::uint64_t seed, const GmmOptions& options) {
    const std::size_t n = x.rows(), d = x.cols();
    if (k == 0) throw std::invalid_argument("gmm: k must be >= 1");
    if (d == 0) throw std::invalid_argument("gmm: features must have dimension >= 1");
    if (n < k) throw std::invalid_argument("gmm: fewer samples than components");
    check_finite(x);

    // k-means++ seeding.
    stat::Rng rng = stat::Rng(seed).substream({stat::tag("gmm-init")});
    Matrix centers(0, d);
    centers.append_row(x.row(rng.below(n)));
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    while (centers.rows() < k) {
        const auto last = centers.row(centers.rows() - 1);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += (x(i, j) - last[j]) * (x(i, j) - last[j]);
            min_d2[i] = std::min(min_d2[i], s);
            total += min_d2[i];
        }
        std::size_t pick = rng.below(n);
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                u -= min_d2[i];
                if (u <= 0.0 || i + 1 == n) {
                    pick = i;
                    break;
                }
            }
        }
        centers.append_row(x.row(pick));
    }

    Matrix resp(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += (x(i, j) - centers(c, j)) * (x(i, j) - centers(c, j));
            if (s < best_d) {
                best_d = s;
                best = c;
            }
        }
        resp(i, best) = 1.0;
    }

    Matrix global_cov(d, d);
    {
        Matrix ones(n, 1, 1.0);
        auto g = m_step(x, ones, 0.0, centers, Matrix(d, d));
        global_cov = g.covs.front();
    }

    auto build = [&](const Matrix& r) {
        auto m = m_step(x, r, options.ridge, centers, global_cov);
        GmmModel model;
        model.weights_ = std::move(m.weights);
        model.means_ = std::move(m.means);
        model.covs_ = std::move(m.covs);
        model.prepare();
        return model;
    };
    // Total log-likelihood; fills responsibilities.
    auto e_step = [&x, n, k](const GmmModel& m, Matrix& r) {
        const Matrix lp = m.component_log_probs(x);
        r = Matrix(n, k);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double li = stat::log_sum_exp(lp.row(i));
            total += li;
            for (std::size_t c = 0; c < k; ++c) r(i, c) = std::exp(lp(i, c) - li);
        }
        return total;
    };

    GmmModel current = build(resp);
    double ll = e_step(current, resp);
    std::vector<double> log{ll};
    const double min_gain = options.tol * static_cast<double>(n);
    for (int it = 1; it < options.max_iter; ++it) {
        GmmModel candidate = build(resp);
        Matrix cand_resp;
        const double cand_ll = e_step(candidate, cand_resp);
        // The covariance ridge can make a step lose likelihood near the optimum.
        if (!(cand_ll >= ll)) break;
        current = std::move(candidate);
        resp = std::move(cand_resp);
        log.push_back(cand_ll);
        const double gain = cand_ll - ll;
        ll = cand_ll;
        if (gain < min_gain) break;
    }
    current.fit_log_ = std::move(log);
    return current;
}

double gmm_score(const GmmModel& model, std::span<const double> feature) {
    if (feature.size() != model.dim()) throw std::invalid_argument("gmm: feature dimension mismatch");
    return -model.log_density(feature);
}

std::vector<double> gmm_scores(const GmmModel& model, const Matrix& features) {
    auto out = model.log_density(features);
    for (double& v : out) v = -v;
    return out;
}

double ensemble_gmm_score(std::span<const GmmModel> models,
                          std::span<const std::vector<double>> features_per_member) {
    if (models.empty() || models.size() != features_per_member.size())
        throw std::invalid_argument("ensemble gmm: one feature vector per member required");
    std::vector<double> logs;
    for (std::size_t i = 0; i < models.size(); ++i)
        logs.push_back(models[i].log_density(features_per_member[i]));
    return -(stat::log_sum_exp(logs) - std::log(static_cast<double>(models.size())));
}

std::vector<double> ensemble_gmm_scores(std::span<const GmmModel> models,
                                        std::span<const Matrix> features_per_member) {
    if (models.empty() || models.size() != features_per_member.size())
        throw std::invalid_argument("ensemble gmm: one feature matrix per member required");
    const std::size_t n = features_per_member.front().rows();
    std::vector<std::vector<double>> per_member;
    for (std::size_t i = 0; i < models.size(); ++i) {
        if (features_per_member[i].rows() != n)
            throw std::invalid_argument("ensemble gmm: members disagree on input count");
        per_member.push_back(models[i].log_density(features_per_member[i]));
    }
    const double log_m = std::log(static_cast<double>(models.size()));
    std::vector<double> out(n), logs(models.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < models.size(); ++i) logs[i] = per_member[i][r];
        out[r] = -(stat::log_sum_exp(logs) - log_m);
    }
    return out;
}

std::string to_string(KnnMetric metric) { return metric == KnnMetric::Cosine ? "cosine" : "l2"; }

KnnMetric knn_metric_from_string(const std::string& name) {
    if (name == "cosine") return KnnMetric::Cosine;
    if (name == "l2") return KnnMetric::L2;
    throw std::invalid_argument("unknown knn metric '" + name + "'");
}

namespace {
double sequential_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s = s + x * x;
    return std::sqrt(s);
}
}  // namespace

KnnScorer::KnnScorer(Matrix reference, std::size_t k, KnnMetric metric)
    : reference_(std::move(reference)), k_(k), metric_(metric) {
    if (reference_.rows() == 0) throw std::invalid_argument("knn: empty reference set");
    if (k_ == 0 || k_ > reference_.rows()) throw std::invalid_argument("knn: need 1 <= k <= n");
    check_finite(reference_);
    reference_t_ = Matrix(reference_.cols(), reference_.rows());
    kernels::transpose(reference_.rows(), reference_.cols(), reference_.data(), reference_t_.data());
    if (metric_ == KnnMetric::Cosine) {
        for (std::size_t i = 0; i < reference_.rows(); ++i) {
            const double nrm = sequential_norm(reference_.row(i));
            if (!(nrm > 0.0)) throw std::invalid_argument("undefined cosine distance: zero reference row");
            ref_norms_.push_back(nrm);
        }
    }
}

double KnnScorer::score_with(std::span<const double> q, std::vector<double>& dist) const {
    const std::size_t n = reference_.rows(), d = reference_.cols();
    if (q.size() != d) throw std::invalid_argument("knn: feature dimension mismatch");
    dist.resize(n);
    if (metric_ == KnnMetric::Cosine) {
        const double qn = sequential_norm(q);
        if (!(qn > 0.0)) throw std::invalid_argument("undefined cosine distance");
        kernels::dot_to_rows(q.data(), reference_t_.data(), d, n, dist.data());
        for (std::size_t j = 0; j < n; ++j) dist[j] = 1.0 - dist[j] / (qn * ref_norms_[j]);
    } else {
        kernels::sq_dist_to_rows(q.data(), reference_t_.data(), d, n, dist.data());
        for (std::size_t j = 0; j < n; ++j) dist[j] = std::sqrt(dist[j]);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    double s = 0.0;
    for (std::size_t j = 0; j < k_; ++j) s += dist[j];
    return s / static_cast<double>(k_);
}

double KnnScorer::score(std::span<const double> feature) const {
    std::vector<double> dist;
    return score_with(feature, dist);
}

std::vector<double> KnnScorer::scores(const Matrix& features) const {
    std::vector<double> out(features.rows()), dist;
    for (std::size_t i = 0; i < features.rows(); ++i) out[i] = score_with(features.row(i), dist);
    return out;
}

double variance_score(const intervals::GaussianPrediction& p) { return p.sigma2; }

double ensemble_variance_score(std::span<const double> member_means) {
    return stat::population_variance(member_means);
}

Threshold select_threshold(std::span<const double> val_scores, double quantile) {
    if (val_scores.empty()) throw std::invalid_argument("threshold: empty score set");
    return {stat::empirical_quantile(val_scores, quantile), quantile};
}

std::vector<bool> accept_mask(std::span<const double> scores, const Threshold& t) {
    std::vector<bool> mask(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) mask[i] = accept(scores[i], t);
    return mask;
}

nlohmann::json to_json(const GmmModel& m) {
    nlohmann::json covs = nlohmann::json::array();
    for (const auto& c : m.covariances()) covs.push_back(std::vector<double>(c.flat().begin(), c.flat().end()));
    return {{"format", "shiftuq-gmm"},
            {"version", 1},
            {"dim", m.dim()},
            {"weights", m.weights()},
            {"means", std::vector<double>(m.means().flat().begin(), m.means().flat().end())},
            {"covariances", covs},
            {"fit_log", m.fit_log()}};
}

GmmModel gmm_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "shiftuq-gmm") throw std::invalid_argument("not a gmm checkpoint");
    const auto d = j.at("dim").get<std::size_t>();
    auto weights = j.at("weights").get<std::vector<double>>();
    Matrix means(weights.size(), d, j.at("means").get<std::vector<double>>());
    std::vector<Matrix> covs;
    for (const auto& c : j.at("covariances")) covs.emplace_back(d, d, c.get<std::vector<double>>());
    return GmmModel(std::move(weights), std::move(means), std::move(covs),
                    j.at("fit_log").get<std::vector<double>>());
}

nlohmann::json to_json(const KnnScorer& s) {
    const Matrix& r = s.reference();
    return {{"format", "shiftuq-knn"},
            {"version", 1},
            {"k", s.k()},
            {"metric", to_string(s.metric())},
            {"rows", r.rows()},
            {"dim", r.cols()},
            {"reference", std::vector<double>(r.flat().begin(), r.flat().end())}};
}

KnnScorer knn_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "shiftuq-knn") throw std::invalid_argument("not a knn checkpoint");
    Matrix ref(j.at("rows").get<std::size_t>(), j.at("dim").get<std::size_t>(),
               j.at("reference").get<std::vector<double>>());
    return KnnScorer(std::move(ref), j.at("k").get<std::size_t>(),
                     knn_metric_from_string(j.at("metric").get<std::string>()));
}

}  // namespace shiftuq::selective
