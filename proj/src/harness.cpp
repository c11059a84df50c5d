#include "shiftuq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "shiftuq/calibration.hpp"
#include "shiftuq/intervals.hpp"
#include "shiftuq/selective.hpp"
#include "shiftuq/statkit.hpp"

namespace shiftuq::harness {

using intervals::GaussianPrediction;
using intervals::PredictionInterval;

std::size_t worker_count() {
    if (const char* env = std::getenv("SHIFTUQ_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t workers) {
    if (workers == 0) workers = worker_count();
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < std::min(workers, n); ++t)
            threads.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

MetricVector metric_vector(const metrics::MetricsReport& m) {
    return {m.coverage,
            m.prediction_rate,
            m.mae_val,
            m.interval_length_val,
            m.ece,
            m.coverage_error,
            static_cast<double>(m.n_evaluated),
            m.val_coverage,
            m.tau,
            static_cast<double>(m.quantile_crossings),
            static_cast<double>(m.collapsed_intervals)};
}

metrics::MetricsReport metrics_from_vector(const MetricVector& v, double alpha) {
    metrics::MetricsReport m;
    m.coverage = v[0];
    m.prediction_rate = v[1];
    m.mae_val = v[2];
    m.interval_length_val = v[3];
    m.ece = v[4];
    m.coverage_error = v[5];
    m.n_evaluated = static_cast<std::size_t>(v[6]);
    m.val_coverage = v[7];
    m.tau = v[8];
    m.quantile_crossings = static_cast<std::size_t>(v[9]);
    m.collapsed_intervals = static_cast<std::size_t>(v[10]);
    m.alpha = alpha;
    return m;
}

Summary summarize(const std::vector<RepeatResult>& repeats) {
    Summary s;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean.fill(nan);
    s.std.fill(nan);
    std::vector<MetricVector> ok;
    std::size_t failed = 0;
    std::string first_error;
    for (const auto& r : repeats) {
        if (r.ok) {
            ok.push_back(metric_vector(r.metrics));
        } else {
            if (failed++ == 0) first_error = r.message;
        }
    }
    s.n = ok.size();
    if (ok.empty()) {
        s.status = "failed";
        s.message = first_error.empty() ? "no repeats" : first_error;
        return s;
    }
    for (std::size_t c = 0; c < kMetricNames.size(); ++c) {
        std::vector<double> col;
        for (const auto& v : ok) col.push_back(v[c]);
        s.mean[c] = stat::mean(col);
        s.std[c] = stat::sample_stddev(col);
    }
    s.status = ok.size() == 1 ? "n=1" : "ok";
    if (failed > 0)
        s.message = std::to_string(failed) + " of " + std::to_string(repeats.size()) +
                    " repeats failed: " + first_error;
    return s;
}

std::vector<ReportRow> aggregate(std::vector<ReportRow> rows) {
    for (auto& r : rows) r.summary = summarize(r.repeats);
    return rows;
}

const ModelPool* PoolSet::find(nn::Head head) const {
    const std::optional<ModelPool>* p = head == nn::Head::Direct     ? &direct
                                        : head == nn::Head::Gaussian ? &gaussian
                                                                     : &quantile;
    return p->has_value() ? &**p : nullptr;
}

std::string pool_name(nn::Head head) { return nn::to_string(head); }

std::uint64_t member_seed(std::uint64_t seed, const std::string& dataset_id, nn::Head head,
                          std::size_t index) {
    return stat::Rng(seed)
        .substream({stat::tag(dataset_id), stat::tag("pool"), stat::tag(pool_name(head)), index})
        .next_u64();
}

namespace {

std::vector<nn::Head> heads_needed(const ExperimentConfig& config) {
    std::set<nn::Head> heads;
    for (const auto& m : config.methods) heads.insert(m.head());
    return {heads.begin(), heads.end()};
}

nn::Architecture architecture_for(const ExperimentConfig& config, std::size_t input_dim,
                                  nn::Head head) {
    nn::Architecture a = config.architecture;
    a.input_dim = input_dim;
    a.head = head;
    if (a.is_linear()) a.feature_dim = input_dim;
    return a;
}

std::optional<ModelPool>& slot(PoolSet& pools, nn::Head head) {
    return head == nn::Head::Direct ? pools.direct
           : head == nn::Head::Gaussian ? pools.gaussian
                                        : pools.quantile;
}

}  // namespace

PoolSet train_pools(const ExperimentConfig& config, const std::string& dataset_id,
                    const synth::Dataset& dataset, std::ostream* log) {
    const synth::SplitData train = dataset.subset(synth::Split::Train);
    if (train.y.empty()) throw std::invalid_argument("dataset '" + dataset_id + "' has no train rows");

    struct Job {
        nn::Head head;
        std::size_t index;
    };
    std::vector<Job> jobs;
    PoolSet pools;
    for (nn::Head head : heads_needed(config)) {
        auto& p = slot(pools, head);
        p.emplace();
        p->head = head;
        p->models.resize(config.n_models_trained);
        p->errors.resize(config.n_models_trained);
        for (std::size_t i = 0; i < config.n_models_trained; ++i) jobs.push_back({head, i});
    }

    std::mutex log_mutex;
    parallel_for(jobs.size(), [&](std::size_t j) {
        const Job job = jobs[j];
        ModelPool& pool = *slot(pools, job.head);
        const std::uint64_t seed = member_seed(config.seed, dataset_id, job.head, job.index);
        nn::TrainHyper hyper = config.hyper;
        hyper.seed = seed;
        try {
            auto model = nn::init_model(architecture_for(config, dataset.dim(), job.head), seed);
            pool.models[job.index] = nn::train(std::move(model), train.x, train.y, hyper, config.alpha);
        } catch (const std::exception& e) {
            pool.errors[job.index] = e.what();
        }
        if (log) {
            std::lock_guard lock(log_mutex);
            *log << "[" << dataset_id << "] trained " << pool_name(job.head) << " model "
                 << job.index << (pool.errors[job.index].empty() ? "" : " (failed)") << "\n";
        }
    });
    return pools;
}

namespace {

/// k distinct indices from [0, n) by partial Fisher-Yates.
std::vector<std::size_t> draw_without_replacement(stat::Rng rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(k);
    return idx;
}

bool needs_features(const MethodId& m) {
    return m.kind == MethodKind::GaussSelGmm || m.kind == MethodKind::GaussSelKnn ||
           m.kind == MethodKind::GaussEnsSelGmm;
}

/// Everything a cell needs from one pool member.
struct MemberCache {
    std::string error;
    /// Columns of the head output on val and test.
    std::vector<double> val_a, val_b, test_a, test_b;
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> gmm_scores;
    std::map<std::pair<std::size_t, selective::KnnMetric>,
             std::pair<std::vector<double>, std::vector<double>>>
        knn_scores;
    /// Kept for ensemble GMM scoring.
    std::map<std::size_t, selective::GmmModel> gmms;
    Matrix val_f, test_f;
};

struct Needs {
    bool features = false;
    std::set<std::size_t> gmm_k;
    std::set<std::pair<std::size_t, selective::KnnMetric>> knn;
    bool keep_features = false;
};

/// Raw intervals for val and test at a requested alpha, before calibration.
using RawSource =
    std::function<void(double, std::vector<PredictionInterval>&, std::vector<PredictionInterval>&)>;

struct CellInputs {
    RawSource raw;
    std::vector<double> val_points;
    bool selective = false;
    std::vector<double> val_scores, test_scores;
    std::size_t crossings = 0;
};

std::vector<GaussianPrediction> gaussians(const std::vector<double>& mu,
                                          const std::vector<double>& s2) {
    std::vector<GaussianPrediction> out(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) out[i] = {mu[i], s2[i]};
    return out;
}

RawSource gaussian_source(std::vector<GaussianPrediction> val, std::vector<GaussianPrediction> test) {
    return [val = std::move(val), test = std::move(test)](double a, auto& rv, auto& rt) {
        rv.resize(val.size());
        rt.resize(test.size());
        for (std::size_t i = 0; i < val.size(); ++i) rv[i] = intervals::gaussian_interval(val[i], a);
        for (std::size_t i = 0; i < test.size(); ++i) rt[i] = intervals::gaussian_interval(test[i], a);
    };
}

std::vector<double> mus(const std::vector<GaussianPrediction>& ps) {
    std::vector<double> out(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) out[i] = ps[i].mu;
    return out;
}

metrics::MetricsReport evaluate_cell(const CellInputs& in, const synth::SplitData& val,
                                     const synth::SplitData& test, double alpha,
                                     const ExperimentConfig& config) {
    metrics::MetricsReport r;
    r.alpha = alpha;
    r.quantile_crossings = in.crossings;

    auto calibrated = [&](double a, calibration::CalibrationStats* stats,
                          std::vector<PredictionInterval>* cal_val) {
        std::vector<PredictionInterval> rv, rt;
        in.raw(a, rv, rt);
        const auto offset =
            calibration::calibration_offset(calibration::conformity_scores(rv, val.y));
        if (cal_val) *cal_val = calibration::calibrate(rv, offset);
        return calibration::calibrate(rt, offset, stats);
    };

    calibration::CalibrationStats stats;
    std::vector<PredictionInterval> cal_val;
    const auto cal_test = calibrated(alpha, &stats, &cal_val);
    r.collapsed_intervals = stats.collapsed;
    r.val_coverage = metrics::coverage(cal_val, val.y);
    r.mae_val = metrics::mae(in.val_points, val.y);
    r.interval_length_val = metrics::mean_interval_length(cal_val);

    std::optional<std::vector<bool>> mask;
    if (in.selective) {
        const auto thr = selective::select_threshold(in.val_scores, config.threshold_quantile);
        mask = selective::accept_mask(in.test_scores, thr);
        r.tau = thr.tau;
        r.prediction_rate = metrics::prediction_rate(*mask);
        r.n_evaluated = static_cast<std::size_t>(std::count(mask->begin(), mask->end(), true));
    } else {
        r.prediction_rate = 1.0;
        r.n_evaluated = test.y.size();
    }
    const std::vector<bool>* mp = mask ? &*mask : nullptr;
    r.coverage = metrics::coverage(cal_test, test.y, mp);
    r.coverage_error = metrics::coverage_error(r.coverage, alpha);
    r.ece = metrics::ece([&](double a) { return calibrated(a, nullptr, nullptr); }, test.y,
                         config.ece_points, mp);
    return r;
}

}  // namespace

std::vector<ReportRow> evaluate_dataset(const ExperimentConfig& config,
                                        const std::string& dataset_id,
                                        const synth::Dataset& dataset, const PoolSet& pools,
                                        std::ostream* log) {
    const synth::SplitData train = dataset.subset(synth::Split::Train);
    const synth::SplitData val = dataset.subset(synth::Split::Val);
    const synth::SplitData test = dataset.subset(synth::Split::Test);
    if (val.y.empty()) throw std::invalid_argument("dataset '" + dataset_id + "' has no val rows");
    if (test.y.empty()) throw std::invalid_argument("dataset '" + dataset_id + "' has no test rows");

    const stat::Rng root(config.seed);
    const std::uint64_t id_tag = stat::tag(dataset_id);

    // Repeat draws, shared by every method on the same pool.
    std::map<nn::Head, std::vector<std::vector<std::size_t>>> single_draws, ensemble_draws;
    std::map<nn::Head, Needs> needs;
    std::map<nn::Head, std::set<std::size_t>> used;
    for (const auto& m : config.methods) {
        const nn::Head h = m.head();
        const std::uint64_t pool_tag = stat::tag(pool_name(h));
        auto& draws = m.ensemble() ? ensemble_draws[h] : single_draws[h];
        if (draws.empty()) {
            if (m.ensemble()) {
                for (std::size_t r = 0; r < config.n_repeats; ++r)
                    draws.push_back(draw_without_replacement(
                        root.substream({id_tag, stat::tag("ensemble"), pool_tag, r}),
                        config.n_models_trained, config.ensemble_M));
            } else {
                for (std::size_t i : draw_without_replacement(
                         root.substream({id_tag, stat::tag("select"), pool_tag}),
                         config.n_models_trained, config.n_models_selected))
                    draws.push_back({i});
            }
        }
        for (const auto& d : draws) used[h].insert(d.begin(), d.end());
        Needs& nd = needs[h];
        if (needs_features(m)) nd.features = true;
        if (m.kind == MethodKind::GaussSelGmm || m.kind == MethodKind::GaussEnsSelGmm)
            nd.gmm_k.insert(m.gmm_k);
        if (m.kind == MethodKind::GaussSelKnn) nd.knn.insert({m.knn_k, m.knn_metric});
    }

    // Per-member caches.
    std::map<nn::Head, std::map<std::size_t, MemberCache>> caches;
    struct Job {
        nn::Head head;
        std::size_t index;
    };
    std::vector<Job> jobs;
    for (const auto& [h, idx] : used) {
        const ModelPool* pool = pools.find(h);
        if (!pool) throw std::invalid_argument("no trained " + pool_name(h) + " pool");
        if (pool->models.size() < config.n_models_trained)
            throw std::invalid_argument(pool_name(h) + " pool is smaller than n_models_trained");
        for (std::size_t i : idx) {
            caches[h][i];
            jobs.push_back({h, i});
        }
    }
    parallel_for(jobs.size(), [&](std::size_t j) {
        const Job job = jobs[j];
        const ModelPool& pool = *pools.find(job.head);
        MemberCache& c = caches.at(job.head).at(job.index);
        if (!pool.errors.empty() && !pool.errors[job.index].empty()) {
            c.error = "model " + std::to_string(job.index) + ": " + pool.errors[job.index];
            return;
        }
        const nn::TrainedModel& model = pool.models[job.index];
        const Needs& nd = needs.at(job.head);
        try {
            auto vo = nn::forward_batch(model, val.x, nd.features);
            auto to = nn::forward_batch(model, test.x, nd.features);
            for (std::size_t i = 0; i < val.y.size(); ++i) {
                c.val_a.push_back(vo.values(i, 0));
                c.val_b.push_back(vo.values(i, 1));
            }
            for (std::size_t i = 0; i < test.y.size(); ++i) {
                c.test_a.push_back(to.values(i, 0));
                c.test_b.push_back(to.values(i, 1));
            }
            if (!nd.features) return;
            const Matrix train_f = nn::extract_features(model, train.x);
            for (std::size_t k : nd.gmm_k) {
                const auto seed = root.substream({id_tag, stat::tag("gmm"), job.index, k}).next_u64();
                auto gmm = selective::fit_gmm(train_f, k, seed);
                c.gmm_scores[k] = {selective::gmm_scores(gmm, vo.features),
                                   selective::gmm_scores(gmm, to.features)};
                c.gmms.emplace(k, std::move(gmm));
            }
            for (const auto& key : nd.knn) {
                selective::KnnScorer knn(train_f, key.first, key.second);
                c.knn_scores[key] = {knn.scores(vo.features), knn.scores(to.features)};
            }
            c.val_f = std::move(vo.features);
            c.test_f = std::move(to.features);
        } catch (const std::exception& e) {
            c.error = "model " + std::to_string(job.index) + ": " + e.what();
        }
    });

    auto inputs_for = [&](const MethodId& m, const std::vector<std::size_t>& members) {
        const nn::Head h = m.head();
        std::vector<const MemberCache*> cs;
        for (std::size_t i : members) {
            const MemberCache& c = caches.at(h).at(i);
            if (!c.error.empty()) throw std::runtime_error(c.error);
            cs.push_back(&c);
        }
        const std::size_t nv = val.y.size(), nt = test.y.size();
        CellInputs in;
        switch (m.kind) {
            case MethodKind::ConformalPrediction: {
                const MemberCache& c = *cs[0];
                std::vector<double> res(nv);
                for (std::size_t i = 0; i < nv; ++i) res[i] = std::abs(val.y[i] - c.val_a[i]);
                in.val_points = c.val_a;
                in.raw = [res = std::move(res), pv = c.val_a, pt = c.test_a](double a, auto& rv,
                                                                              auto& rt) {
                    const double h = intervals::conformal_halfwidth(res, a);
                    rv.resize(pv.size());
                    rt.resize(pt.size());
                    for (std::size_t i = 0; i < pv.size(); ++i)
                        rv[i] = intervals::conformal_interval(pv[i], h, a);
                    for (std::size_t i = 0; i < pt.size(); ++i)
                        rt[i] = intervals::conformal_interval(pt[i], h, a);
                };
                break;
            }
            case MethodKind::Ensemble: {
                std::vector<GaussianPrediction> gv(nv), gt(nt);
                std::vector<double> preds(cs.size());
                for (std::size_t i = 0; i < nv; ++i) {
                    for (std::size_t j = 0; j < cs.size(); ++j) preds[j] = cs[j]->val_a[i];
                    gv[i] = intervals::direct_ensemble_stats(preds);
                }
                for (std::size_t i = 0; i < nt; ++i) {
                    for (std::size_t j = 0; j < cs.size(); ++j) preds[j] = cs[j]->test_a[i];
                    gt[i] = intervals::direct_ensemble_stats(preds);
                }
                in.val_points = mus(gv);
                in.raw = gaussian_source(std::move(gv), std::move(gt));
                break;
            }
            case MethodKind::Gaussian:
            case MethodKind::GaussSelGmm:
            case MethodKind::GaussSelKnn:
            case MethodKind::GaussSelVariance: {
                const MemberCache& c = *cs[0];
                in.val_points = c.val_a;
                in.raw = gaussian_source(gaussians(c.val_a, c.val_b), gaussians(c.test_a, c.test_b));
                if (m.kind == MethodKind::GaussSelGmm) {
                    std::tie(in.val_scores, in.test_scores) = c.gmm_scores.at(m.gmm_k);
                } else if (m.kind == MethodKind::GaussSelKnn) {
                    std::tie(in.val_scores, in.test_scores) =
                        c.knn_scores.at({m.knn_k, m.knn_metric});
                } else if (m.kind == MethodKind::GaussSelVariance) {
                    in.val_scores = c.val_b;
                    in.test_scores = c.test_b;
                }
                in.selective = m.selective();
                break;
            }
            case MethodKind::GaussianEnsemble:
            case MethodKind::GaussEnsSelGmm:
            case MethodKind::GaussEnsSelEnsVariance: {
                std::vector<GaussianPrediction> gv(nv), gt(nt), member(cs.size());
                std::vector<double> means(cs.size());
                if (m.kind == MethodKind::GaussEnsSelEnsVariance) {
                    in.val_scores.resize(nv);
                    in.test_scores.resize(nt);
                }
                for (std::size_t i = 0; i < nv; ++i) {
                    for (std::size_t j = 0; j < cs.size(); ++j) {
                        member[j] = {cs[j]->val_a[i], cs[j]->val_b[i]};
                        means[j] = cs[j]->val_a[i];
                    }
                    gv[i] = intervals::fuse_gaussian_ensemble(member);
                    if (m.kind == MethodKind::GaussEnsSelEnsVariance)
                        in.val_scores[i] = selective::ensemble_variance_score(means);
                }
                for (std::size_t i = 0; i < nt; ++i) {
                    for (std::size_t j = 0; j < cs.size(); ++j) {
                        member[j] = {cs[j]->test_a[i], cs[j]->test_b[i]};
                        means[j] = cs[j]->test_a[i];
                    }
                    gt[i] = intervals::fuse_gaussian_ensemble(member);
                    if (m.kind == MethodKind::GaussEnsSelEnsVariance)
                        in.test_scores[i] = selective::ensemble_variance_score(means);
                }
                if (m.kind == MethodKind::GaussEnsSelGmm) {
                    std::vector<selective::GmmModel> gmms;
                    std::vector<Matrix> fv, ft;
                    for (const auto* c : cs) {
                        gmms.push_back(c->gmms.at(m.gmm_k));
                        fv.push_back(c->val_f);
                        ft.push_back(c->test_f);
                    }
                    in.val_scores = selective::ensemble_gmm_scores(gmms, fv);
                    in.test_scores = selective::ensemble_gmm_scores(gmms, ft);
                }
                in.val_points = mus(gv);
                in.raw = gaussian_source(std::move(gv), std::move(gt));
                in.selective = m.selective();
                break;
            }
            case MethodKind::QuantileRegression: {
                const MemberCache& c = *cs[0];
                const double qa = pools.find(h)->models[members[0]].quantile_alpha;
                std::vector<PredictionInterval> iv(nv), it(nt);
                bool crossed = false;
                for (std::size_t i = 0; i < nv; ++i)
                    iv[i] = intervals::quantile_interval(c.val_a[i], c.val_b[i], qa);
                for (std::size_t i = 0; i < nt; ++i) {
                    it[i] = intervals::quantile_interval(c.test_a[i], c.test_b[i], qa, &crossed);
                    in.crossings += crossed;
                }
                for (const auto& p : iv) in.val_points.push_back(p.point);
                in.raw = [iv = std::move(iv), it = std::move(it)](double a, auto& rv, auto& rt) {
                    rv = iv;
                    rt = it;
                    for (auto& p : rv) p.alpha = a;
                    for (auto& p : rt) p.alpha = a;
                };
                break;
            }
        }
        return in;
    };

    std::vector<ReportRow> rows;
    for (const auto& m : config.methods) {
        ReportRow row;
        row.dataset = dataset_id;
        row.method = m.name();
        row.alpha = config.alpha;
        const auto& draws = m.ensemble() ? ensemble_draws.at(m.head()) : single_draws.at(m.head());
        for (std::size_t r = 0; r < draws.size(); ++r) {
            RepeatResult rep;
            rep.index = r;
            rep.members = draws[r];
            rep.metrics.alpha = config.alpha;
            try {
                rep.metrics = evaluate_cell(inputs_for(m, draws[r]), val, test, config.alpha, config);
            } catch (const std::exception& e) {
                rep.ok = false;
                rep.message = e.what();
            }
            row.repeats.push_back(std::move(rep));
        }
        row.summary = summarize(row.repeats);
        if (log)
            *log << "[" << dataset_id << "] " << row.method << ": coverage " << row.summary.mean[0]
                 << ", prediction rate " << row.summary.mean[1] << " (" << row.summary.status
                 << ")\n";
        rows.push_back(std::move(row));
    }
    return rows;
}

synth::Dataset materialize(const DatasetSource& source) {
    synth::Dataset ds = source.synthetic ? synth::generate(*source.synthetic)
                                         : synth::load_csv(*source.csv, source.schema);
    ds.validate();
    return ds;
}

std::vector<ReportRow> run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    std::vector<ReportRow> rows;
    for (const auto& src : config.datasets) {
        const synth::Dataset ds = materialize(src);
        const PoolSet pools = train_pools(config, src.id, ds, options.log);
        if (config.save_checkpoints)
            save_pools(pools, ds, src.id, config.output_dir / "checkpoints");
        auto part = evaluate_dataset(config, src.id, ds, pools, options.log);
        rows.insert(rows.end(), std::make_move_iterator(part.begin()),
                    std::make_move_iterator(part.end()));
    }
    return rows;
}

void save_pools(const PoolSet& pools, const synth::Dataset& dataset,
                const std::string& dataset_id, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / dataset_id);
    synth::save_csv(dataset, dir / (dataset_id + ".csv"));
    for (const auto* pool : {pools.find(nn::Head::Direct), pools.find(nn::Head::Gaussian),
                             pools.find(nn::Head::Quantile)}) {
        if (!pool) continue;
        for (std::size_t i = 0; i < pool->models.size(); ++i) {
            if (!pool->errors.empty() && !pool->errors[i].empty()) continue;
            nn::save_checkpoint(pool->models[i], dir / dataset_id /
                                                     (pool_name(pool->head) + "_" +
                                                      std::to_string(i) + ".json"));
        }
    }
}

PoolSet load_pools(const ExperimentConfig& config, const std::string& dataset_id,
                   const std::filesystem::path& dir) {
    PoolSet pools;
    for (nn::Head head : heads_needed(config)) {
        auto& p = slot(pools, head);
        p.emplace();
        p->head = head;
        p->models.resize(config.n_models_trained);
        p->errors.resize(config.n_models_trained);
        for (std::size_t i = 0; i < config.n_models_trained; ++i) {
            const auto path =
                dir / dataset_id / (pool_name(head) + "_" + std::to_string(i) + ".json");
            if (!std::filesystem::exists(path)) {
                p->errors[i] = "missing checkpoint " + path.string();
                continue;
            }
            p->models[i] = nn::load_checkpoint(path);
        }
    }
    return pools;
}

SweepResult run_sweep(ExperimentConfig config, synth::ShiftKind base, int levels,
                      const RunOptions& options) {
    if (base != synth::ShiftKind::Tails && base != synth::ShiftKind::Gap)
        throw ConfigError("sweep kind must be tails or gap");
    if (levels < 1 || levels > 5) throw ConfigError("sweep levels must be in 1..5");
    synth::ShiftSpec tmpl;
    tmpl.seed = config.seed;
    for (const auto& d : config.datasets)
        if (d.synthetic) {
            tmpl = *d.synthetic;
            break;
        }
    config.datasets.clear();
    for (int level = 0; level < levels; ++level) {
        synth::ShiftSpec s = tmpl;
        s.kind = synth::ShiftKind::Intensity;
        s.intensity_base = base;
        s.level = level;
        DatasetSource src;
        src.id = synth::to_string(base) + "-L" + std::to_string(level);
        src.synthetic = s;
        config.datasets.push_back(std::move(src));
    }
    SweepResult out;
    out.rows = run_experiment(config, options);
    for (const auto& row : out.rows) {
        const int level = std::stoi(row.dataset.substr(row.dataset.rfind("-L") + 2));
        out.points.push_back({level, row.method, row.summary.mean[0]});
    }
    return out;
}

}  // namespace shiftuq::harness
