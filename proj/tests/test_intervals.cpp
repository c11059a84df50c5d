#include <doctest.h>

#include <algorithm>
#include <vector>

#include "oracles.hpp"
#include "shiftuq/intervals.hpp"
#include "shiftuq/statkit.hpp"

using namespace shiftuq;
using namespace shiftuq::intervals;

TEST_CASE("conformal halfwidth") {
    std::vector<double> r{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(conformal_halfwidth(r, 0.5) == 6.0);
    CHECK(conformal_halfwidth(r, 1e-6) == 10.0);
    CHECK(conformal_halfwidth(std::vector<double>(5, 0.0), 0.1) == 0.0);
    const auto iv = conformal_interval(3.0, 6.0, 0.5);
    CHECK(iv.lower == -3.0);
    CHECK(iv.upper == 9.0);
    CHECK(iv.point == 3.0);
}

TEST_CASE("gaussian interval") {
    const double z = oracle::inv_phi(0.95);
    const auto a = gaussian_interval({0.0, 1.0}, 0.1);
    CHECK(a.lower == doctest::Approx(-z).epsilon(1e-12));
    CHECK(a.upper == doctest::Approx(z).epsilon(1e-12));
    const auto b = gaussian_interval({5.0, 4.0}, 0.1);
    CHECK(b.lower == doctest::Approx(5 - 2 * z).epsilon(1e-12));
    CHECK(b.upper == doctest::Approx(5 + 2 * z).epsilon(1e-12));
    const auto c = gaussian_interval({2.0, 0.0}, 0.1);
    CHECK(c.lower == 2.0);
    CHECK(c.upper == 2.0);
    double prev = 0.0;
    for (double s2 : {0.01, 0.5, 1.0, 9.0}) {
        const double w = gaussian_interval({0.0, s2}, 0.1).length();
        CHECK(w > prev);
        prev = w;
    }
    prev = 0.0;
    for (double alpha : {0.5, 0.2, 0.1, 0.01}) {
        const double w = gaussian_interval({0.0, 1.0}, alpha).length();
        CHECK(w > prev);
        prev = w;
    }
}

TEST_CASE("quantile interval") {
    bool crossed = true;
    auto a = quantile_interval(0, 2, 0.1, &crossed);
    CHECK(!crossed);
    CHECK(a.lower == 0);
    CHECK(a.upper == 2);
    CHECK(a.point == 1);
    auto b = quantile_interval(2, 0, 0.1, &crossed);
    CHECK(crossed);
    CHECK(b.lower == 0);
    CHECK(b.upper == 2);
    auto c = quantile_interval(4, 4);
    CHECK(c.length() == 0);
    CHECK(c.point == 4);
}

TEST_CASE("ensemble fusion") {
    const std::vector<GaussianPrediction> two{{0, 1}, {2, 1}};
    const auto f = fuse_gaussian_ensemble(two);
    CHECK(f.mu == 1.0);
    CHECK(f.sigma2 == 2.0);
    const std::vector<GaussianPrediction> same(4, {3.0, 0.7});
    CHECK(fuse_gaussian_ensemble(same).mu == doctest::Approx(3.0));
    CHECK(fuse_gaussian_ensemble(same).sigma2 == doctest::Approx(0.7));
    const std::vector<GaussianPrediction> flat{{1, 1}, {1, 2}, {1, 3}};
    CHECK(fuse_gaussian_ensemble(flat).sigma2 == doctest::Approx(2.0));
    CHECK_THROWS(fuse_gaussian_ensemble(std::vector<GaussianPrediction>{{1, 1}}));
}

TEST_CASE("fusion equals mixture moment matching") {
    stat::Rng rng(9);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<GaussianPrediction> m(2 + rng.below(9));
        for (auto& p : m) p = {rng.uniform(-3, 3), rng.uniform(0.01, 2)};
        const auto f = fuse_gaussian_ensemble(m);
        long double mean = 0, second = 0;
        for (const auto& p : m) {
            mean += p.mu;
            second += static_cast<long double>(p.mu) * p.mu + p.sigma2;
        }
        mean /= m.size();
        second /= m.size();
        CHECK(std::abs(f.mu - static_cast<double>(mean)) <= 1e-12);
        CHECK(std::abs(f.sigma2 - static_cast<double>(second - mean * mean)) <= 1e-12);
    }
}

TEST_CASE("direct ensemble stats") {
    const auto a = direct_ensemble_stats(std::vector<double>{0, 2});
    CHECK(a.mu == 1);
    CHECK(a.sigma2 == 1);
    CHECK(direct_ensemble_stats(std::vector<double>{4, 4, 4}).sigma2 == 0);
    const auto p = direct_ensemble_stats(std::vector<double>{1, 5, 2});
    const auto q = direct_ensemble_stats(std::vector<double>{5, 2, 1});
    CHECK(p.mu == doctest::Approx(q.mu));
    CHECK(p.sigma2 == doctest::Approx(q.sigma2));
}

TEST_CASE("constructors keep lower <= point <= upper") {
    stat::Rng rng(2);
    for (int i = 0; i < 500; ++i) {
        const double a = rng.uniform(0.01, 0.99);
        for (const auto& iv : {gaussian_interval({rng.normal(), rng.uniform(0, 5)}, a),
                               quantile_interval(rng.normal(), rng.normal(), a),
                               conformal_interval(rng.normal(), rng.uniform(0, 3), a)}) {
            CHECK(iv.lower <= iv.point);
            CHECK(iv.point <= iv.upper);
        }
    }
}
