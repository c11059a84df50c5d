#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "shiftuq/statkit.hpp"

using namespace shiftuq;

namespace {
std::vector<double> one_to(int n) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 1.0);
    return v;
}
}  // namespace

TEST_CASE("conformal order statistic") {
    const auto v = one_to(10);
    CHECK(stat::empirical_quantile(v, 0.5) == 6.0);
    CHECK(stat::empirical_quantile(v, 0.9) == 10.0);
    CHECK(stat::empirical_quantile(std::vector<double>{7.0}, 0.0) == 7.0);
    CHECK(stat::empirical_quantile(one_to(100), 0.95) == 96.0);
    CHECK(stat::conformal_rank(10, 0.99) == 10);
    CHECK(stat::conformal_rank(10, 0.0) == 1);
    CHECK_THROWS_WITH(stat::empirical_quantile(std::vector<double>{}, 0.5), "empty sample");
}

TEST_CASE("linear quantile") {
    const auto v = one_to(5);
    CHECK(stat::empirical_quantile(v, 0.5, stat::QuantileMode::Linear) == doctest::Approx(3.0));
    CHECK(stat::empirical_quantile(v, 0.25, stat::QuantileMode::Linear) == doctest::Approx(2.0));
    CHECK(stat::empirical_quantile(v, 1.0, stat::QuantileMode::Linear) == 5.0);
}

TEST_CASE("quantile matches the counting oracle, is permutation invariant and monotone") {
    stat::Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng.below(40));
        for (auto& x : v) x = rng.normal();
        const double level = rng.uniform();
        const double q = stat::empirical_quantile(v, level);
        CHECK(q == oracle::order_statistic(v, level));
        auto w = v;
        std::reverse(w.begin(), w.end());
        std::rotate(w.begin(), w.begin() + w.size() / 2, w.end());
        CHECK(stat::empirical_quantile(w, level) == q);
        CHECK(stat::empirical_quantile(v, std::min(1.0, level + 0.1)) >= q);
    }
}

TEST_CASE("inverse normal cdf") {
    CHECK(stat::inv_std_normal_cdf(0.5) == 0.0);
    // Frozen from the bisection oracle below.
    CHECK(stat::inv_std_normal_cdf(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
    CHECK(stat::inv_std_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(oracle::inv_phi(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
    CHECK(oracle::inv_phi(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    for (double p : {1e-6, 0.001, 0.02, 0.1, 0.3, 0.7, 0.9, 0.99, 0.999999})
        CHECK(stat::inv_std_normal_cdf(p) == doctest::Approx(oracle::inv_phi(p)).epsilon(1e-9));
    CHECK_THROWS_WITH(stat::inv_std_normal_cdf(0.0), "probability out of range");
    CHECK_THROWS_WITH(stat::inv_std_normal_cdf(1.0), "probability out of range");
    CHECK_THROWS(stat::inv_std_normal_cdf(std::nan("")));
}

TEST_CASE("normal cdf round trip against the series oracle") {
    for (double z = -5.0; z <= 5.0; z += 0.37) {
        CHECK(stat::std_normal_cdf(z) == doctest::Approx(static_cast<double>(oracle::phi(z))).epsilon(1e-12));
        const double p = static_cast<double>(oracle::phi(z));
        CHECK(std::abs(stat::inv_std_normal_cdf(p) - z) < 1e-8);
    }
}

TEST_CASE("log_sum_exp") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(stat::log_sum_exp(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)));
    CHECK(stat::log_sum_exp(std::vector<double>{1000.0, 1000.0}) ==
          doctest::Approx(1000.0 + std::log(2.0)));
    CHECK(stat::log_sum_exp(std::vector<double>{0.0, -inf}) == 0.0);
    CHECK(stat::log_sum_exp(std::vector<double>{-inf, -inf}) == -inf);
    CHECK_THROWS(stat::log_sum_exp(std::vector<double>{}));
}

TEST_CASE("moments") {
    const std::vector<double> v{0.8, 1.0};
    CHECK(stat::mean(v) == doctest::Approx(0.9));
    CHECK(stat::sample_stddev(v) == doctest::Approx(std::sqrt(0.02)));
    CHECK(stat::population_variance(std::vector<double>{0.0, 2.0}) == 1.0);
    CHECK(stat::sample_stddev(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("rng streams") {
    stat::Rng a(42), b(42), c(43);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(stat::Rng(42).next_u64() != c.next_u64());

    const stat::Rng root(9);
    auto s1 = root.substream({1, 2});
    auto s2 = root.substream({1, 2});
    auto s3 = root.substream({2, 1});
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(root.substream({1, 2}).next_u64() != s3.next_u64());
    CHECK(stat::tag("init") != stat::tag("shuffle"));

    stat::Rng r(5);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    std::set<std::uint64_t> seen;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        sum += z;
        sq += z * z;
        const double u = r.uniform();
        CHECK_MESSAGE((u >= 0.0 && u < 1.0), u);
        seen.insert(r.below(7));
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
    CHECK(seen.size() == 7);
    CHECK(*seen.rbegin() == 6);
}

TEST_CASE("conformal coverage by Monte Carlo") {
    // Fresh exchangeable point covered by the order statistic of |residuals|.
    stat::Rng rng(17);
    const int trials = 10000, n = 50;
    for (double alpha : {0.05, 0.1, 0.2}) {
        int covered = 0;
        std::vector<double> r(n);
        for (int t = 0; t < trials; ++t) {
            for (auto& x : r) x = std::abs(rng.normal());
            const double q = stat::empirical_quantile(r, 1.0 - alpha);
            covered += std::abs(rng.normal()) <= q;
        }
        const double cov = static_cast<double>(covered) / trials;
        const double sigma = std::sqrt(alpha * (1 - alpha) / trials);
        CHECK(cov >= 1.0 - alpha - 3.0 * sigma);
    }
}
