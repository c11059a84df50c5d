#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

namespace shiftuq::stat {

enum class QuantileMode {
    /// k-th smallest value with k = ceil(level * (n + 1)), clamped to [1, n].
    ConformalOrderStatistic,
    /// Interpolated empirical quantile (diagnostics only).
    Linear,
};

/// Throws std::invalid_argument("empty sample") on empty input.
double empirical_quantile(std::span<const double> values, double level,
                          QuantileMode mode = QuantileMode::ConformalOrderStatistic);

/// 1-based rank used by the conformal order statistic for a sample of size n.
std::size_t conformal_rank(std::size_t n, double level);

/// Standard normal CDF and its inverse (|error| < 1e-9 on (0,1)).
double std_normal_cdf(double z);
double inv_std_normal_cdf(double p);

/// log(sum(exp(v))) with max-shift; -inf entries are absorbed.
double log_sum_exp(std::span<const double> values);

double mean(std::span<const double> values);
/// Population (1/n) variance.
double population_variance(std::span<const double> values);
/// Sample (1/(n-1)) standard deviation; 0 for a single value.
double sample_stddev(std::span<const double> values);

/// splitmix64 finalizer; also the stream-splitting hash.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over a tag, for readable substream labels ("shuffle", "init", ...).
std::uint64_t tag(std::string_view label) noexcept;

/// Seedable 64-bit generator (xoshiro256**).
///
/// Streams are split by hashing a path of 64-bit keys onto the parent
/// seed: substream({dataset, pool, member}) is independent of the order in
/// which substreams are requested, so grid cells can run in any order.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    Rng substream(std::initializer_list<std::uint64_t> path) const noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal via the Marsaglia polar method.
    double normal() noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace shiftuq::stat
