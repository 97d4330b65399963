#pragma once

// Shared statistical primitives: reproducible random streams, percentile
// bootstrap intervals and a few distribution utilities.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace geolex::stats {

/// SplitMix64 finalizer. Bijective 64-bit mix.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for sub-stream `stream_id`: mix64(seed ^ mix64(stream_id + 0x9E3779B97F4A7C15)).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream_id) noexcept;

/// FNV-1a 64-bit hash. Used to derive stream ids from labels and as a
/// content hash for caching.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept;

/// Deterministic 64-bit generator.
///
/// The engine is std::mt19937_64 (its output sequence is fixed by the C++
/// standard), seeded with stream_seed(seed, stream_id). All derived draws
/// (uniforms, bounded integers, shuffles) are implemented here rather than
/// through <random> distributions, whose algorithms are implementation
/// defined, so sequences reproduce across standard libraries.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of precision.
    double uniform01();

    /// Uniform integer in [0, n), unbiased (rejection on the top bits). n > 0.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Index drawn from unnormalized non-negative weights by inverse CDF.
    std::size_t categorical(std::span<const double> weights);

    /// Fisher-Yates, processing positions from the back.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

inline RngStream rng_stream(std::uint64_t seed, std::uint64_t stream_id) {
    return RngStream(seed, stream_id);
}

struct BootstrapConfig {
    int resamples = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;

    /// Throws ValidationError unless resamples >= 100 and 0 < level < 1.
    void validate() const;
};

struct Interval {
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7):
/// h = (n-1)p, q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double quantile_sorted(std::span<const double> sorted, double p);

/// Statistic evaluated on a resample, given as indices into the original rows.
using ResampleStatistic = std::function<double(std::span<const std::size_t>)>;

/// Percentile bootstrap over `n` rows. The point estimate is the statistic on
/// the identity resample. Requires n >= 2.
Interval bootstrap_ci(std::size_t n, const ResampleStatistic& statistic,
                      const BootstrapConfig& config);

/// Percentile bootstrap of the mean.
Interval bootstrap_mean_ci(std::span<const double> values, const BootstrapConfig& config);

double mean(std::span<const double> values);
/// Unbiased sample variance (n - 1 denominator).
double sample_variance(std::span<const double> values);

/// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

/// Student-t cumulative distribution P(T <= t) with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

/// log(sum(exp(values))) without overflow; -inf for empty or all -inf input.
double log_sum_exp(std::span<const double> values);

/// Divide by the sum in place. Throws DomainError when the sum is not positive.
void normalize(std::span<double> values);

}  // namespace geolex::stats
