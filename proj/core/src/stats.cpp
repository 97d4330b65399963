#include "geolex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geolex/error.hpp"

namespace geolex::stats {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream_id) noexcept {
    return mix64(seed ^ mix64(stream_id + 0x9E3779B97F4A7C15ULL));
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    return fnv1a64(bytes, 0xCBF29CE484222325ULL);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : engine_(stream_seed(seed, stream_id)) {}

double RngStream::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    if (n == 0) throw DomainError("uniform_index: empty range");
    // Reject the low 2^64 mod n values so every residue is equally likely.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t x = engine_();
        if (x >= threshold) return x % n;
    }
}

std::size_t RngStream::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("categorical: negative or NaN weight");
        total += w;
    }
    if (!(total > 0.0)) throw DomainError("categorical: weights sum to zero");
    const double u = uniform01() * total;
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        cumulative += weights[i];
        last_positive = i;
        if (u < cumulative) return i;
    }
    return last_positive;
}

std::vector<std::size_t> RngStream::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw DomainError("sample_without_replacement: k exceeds population");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_index(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

void BootstrapConfig::validate() const {
    if (resamples < 100)
        throw ValidationError("bootstrap: resample count must be >= 100");
    if (!(level > 0.0 && level < 1.0))
        throw ValidationError("bootstrap: confidence level must lie in (0, 1)");
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DomainError("quantile of empty data");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level outside [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Interval bootstrap_ci(std::size_t n, const ResampleStatistic& statistic,
                      const BootstrapConfig& config) {
    config.validate();
    if (n < 2) throw DataError("bootstrap: need at least 2 values");

    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    Interval out;
    out.point = statistic(indices);

    RngStream rng(config.seed, 0);
    std::vector<double> replicates;
    replicates.reserve(static_cast<std::size_t>(config.resamples));
    for (int b = 0; b < config.resamples; ++b) {
        for (auto& idx : indices) idx = static_cast<std::size_t>(rng.uniform_index(n));
        replicates.push_back(statistic(indices));
    }
    std::sort(replicates.begin(), replicates.end());
    const double tail = (1.0 - config.level) / 2.0;
    out.lo = quantile_sorted(replicates, tail);
    out.hi = quantile_sorted(replicates, 1.0 - tail);
    return out;
}

Interval bootstrap_mean_ci(std::span<const double> values, const BootstrapConfig& config) {
    return bootstrap_ci(
        values.size(),
        [values](std::span<const std::size_t> idx) {
            double s = 0.0;
            for (auto i : idx) s += values[i];
            return s / static_cast<double>(idx.size());
        },
        config);
}

double mean(std::span<const double> values) {
    if (values.empty()) throw DomainError("mean of empty data");
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) throw DomainError("variance needs at least 2 values");
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(values.size() - 1);
}

namespace {

// Continued fraction for the incomplete beta function, modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 500;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw NumericalError("incomplete beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete beta: shape parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw DomainError("student t: degrees of freedom must be positive");
    if (std::isnan(t)) throw DomainError("student t: NaN statistic");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double x = df / (df + t * t);
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0 ? 1.0 - tail : tail;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw DomainError("student t: degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double log_sum_exp(std::span<const double> values) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : values) hi = std::max(hi, v);
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double v : values) s += std::exp(v - hi);
    return hi + std::log(s);
}

void normalize(std::span<double> values) {
    double total = 0.0;
    for (double v : values) total += v;
    if (!(total > 0.0) || !std::isfinite(total))
        throw DomainError("normalize: total mass must be positive and finite");
    for (double& v : values) v /= total;
}

}  // namespace geolex::stats
