#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "berndesign/errors.hpp"

// Counter-based random number generation. Every draw is a pure function of
// (seed, stream tag, counter), so replicates can be regenerated in any order
// and the same key always yields the same value on every platform.

namespace berndesign::rng {

/// SplitMix64 finalizer: a well-mixed 64-bit bijection.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

/// Fold one 64-bit word into a key. Bijective in `word` for a fixed key.
constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t word) {
    return mix64(key + 0x9E3779B97F4A7C15ULL + word * 0xD6E8FEB86659FD93ULL);
}

/// FNV-1a hash of a stream-tag literal, evaluated at compile time.
constexpr std::uint64_t tag(const char* s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (; *s != '\0'; ++s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*s));
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Raw 64-bit draw for (seed, stream, counter).
constexpr std::uint64_t u64_at(std::uint64_t seed, std::uint64_t stream,
                               std::uint64_t counter) {
    return mix64(derive(derive(seed, stream), counter));
}

/// Fair bit.
constexpr int bit_at(std::uint64_t seed, std::uint64_t stream,
                     std::uint64_t counter) {
    return static_cast<int>(u64_at(seed, stream, counter) >> 63);
}

/// Uniform in [0, 1), 53-bit resolution.
inline double uniform_at(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t counter) {
    return static_cast<double>(u64_at(seed, stream, counter) >> 11) * 0x1.0p-53;
}

/// Uniform in (0, 1), never exactly 0 or 1; safe for inverse-CDF transforms.
inline double uniform_open_at(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
    return (static_cast<double>(u64_at(seed, stream, counter) >> 11) + 0.5) *
           0x1.0p-53;
}

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16).
/// Absolute error below 1e-15 over (0, 1).
inline double inverse_normal_cdf(double p) {
    require(p > 0.0 && p < 1.0, "inverse_normal_cdf: p must lie in (0, 1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return (q < 0.0) ? -value : value;
}

/// Standard normal draw via inverse CDF.
inline double normal_at(std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t counter) {
    return inverse_normal_cdf(uniform_open_at(seed, stream, counter));
}

/// Poisson draw via CDF inversion (sequential search from k = 0).
/// Deterministic given the key; adequate for moderate lambda.
inline long poisson_at(double lambda, std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t counter) {
    require(lambda > 0.0, "poisson_at: lambda must be positive");
    const double u = uniform_open_at(seed, stream, counter);
    double pmf = std::exp(-lambda);
    double cdf = pmf;
    long k = 0;
    const long cap =
        static_cast<long>(lambda + 60.0 * std::sqrt(lambda) + 20.0);
    while (u > cdf && k < cap) {
        ++k;
        pmf *= lambda / static_cast<double>(k);
        cdf += pmf;
    }
    return k;
}

/// Standard normal quantile for a two-sided interval at `level`,
/// i.e. Phi^{-1}((1 + level) / 2).
inline double normal_quantile_two_sided(double level) {
    require(level > 0.0 && level < 1.0,
            "normal_quantile_two_sided: level must lie in (0, 1)");
    return inverse_normal_cdf(0.5 * (1.0 + level));
}

}  // namespace berndesign::rng
