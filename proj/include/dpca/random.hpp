#pragma once

// Seeded random streams and the conjugate samplers used by every Gibbs sweep.
//
// All randomness is drawn from Rng instances whose seeds are derived from a
// master seed plus integer tags (cycle, document, component, ...). A worker
// never shares a stream with another worker, so results do not depend on how
// documents are split across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace dpca {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes a master seed with a list of tags into a substream seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t state = master;
    std::uint64_t h = splitmix64(state);
    for (std::uint64_t t : tags) {
        state ^= t + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2);
        h = splitmix64(state);
    }
    return h;
}

/// xoshiro256** generator; satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        // Marsaglia polar method; the second variate is discarded so the
        // stream carries no hidden state between calls.
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4]{};
};

/// log of a Gamma(shape, 1) draw. Stays finite for shapes far below 1,
/// where the draw itself underflows to zero.
inline double sample_log_gamma(Rng& rng, double shape) {
    if (shape < 1.0) {
        // G(a) = G(a + 1) * U^(1/a)
        return sample_log_gamma(rng, shape + 1.0) + std::log(rng.uniform()) / shape;
    }
    // Marsaglia & Tsang (2000).
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
    }
}

/// Gamma(shape, rate) draw.
inline double sample_gamma(Rng& rng, double shape, double rate = 1.0) {
    return std::exp(sample_log_gamma(rng, shape)) / rate;
}

inline double sample_beta(Rng& rng, double a, double b) {
    const double la = sample_log_gamma(rng, a);
    const double lb = sample_log_gamma(rng, b);
    const double mx = std::max(la, lb);
    const double ea = std::exp(la - mx);
    const double eb = std::exp(lb - mx);
    return ea / (ea + eb);
}

/// Writes a Dirichlet(params) draw into out. Normalizes in log space so that
/// tiny concentration parameters never produce an all-zero vector.
inline void sample_dirichlet(Rng& rng, std::span<const double> params, std::span<double> out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < params.size(); ++k) {
        out[k] = sample_log_gamma(rng, params[k]);
        mx = std::max(mx, out[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        out[k] = std::exp(out[k] - mx);
        total += out[k];
    }
    for (std::size_t k = 0; k < params.size(); ++k) out[k] /= total;
}

inline std::vector<double> sample_dirichlet(Rng& rng, std::span<const double> params) {
    std::vector<double> out(params.size());
    sample_dirichlet(rng, params, out);
    return out;
}

/// Index drawn with probability proportional to weights[k]; total must be their sum.
inline std::size_t sample_categorical(Rng& rng, std::span<const double> weights, double total) {
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
        if (u < weights[k]) return k;
        u -= weights[k];
    }
    // Round-off can leave u just past the last bucket; fall back to the last
    // index with positive weight.
    for (std::size_t k = weights.size(); k-- > 0;) {
        if (weights[k] > 0.0) return k;
    }
    return weights.size() - 1;
}

/// Multinomial(trials, weights / total) draw added into out.
inline void sample_multinomial(Rng& rng, std::uint32_t trials, std::span<const double> weights,
                               double total, std::span<std::uint32_t> out) {
    constexpr std::uint32_t kSequentialLimit = 16;
    if (trials <= kSequentialLimit) {
        for (std::uint32_t t = 0; t < trials; ++t) ++out[sample_categorical(rng, weights, total)];
        return;
    }
    // Conditional binomials for large counts.
    double remaining_mass = total;
    std::uint32_t remaining = trials;
    for (std::size_t k = 0; k < weights.size() && remaining > 0; ++k) {
        if (k + 1 == weights.size() || remaining_mass <= weights[k]) {
            out[k] += remaining;
            return;
        }
        const double p = std::clamp(weights[k] / remaining_mass, 0.0, 1.0);
        std::binomial_distribution<std::uint32_t> binom(remaining, p);
        const std::uint32_t draw = binom(rng);
        out[k] += draw;
        remaining -= draw;
        remaining_mass -= weights[k];
    }
}

inline double log_sum_exp(std::span<const double> xs) {
    if (xs.empty()) return -std::numeric_limits<double>::infinity();
    const double mx = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

inline double log_factorial(std::uint64_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

}  // namespace dpca
