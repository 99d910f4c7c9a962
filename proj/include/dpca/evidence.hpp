#pragma once

// Model evidence from the recording-phase likelihoods of a Gibbs run:
//
//   p(r_1..r_I | K) ~= N / (K! * sum_n 1 / p(r_1..r_I | m_n, Omega_n))
//
// evaluated in log space. The K! accounts for the K! relabelings of a single
// local optimum that the sampler never visits.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "dpca/corpus.hpp"
#include "dpca/error.hpp"
#include "dpca/likelihood.hpp"
#include "dpca/model.hpp"
#include "dpca/parallel.hpp"
#include "dpca/random.hpp"
#include "dpca/sampler.hpp"

namespace dpca {

struct EvidenceEstimate {
    std::size_t K = 0;
    double log_evidence = 0.0;  // nats
    std::size_t n_samples = 0;
    std::vector<double> log_lik_samples;
    double variance_diag = 0.0;  // sample variance of log_lik_samples
};

inline double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size() - 1);
}

/// ln N - logsumexp(-log_lik) - ln K!
inline EvidenceEstimate estimate_log_evidence(std::span<const double> log_lik_samples, std::size_t K) {
    if (log_lik_samples.empty()) throw ArgumentError("evidence estimate needs at least one likelihood sample");
    if (K == 0) throw ArgumentError("K must be >= 1");
    std::vector<double> neg(log_lik_samples.size());
    for (std::size_t n = 0; n < neg.size(); ++n) neg[n] = -log_lik_samples[n];
    EvidenceEstimate est;
    est.K = K;
    est.n_samples = log_lik_samples.size();
    est.log_lik_samples.assign(log_lik_samples.begin(), log_lik_samples.end());
    est.log_evidence = std::log(static_cast<double>(est.n_samples)) - log_sum_exp(neg) - log_factorial(K);
    est.variance_diag = sample_variance(log_lik_samples);
    if (!std::isfinite(est.log_evidence)) throw NonFiniteError("log evidence is not finite");
    return est;
}

struct SelectKRow {
    EvidenceEstimate estimate;
    double seconds = 0.0;
    std::uint64_t seed = 0;
};

struct SelectKResult {
    std::vector<SelectKRow> rows;  // sorted by K
    std::size_t best = 0;          // index into rows
};

struct SelectKConfig {
    TrainConfig train;
    InitOptions init;
    /// Candidate models trained concurrently. Each model still uses
    /// train.workers threads internally.
    std::size_t jobs = 1;
};

/// Seed used for candidate K; independent of the candidate list and order.
inline std::uint64_t candidate_seed(std::uint64_t master, std::size_t K) { return derive_seed(master, {0x5e1ec7, K}); }

/// Trains one model per candidate K and estimates its evidence.
inline SelectKResult select_K(const Corpus& corpus, std::vector<std::size_t> candidates, const SelectKConfig& config) {
    if (candidates.empty()) throw ArgumentError("select_K needs at least one candidate K");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    SelectKResult result;
    result.rows.resize(candidates.size());
    parallel_for(candidates.size(), config.jobs, [&](std::size_t c) {
        const std::size_t K = candidates[c];
        const auto start = std::chrono::steady_clock::now();
        const std::uint64_t seed = candidate_seed(config.train.seed, K);
        InitOptions init = config.init;
        init.seed = seed;
        TrainConfig tc = config.train;
        tc.seed = seed;
        auto trained = train(corpus, init_model(corpus, K, init), tc);
        auto& row = result.rows[c];
        row.estimate = estimate_log_evidence(trained.log_lik_samples, K);
        row.seed = seed;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    for (std::size_t c = 1; c < result.rows.size(); ++c) {
        if (result.rows[c].estimate.log_evidence > result.rows[result.best].estimate.log_evidence) result.best = c;
    }
    return result;
}

}  // namespace dpca
