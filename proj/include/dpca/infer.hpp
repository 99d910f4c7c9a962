#pragma once

// Inference for new documents with Omega held fixed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpca/corpus.hpp"
#include "dpca/error.hpp"
#include "dpca/likelihood.hpp"
#include "dpca/model.hpp"
#include "dpca/random.hpp"
#include "dpca/sampler.hpp"

namespace dpca {

struct MomentMatch {
    std::vector<double> params;
    double precision = 0.0;
    bool capped = false;  // zero spread; precision set to the cap
};

inline constexpr double kMaxDirichletPrecision = 1e6;

/// Dirichlet with the samples' mean and whose average (over components)
/// standard deviation sqrt(mu_k (1 - mu_k) / (s + 1)) equals the samples'
/// average standard deviation. Returns s * mu.
inline MomentMatch dirichlet_moment_match(const std::vector<std::vector<double>>& samples,
                                          double max_precision = kMaxDirichletPrecision) {
    if (samples.size() < 2) throw ArgumentError("moment matching needs at least two samples");
    const std::size_t K = samples.front().size();
    const double n = static_cast<double>(samples.size());
    std::vector<double> mean(K, 0.0);
    for (const auto& s : samples)
        for (std::size_t k = 0; k < K; ++k) mean[k] += s[k];
    for (double& x : mean) x /= n;
    double avg_sd = 0.0;
    double avg_shape = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double ss = 0.0;
        for (const auto& s : samples) ss += (s[k] - mean[k]) * (s[k] - mean[k]);
        avg_sd += std::sqrt(ss / (n - 1.0));
        avg_shape += std::sqrt(std::max(0.0, mean[k] * (1.0 - mean[k])));
    }
    avg_sd /= static_cast<double>(K);
    avg_shape /= static_cast<double>(K);

    MomentMatch out;
    if (avg_sd <= 0.0 || avg_shape <= 0.0) {
        out.precision = max_precision;
        out.capped = true;
    } else {
        const double ratio = avg_shape / avg_sd;
        out.precision = std::clamp(ratio * ratio - 1.0, std::numeric_limits<double>::min(), max_precision);
        out.capped = out.precision >= max_precision;
    }
    out.params.resize(K);
    for (std::size_t k = 0; k < K; ++k) out.params[k] = out.precision * mean[k];
    return out;
}

struct PosteriorSummary {
    std::string id;
    std::vector<double> m_mean;
    std::vector<double> m_std;
    std::vector<double> dirichlet_fit;
    bool precision_capped = false;
    /// Mean Gamma intensities; discrete ICA models only.
    std::vector<double> lambda_mean;
    std::size_t n_samples = 0;
};

struct FitOptions {
    std::size_t burn_in = 10;
    std::size_t cycles = 50;
};

struct DocumentFit {
    std::vector<std::vector<double>> m_samples;
    std::vector<std::vector<double>> weight_samples;  // lambda for discrete ICA, else m
    PosteriorSummary summary;
};

inline PosteriorSummary summarize(const std::string& id, const std::vector<std::vector<double>>& m_samples) {
    PosteriorSummary s;
    s.id = id;
    s.n_samples = m_samples.size();
    const std::size_t K = m_samples.front().size();
    const double n = static_cast<double>(m_samples.size());
    s.m_mean.assign(K, 0.0);
    s.m_std.assign(K, 0.0);
    for (const auto& m : m_samples)
        for (std::size_t k = 0; k < K; ++k) s.m_mean[k] += m[k];
    for (double& x : s.m_mean) x /= n;
    if (m_samples.size() >= 2) {
        for (const auto& m : m_samples)
            for (std::size_t k = 0; k < K; ++k) s.m_std[k] += (m[k] - s.m_mean[k]) * (m[k] - s.m_mean[k]);
        for (double& x : s.m_std) x = std::sqrt(x / (n - 1.0));
        auto mm = dirichlet_moment_match(m_samples);
        s.dirichlet_fit = std::move(mm.params);
        s.precision_capped = mm.capped;
    } else {
        s.dirichlet_fit.assign(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) s.dirichlet_fit[k] = kMaxDirichletPrecision * s.m_mean[k];
        s.precision_capped = true;
    }
    return s;
}

/// Per-document Gibbs with Omega frozen: burn_in unrecorded cycles, then
/// `cycles` recorded proportion samples.
inline DocumentFit fit_document(const ComponentModel& model, const Document& doc, const FitOptions& opts, Rng& rng) {
    if (opts.cycles < 1) throw ArgumentError("fit_document needs at least one recorded cycle");
    if (doc.bags.size() != model.bags.size()) throw ArgumentError("document bags do not match the model");
    DocumentState state = initial_document_state(model);
    DocumentFit fit;
    fit.m_samples.reserve(opts.cycles);
    for (std::size_t t = 0; t < opts.burn_in + opts.cycles; ++t) {
        document_gibbs_step(doc, model, rng, state);
        if (t >= opts.burn_in) {
            fit.m_samples.push_back(state.proportions);
            fit.weight_samples.push_back(state.weights);
        }
    }
    fit.summary = summarize(doc.id, fit.m_samples);
    if (model.variant == Variant::gamma_poisson && !model.tree) {
        fit.summary.lambda_mean.assign(model.K, 0.0);
        for (const auto& w : fit.weight_samples)
            for (std::size_t k = 0; k < model.K; ++k) fit.summary.lambda_mean[k] += w[k];
        for (double& x : fit.summary.lambda_mean) x /= static_cast<double>(fit.weight_samples.size());
    }
    return fit;
}

/// A query: sparse counts per model bag.
struct Query {
    std::string id;
    std::vector<SparseCounts> bags;

    bool empty() const {
        for (const auto& b : bags)
            if (!b.empty()) return false;
        return true;
    }
};

/// Maps a raw query onto the model's vocabularies. Unknown tokens are
/// dropped and reported through `dropped`.
inline Query make_query(const ComponentModel& model, const RawDocument& raw, std::vector<std::string>* dropped = nullptr) {
    Query q;
    q.id = raw.id;
    q.bags.resize(model.bags.size());
    for (const auto& [bag_name, counts] : raw.bags) {
        auto b = model.bag_position(bag_name);
        if (!b) throw SchemaError("query bag '" + bag_name + "' is not in the model");
        const auto vocab = Vocabulary::from_tokens(bag_name, model.bags[*b].tokens);
        for (const auto& [token, c] : counts) {
            if (auto j = vocab.find(token)) {
                q.bags[*b].push_back({*j, c});
            } else if (dropped) {
                dropped->push_back(bag_name + ":" + token);
            }
        }
        std::sort(q.bags[*b].begin(), q.bags[*b].end(), [](const Entry& x, const Entry& y) { return x.token < y.token; });
    }
    return q;
}

/// Adds the counts of b into a, bag by bag.
inline Document merge_counts(const Document& doc, std::span<const SparseCounts> extra) {
    Document out = doc;
    for (std::size_t b = 0; b < extra.size(); ++b) {
        auto& bag = out.bags[b];
        for (const auto& e : extra[b]) {
            auto it = std::lower_bound(bag.begin(), bag.end(), e.token,
                                       [](const Entry& x, TokenId t) { return x.token < t; });
            if (it != bag.end() && it->token == e.token) {
                it->count += e.count;
            } else {
                bag.insert(it, e);
            }
        }
    }
    return out;
}

struct QueryOptions {
    std::size_t burn_in = 10;
    std::size_t n_samples = 50;
};

struct QueryScore {
    double log_score = 0.0;
    /// ln p(x | m_n, Omega) for every recorded sample.
    std::vector<double> sample_log_lik;
};

/// Estimates E_{m ~ p(m | r, Omega)} p(x | m, Omega) by
/// N / sum_n 1 / p(x | m_n, Omega), where m_n are drawn by Gibbs from
/// p(m | r, x, Omega).
inline QueryScore query_match(const ComponentModel& model, const Document& doc, const Query& query,
                              const QueryOptions& opts, Rng& rng) {
    if (query.bags.size() != model.bags.size()) throw ArgumentError("query bags do not match the model");
    if (query.empty()) throw ArgumentError("query is empty after vocabulary filtering");
    for (std::size_t b = 0; b < query.bags.size(); ++b) {
        const Matrix& omega = model.bags[b].omega;
        for (const auto& e : query.bags[b]) {
            bool possible = false;
            for (std::size_t k = 0; k < model.K && !possible; ++k) possible = omega(k, e.token) > 0.0;
            if (!possible)
                throw NonFiniteError("query token '" + model.bags[b].tokens[e.token] +
                                     "' has zero probability under every component");
        }
    }
    const Document joint = merge_counts(doc, query.bags);
    const auto fit = fit_document(model, joint, {opts.burn_in, opts.n_samples}, rng);
    QueryScore score;
    score.sample_log_lik.reserve(fit.m_samples.size());
    std::vector<double> neg;
    for (const auto& m : fit.m_samples) {
        const double ll = document_log_likelihood(query.bags, m, model.bags);
        score.sample_log_lik.push_back(ll);
        neg.push_back(-ll);
    }
    score.log_score = std::log(static_cast<double>(neg.size())) - log_sum_exp(neg);
    if (!std::isfinite(score.log_score)) throw NonFiniteError("query score for document '" + doc.id + "' is not finite");
    return score;
}

struct Classification {
    std::size_t predicted = 0;
    std::string predicted_value;
    std::vector<double> log_scores;  // one per class value
    bool tie = false;
};

/// Scores each class value as a one-word query in the class bag and returns
/// the argmax (lowest index on ties). Any class counts already in the
/// document are ignored.
inline Classification classify(const ComponentModel& model, const Document& doc, const std::string& class_bag,
                               const std::vector<std::string>& class_values, const QueryOptions& opts, std::uint64_t seed) {
    auto b = model.bag_position(class_bag);
    if (!b) throw SchemaError("model has no class bag '" + class_bag + "'");
    if (class_values.empty()) throw ArgumentError("no class values");
    const auto vocab = Vocabulary::from_tokens(class_bag, model.bags[*b].tokens);
    Document stripped = doc;
    stripped.bags[*b].clear();
    Classification out;
    out.log_scores.resize(class_values.size());
    for (std::size_t v = 0; v < class_values.size(); ++v) {
        auto j = vocab.find(class_values[v]);
        if (!j) throw SchemaError("class value '" + class_values[v] + "' is not in the class bag vocabulary");
        Query q;
        q.bags.resize(model.bags.size());
        q.bags[*b].push_back({*j, 1});
        Rng rng(derive_seed(seed, {0xc1a55, v}));
        out.log_scores[v] = query_match(model, stripped, q, opts, rng).log_score;
    }
    for (std::size_t v = 1; v < out.log_scores.size(); ++v) {
        if (out.log_scores[v] > out.log_scores[out.predicted]) out.predicted = v;
    }
    for (std::size_t v = 0; v < out.log_scores.size(); ++v) {
        if (v != out.predicted && out.log_scores[v] == out.log_scores[out.predicted]) out.tie = true;
    }
    out.predicted_value = class_values[out.predicted];
    return out;
}

}  // namespace dpca
