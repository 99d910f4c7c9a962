#pragma once

// Uncollapsed Gibbs sampling for flat (Dirichlet), discrete ICA
// (Gamma-Poisson) and hierarchical models. One cycle samples, for every
// document, the topic assignments given its weights and then the weights
// given the assignment totals; Omega is redrawn once per cycle from the
// pooled assignments.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dpca/corpus.hpp"
#include "dpca/error.hpp"
#include "dpca/likelihood.hpp"
#include "dpca/model.hpp"
#include "dpca/parallel.hpp"
#include "dpca/random.hpp"

namespace dpca {

/// Topic assignments of one document. w[b] is a dense (nnz_b x K) block:
/// row e holds the split of the e-th stored token of bag b over components.
struct Assignments {
    std::vector<std::vector<Count>> w;
    std::vector<Count> c;  // per-component totals

    Count at(std::size_t bag, std::size_t entry, std::size_t k) const { return w[bag][entry * c.size() + k]; }
};

/// Splits each token count r over components with a Multinomial(r, p) draw,
/// p_k proportional to weights_k * Omega_kj.
inline void sample_assignments(const Document& doc, std::span<const double> weights, std::span<const BagModel> bags,
                               Rng& rng, Assignments& out) {
    const std::size_t K = weights.size();
    out.c.assign(K, 0);
    out.w.resize(doc.bags.size());
    std::vector<double> p(K);
    for (std::size_t b = 0; b < doc.bags.size(); ++b) {
        const auto& counts = doc.bags[b];
        const Matrix& omega = bags[b].omega;
        auto& wb = out.w[b];
        wb.assign(counts.size() * K, 0);
        for (std::size_t e = 0; e < counts.size(); ++e) {
            const TokenId j = counts[e].token;
            double total = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                p[k] = weights[k] * omega(k, j);
                total += p[k];
            }
            if (!(total > 0.0)) {
                throw ImpossibleTokenError("token '" + bags[b].tokens[j] + "' in document '" + doc.id +
                                           "' has zero probability under every component");
            }
            std::span<Count> row(wb.data() + e * K, K);
            sample_multinomial(rng, counts[e].count, p, total, row);
            for (std::size_t k = 0; k < K; ++k) out.c[k] += row[k];
        }
    }
}

inline Assignments sample_assignments(const Document& doc, std::span<const double> weights,
                                      std::span<const BagModel> bags, Rng& rng) {
    Assignments a;
    sample_assignments(doc, weights, bags, rng, a);
    return a;
}

/// m ~ Dirichlet(alpha + c).
inline std::vector<double> sample_proportions_flat(std::span<const Count> c, std::span<const double> alpha, Rng& rng) {
    std::vector<double> params(alpha.size());
    for (std::size_t k = 0; k < alpha.size(); ++k) params[k] = alpha[k] + c[k];
    return sample_dirichlet(rng, params);
}

/// lambda_k ~ Gamma(alpha_k + c_k, rate 2): unit prior rate plus unit Poisson exposure.
inline std::vector<double> sample_intensities_dica(std::span<const Count> c, std::span<const double> alpha, Rng& rng) {
    std::vector<double> lambda(alpha.size());
    for (std::size_t k = 0; k < alpha.size(); ++k) lambda[k] = sample_gamma(rng, alpha[k] + c[k], 2.0);
    return lambda;
}

struct TreeSample {
    std::vector<double> q;
    std::vector<double> n;
    std::vector<double> m;
};

/// Conjugate draw of the stop and branch probabilities given per-node counts:
/// q_k ~ Beta(alpha1 + c_k, alpha2 + S_k - c_k) and the children's n ~
/// Dirichlet(beta + subtree counts), where S_k counts the whole subtree at k.
inline TreeSample sample_tree_params(std::span<const Count> c, const TopicTree& tree, Rng& rng) {
    const std::size_t K = tree.size();
    if (c.size() != K) throw ArgumentError("counts must have one entry per tree node");
    std::vector<double> counts(c.begin(), c.end());
    const auto subtree = subtree_sums(counts, tree);
    TreeSample s{std::vector<double>(K, 1.0), std::vector<double>(K, 0.0), {}};
    s.n[0] = 1.0;
    std::vector<double> params;
    std::vector<double> draw;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& node = tree.node(k);
        if (node.is_leaf()) continue;
        s.q[k] = sample_beta(rng, node.alpha1 + counts[k], node.alpha2 + subtree[k] - counts[k]);
        params.resize(node.children.size());
        draw.resize(node.children.size());
        for (std::size_t i = 0; i < node.children.size(); ++i) params[i] = node.beta[i] + subtree[node.children[i]];
        sample_dirichlet(rng, params, draw);
        for (std::size_t i = 0; i < node.children.size(); ++i) s.n[node.children[i]] = draw[i];
    }
    // Renormalize each sibling group so the mapping's sum check is exact.
    for (std::size_t k = 0; k < K; ++k) {
        const auto& node = tree.node(k);
        if (node.is_leaf()) continue;
        double t = 0.0;
        for (std::size_t ch : node.children) t += s.n[ch];
        for (std::size_t ch : node.children) s.n[ch] /= t;
    }
    s.m = map_tree_to_proportions(s.q, s.n, tree);
    return s;
}

/// Pooled assignment counts per bag, K x J_b, row-major.
using PooledCounts = std::vector<std::vector<std::uint64_t>>;

/// get(i) must return the Assignments of document i.
template <typename Get>
PooledCounts pool_assignments(const Corpus& corpus, std::size_t K, Get&& get) {
    PooledCounts pooled(corpus.num_bags());
    for (std::size_t b = 0; b < corpus.num_bags(); ++b) pooled[b].assign(K * corpus.vocabularies[b].size(), 0);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& doc = corpus.documents[i];
        for (std::size_t b = 0; b < doc.bags.size(); ++b) {
            const auto J = corpus.vocabularies[b].size();
            for (std::size_t e = 0; e < doc.bags[b].size(); ++e) {
                const TokenId j = doc.bags[b][e].token;
                for (std::size_t k = 0; k < K; ++k) pooled[b][k * J + j] += get(i).at(b, e, k);
            }
        }
    }
    return pooled;
}

/// Omega^b_k ~ Dirichlet(omega_prior^b + pooled counts of component k).
inline void resample_omega(const PooledCounts& pooled, std::vector<BagModel>& bags, Rng& rng) {
    for (std::size_t b = 0; b < bags.size(); ++b) {
        auto& bag = bags[b];
        const std::size_t J = bag.tokens.size();
        std::vector<double> params(J);
        for (std::size_t k = 0; k < bag.omega.rows(); ++k) {
            for (std::size_t j = 0; j < J; ++j) params[j] = bag.omega_prior[j] + static_cast<double>(pooled[b][k * J + j]);
            sample_dirichlet(rng, params, bag.omega.row(k));
        }
    }
}

/// Posterior mean of each Omega row: (prior + counts) / row total.
inline std::vector<Matrix> omega_posterior_mean(const PooledCounts& pooled, const std::vector<BagModel>& bags) {
    std::vector<Matrix> out;
    for (std::size_t b = 0; b < bags.size(); ++b) {
        const auto& bag = bags[b];
        const std::size_t J = bag.tokens.size();
        Matrix mean(bag.omega.rows(), J);
        for (std::size_t k = 0; k < bag.omega.rows(); ++k) {
            double total = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                mean(k, j) = bag.omega_prior[j] + static_cast<double>(pooled[b][k * J + j]);
                total += mean(k, j);
            }
            for (double& x : mean.row(k)) x /= total;
        }
        out.push_back(std::move(mean));
    }
    return out;
}

/// Per-document latent state carried between cycles.
struct DocumentState {
    std::vector<double> weights;      // m, or lambda for discrete ICA
    std::vector<double> proportions;  // weights normalized onto the simplex
    Assignments assignments;
    TreeParams tree_params;           // hierarchical models only
};

inline std::vector<double> normalized(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    std::vector<double> out(x.begin(), x.end());
    for (double& v : out) v /= s;
    return out;
}

/// Starting weights before the first sweep: the prior mean.
inline DocumentState initial_document_state(const ComponentModel& model) {
    DocumentState s;
    if (model.tree) {
        s.weights = tree_prior_mean_proportions(*model.tree);
    } else if (model.variant == Variant::gamma_poisson) {
        s.weights = model.alpha;
    } else {
        s.weights = normalized(model.alpha);
    }
    s.proportions = normalized(s.weights);
    return s;
}

/// One Gibbs step for a document with Omega fixed: assignments, then weights.
inline void document_gibbs_step(const Document& doc, const ComponentModel& model, Rng& rng, DocumentState& state) {
    sample_assignments(doc, state.weights, model.bags, rng, state.assignments);
    const auto& c = state.assignments.c;
    if (model.tree) {
        auto t = sample_tree_params(c, *model.tree, rng);
        state.tree_params = {std::move(t.q), std::move(t.n)};
        state.weights = std::move(t.m);
        state.proportions = state.weights;
    } else if (model.variant == Variant::gamma_poisson) {
        state.weights = sample_intensities_dica(c, model.alpha, rng);
        state.proportions = normalized(state.weights);
    } else {
        state.weights = sample_proportions_flat(c, model.alpha, rng);
        state.proportions = state.weights;
    }
}

struct TrainConfig {
    std::size_t burn_in = 100;
    std::size_t recording = 50;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct CycleRecord {
    std::size_t cycle = 0;
    bool recording = false;
    double log_likelihood = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    ComponentModel model;
    /// Complete-data log likelihood after each recording cycle.
    std::vector<double> log_lik_samples;
    /// Per-document sample means over the recording cycles.
    std::vector<std::vector<double>> m_mean;
    std::vector<std::vector<double>> weight_mean;  // lambda means for discrete ICA, else equal to m_mean
    std::vector<CycleRecord> trace;
};

inline void check_compatible(const Corpus& corpus, const ComponentModel& model) {
    if (corpus.num_bags() != model.bags.size())
        throw ArgumentError("corpus has " + std::to_string(corpus.num_bags()) + " bags but the model has " +
                            std::to_string(model.bags.size()));
    for (std::size_t b = 0; b < model.bags.size(); ++b) {
        if (corpus.bag_names[b] != model.bags[b].name || corpus.vocabularies[b].size() != model.bags[b].tokens.size())
            throw ArgumentError("corpus bag '" + corpus.bag_names[b] + "' does not match model bag '" + model.bags[b].name +
                                "'");
    }
}

namespace detail {
constexpr std::uint64_t kDocumentStream = 0xd0c;
constexpr std::uint64_t kOmegaStream = 0x0e6a;
}  // namespace detail

/// Burn-in followed by recording. The returned Omega is the average over
/// recording cycles of the posterior-mean Omega given that cycle's
/// assignments, not of the sampled Omega.
inline TrainResult train(const Corpus& corpus, ComponentModel model, const TrainConfig& config,
                         const std::function<void(const CycleRecord&)>& on_cycle = {}) {
    if (config.burn_in < 1 || config.recording < 1) throw ArgumentError("burn_in and recording must be >= 1");
    if (model.tree && model.variant == Variant::gamma_poisson)
        throw ArgumentError("hierarchical models use Dirichlet proportions; gamma-poisson is flat only");
    model.validate();
    check_compatible(corpus, model);

    const std::size_t I = corpus.size();
    const std::size_t K = model.K;
    std::vector<DocumentState> states(I, initial_document_state(model));
    std::vector<Matrix> omega_sum;
    for (const auto& bag : model.bags) omega_sum.emplace_back(K, bag.tokens.size());

    TrainResult result;
    result.m_mean.assign(I, std::vector<double>(K, 0.0));
    result.weight_mean.assign(I, std::vector<double>(K, 0.0));
    std::vector<double> doc_ll(I);
    const auto start = std::chrono::steady_clock::now();
    const std::size_t cycles = config.burn_in + config.recording;

    for (std::size_t t = 0; t < cycles; ++t) {
        const bool recording = t >= config.burn_in;
        parallel_for(I, config.workers, [&](std::size_t i) {
            Rng rng(derive_seed(config.seed, {detail::kDocumentStream, t, i}));
            document_gibbs_step(corpus.documents[i], model, rng, states[i]);
        });
        const auto pooled =
            pool_assignments(corpus, K, [&](std::size_t i) -> const Assignments& { return states[i].assignments; });
        if (recording) {
            const auto mean = omega_posterior_mean(pooled, model.bags);
            for (std::size_t b = 0; b < mean.size(); ++b)
                for (std::size_t x = 0; x < mean[b].data().size(); ++x) omega_sum[b].data()[x] += mean[b].data()[x];
        }
        Rng omega_rng(derive_seed(config.seed, {detail::kOmegaStream, t}));
        resample_omega(pooled, model.bags, omega_rng);

        parallel_for(I, config.workers, [&](std::size_t i) {
            doc_ll[i] = document_log_likelihood(corpus.documents[i].bags, states[i].proportions, model.bags);
        });
        double ll = 0.0;
        for (double x : doc_ll) ll += x;
        if (!std::isfinite(ll)) throw NonFiniteError("non-finite log likelihood at cycle " + std::to_string(t));

        if (recording) {
            result.log_lik_samples.push_back(ll);
            for (std::size_t i = 0; i < I; ++i) {
                for (std::size_t k = 0; k < K; ++k) {
                    result.m_mean[i][k] += states[i].proportions[k];
                    result.weight_mean[i][k] += states[i].weights[k];
                }
            }
        }
        CycleRecord rec{t, recording, ll,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
        result.trace.push_back(rec);
        if (on_cycle) on_cycle(rec);
    }

    const double n = static_cast<double>(config.recording);
    for (std::size_t b = 0; b < model.bags.size(); ++b) {
        auto& omega = model.bags[b].omega;
        for (std::size_t k = 0; k < K; ++k) {
            auto src = omega_sum[b].row(k);
            auto dst = omega.row(k);
            double total = 0.0;
            for (std::size_t j = 0; j < dst.size(); ++j) {
                dst[j] = src[j] / n;
                total += dst[j];
            }
            for (double& x : dst) x /= total;
        }
    }
    model.m_bar.assign(K, 0.0);
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            result.m_mean[i][k] /= n;
            result.weight_mean[i][k] /= n;
            model.m_bar[k] += result.m_mean[i][k];
        }
    }
    if (I > 0) {
        for (double& x : model.m_bar) x /= static_cast<double>(I);
    } else {
        model.m_bar = initial_document_state(model).proportions;
    }
    result.model = std::move(model);
    return result;
}

}  // namespace dpca
