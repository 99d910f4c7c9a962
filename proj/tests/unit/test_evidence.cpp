#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "dpca/evidence.hpp"
#include "support/oracles.hpp"

using namespace dpca;

namespace {

std::vector<BagModel> one_bag(const std::vector<std::vector<double>>& rows) {
    BagModel bag;
    bag.name = "body";
    const std::size_t J = rows.front().size();
    for (std::size_t j = 0; j < J; ++j) bag.tokens.push_back("t" + std::to_string(j));
    bag.omega = Matrix(rows.size(), J);
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t j = 0; j < J; ++j) bag.omega(k, j) = rows[k][j];
    bag.omega_prior.assign(J, 1.0);
    return {bag};
}

Corpus corpus_of(std::vector<std::vector<Entry>> docs, std::size_t J) {
    Corpus c;
    c.bag_names = {"body"};
    std::vector<std::string> tokens;
    for (std::size_t j = 0; j < J; ++j) tokens.push_back("t" + std::to_string(j));
    c.vocabularies.push_back(Vocabulary::from_tokens("body", tokens));
    for (std::size_t i = 0; i < docs.size(); ++i) {
        Document d;
        d.id = "d" + std::to_string(i);
        d.bags.push_back(docs[i]);
        c.documents.push_back(d);
    }
    return c;
}

}  // namespace

TEST(LogLikelihood, SingleComponent) {
    auto bags = one_bag({{0.5, 0.5}});
    auto corpus = corpus_of({{{0, 1}, {1, 1}}}, 2);
    EXPECT_NEAR(complete_data_log_likelihood(corpus, {{1.0}}, bags), std::log(0.25), 1e-12);
    EXPECT_NEAR(complete_data_log_likelihood(corpus, {{1.0}}, bags), -1.3863, 1e-4);
}

TEST(LogLikelihood, MixtureOfDisjointRows) {
    auto bags = one_bag({{1.0, 0.0}, {0.0, 1.0}});
    auto corpus = corpus_of({{{0, 2}}}, 2);
    EXPECT_NEAR(complete_data_log_likelihood(corpus, {{0.5, 0.5}}, bags), 2.0 * std::log(0.5), 1e-12);
}

TEST(LogLikelihood, EmptyCorpusIsZero) {
    auto bags = one_bag({{0.5, 0.5}});
    auto corpus = corpus_of({}, 2);
    EXPECT_EQ(complete_data_log_likelihood(corpus, {}, bags), 0.0);
}

TEST(LogLikelihood, ZeroProbabilityTokenIsNonFinite) {
    auto bags = one_bag({{1.0, 0.0}, {0.0, 1.0}});
    auto corpus = corpus_of({{{1, 1}}}, 2);
    EXPECT_THROW(complete_data_log_likelihood(corpus, {{1.0, 0.0}}, bags), NonFiniteError);
}

TEST(LogLikelihood, LabelSymmetric) {
    auto bags = one_bag({{0.1, 0.6, 0.3}, {0.5, 0.2, 0.3}});
    auto swapped = one_bag({{0.5, 0.2, 0.3}, {0.1, 0.6, 0.3}});
    auto corpus = corpus_of({{{0, 3}, {2, 1}}, {{1, 4}}}, 3);
    EXPECT_NEAR(complete_data_log_likelihood(corpus, {{0.3, 0.7}, {0.9, 0.1}}, bags),
                complete_data_log_likelihood(corpus, {{0.7, 0.3}, {0.1, 0.9}}, swapped), 1e-12);
}

TEST(EstimateEvidence, HarmonicMeanArithmetic) {
    const std::vector<double> s{std::log(0.5), std::log(0.25)};
    auto e = estimate_log_evidence(s, 1);
    EXPECT_NEAR(e.log_evidence, std::log(1.0 / 3.0), 1e-12);
    EXPECT_NEAR(e.log_evidence, -1.0986, 1e-4);
    EXPECT_EQ(e.n_samples, 2u);
    EXPECT_NEAR(estimate_log_evidence(s, 2).log_evidence, std::log(1.0 / 3.0) - std::numbers::ln2, 1e-12);
}

TEST(EstimateEvidence, SingleSampleIsIdentity) {
    const std::vector<double> s{-12.75};
    EXPECT_EQ(estimate_log_evidence(s, 1).log_evidence, -12.75);
    EXPECT_EQ(estimate_log_evidence(s, 1).variance_diag, 0.0);
}

TEST(EstimateEvidence, FactorialCorrection) {
    const std::vector<double> s{-3.0, -4.0, -2.5};
    const double base = estimate_log_evidence(s, 1).log_evidence;
    EXPECT_NEAR(estimate_log_evidence(s, 5).log_evidence, base - std::log(120.0), 1e-12);
}

TEST(EstimateEvidence, EmptyIsError) {
    EXPECT_THROW(estimate_log_evidence(std::vector<double>{}, 1), ArgumentError);
}

TEST(EstimateEvidence, ExtremeLogLikelihoods) {
    const std::vector<double> s{-1e6, -1e6 - 1.0, -1e6 + 2.0};
    auto e = estimate_log_evidence(s, 3);
    ASSERT_TRUE(std::isfinite(e.log_evidence));
    // ln 3 - ln(e^{1e6} (1 + e + e^{-2})) - ln 6, the exponent being -ll
    const double expected = std::log(3.0) - 1e6 - std::log(1.0 + std::exp(1.0) + std::exp(-2.0)) - std::log(6.0);
    EXPECT_NEAR(e.log_evidence, expected, 1e-6);
}

TEST(EstimateEvidence, VarianceDiagnostic) {
    const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
    EXPECT_NEAR(estimate_log_evidence(s, 1).variance_diag, 5.0 / 3.0, 1e-12);
}

TEST(EstimateEvidence, BelowArithmeticMean) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> noise(-50.0, 4.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(1 + trial % 17);
        for (double& x : s) x = noise(gen);
        const double hm = estimate_log_evidence(s, 1).log_evidence;
        const double am = log_sum_exp(s) - std::log(static_cast<double>(s.size()));
        EXPECT_LE(hm, am + 1e-12);
    }
}

TEST(EstimateEvidence, OrderInvariant) {
    std::vector<double> s{-5.0, -1.0, -7.5, -2.25};
    const double a = estimate_log_evidence(s, 2).log_evidence;
    std::reverse(s.begin(), s.end());
    EXPECT_NEAR(estimate_log_evidence(s, 2).log_evidence, a, 1e-12);
}

TEST(SelectK, SingleCandidateIsArgmax) {
    auto syn = dpca::testing::generate_admixture(dpca::testing::disjoint_omega(2, 8), {0.5, 0.5}, 20, 20, 1);
    auto corpus = build_corpus(syn.docs, {"body"}, PruneOptions{1, 1, {}});
    SelectKConfig cfg;
    cfg.train.burn_in = 5;
    cfg.train.recording = 5;
    auto r = select_K(corpus, {2}, cfg);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.best, 0u);
    EXPECT_EQ(r.rows[0].estimate.K, 2u);
    EXPECT_EQ(r.rows[0].estimate.n_samples, 5u);
}

TEST(SelectK, SortsDeduplicatesAndIsJobIndependent) {
    auto syn = dpca::testing::generate_admixture(dpca::testing::disjoint_omega(2, 8), {0.5, 0.5}, 20, 20, 2);
    auto corpus = build_corpus(syn.docs, {"body"}, PruneOptions{1, 1, {}});
    SelectKConfig cfg;
    cfg.train.burn_in = 5;
    cfg.train.recording = 5;
    cfg.train.seed = 11;
    auto a = select_K(corpus, {3, 1, 3, 2}, cfg);
    cfg.jobs = 3;
    auto b = select_K(corpus, {2, 1, 3}, cfg);
    ASSERT_EQ(a.rows.size(), 3u);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(a.rows[c].estimate.K, c + 1);
        EXPECT_EQ(a.rows[c].estimate.log_evidence, b.rows[c].estimate.log_evidence);
        EXPECT_EQ(a.rows[c].seed, candidate_seed(11, c + 1));
    }
}

namespace {

// Two pure groups over {a, b} and {c, d}, three words per document.
Corpus two_group_corpus() {
    using dpca::testing::raw_doc;
    std::vector<RawDocument> raw{raw_doc("d0", {{"a", 2}, {"b", 1}}), raw_doc("d1", {{"c", 2}, {"d", 1}}),
                                 raw_doc("d2", {{"a", 2}, {"b", 1}}), raw_doc("d3", {{"c", 1}, {"d", 2}})};
    return build_corpus(raw, {"body"}, PruneOptions{1, 1, {}});
}

// Exact ln p(corpus | K) under the default priors, from enumerating every
// assignment of the 12 tokens with m and Omega integrated out analytically.
constexpr double kExactK1 = -21.048966572;
constexpr double kExactK2 = -17.806593770;
constexpr double kExactK4 = -17.257041771;

}  // namespace

TEST(SelectK, ExactEnumerationOfSingleComponentMatchesClosedForm) {
    // K = 1 collapses to the Dirichlet-multinomial marginal of pooled counts.
    auto corpus = two_group_corpus();
    const auto prior = init_model(corpus, 1).bags[0].omega_prior;
    std::vector<double> pooled;
    for (auto f : corpus.vocabularies[0].total_freq) pooled.push_back(static_cast<double>(f));
    EXPECT_NEAR(dpca::testing::dirichlet_multinomial_log_marginal(prior, pooled), kExactK1, 1e-8);
}

TEST(SelectK, PicksTwoWellSeparatedComponents) {
    auto corpus = two_group_corpus();
    SelectKConfig cfg;
    cfg.train.seed = 1;
    auto r = select_K(corpus, {1, 2, 4}, cfg);
    EXPECT_EQ(r.rows[r.best].estimate.K, 2u);
    // One component is clearly worse, both by the estimate and exactly.
    EXPECT_GT(kExactK2 - kExactK1, 3.0);
    EXPECT_GT(r.rows[1].estimate.log_evidence, r.rows[0].estimate.log_evidence);
    // Exactly, four components edge out two under these priors; the local
    // estimate's K! correction is what separates them.
    EXPECT_GT(kExactK4, kExactK2);
}

TEST(SelectK, EmptyCandidatesIsError) {
    Corpus c;
    EXPECT_THROW(select_K(c, {}, SelectKConfig{}), ArgumentError);
}
