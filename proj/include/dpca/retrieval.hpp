#pragma once

// TF-IDF candidate retrieval and re-ranking of candidates by query match
// under a trained model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpca/corpus.hpp"
#include "dpca/error.hpp"
#include "dpca/infer.hpp"
#include "dpca/model.hpp"
#include "dpca/parallel.hpp"
#include "dpca/random.hpp"

namespace dpca {

struct Posting {
    std::uint32_t doc;
    double weight;
};

/// Inverted index over TF-IDF weights of all bags. Terms are addressed by
/// (bag, token) flattened as offsets[bag] + token. Zero weights (tokens in
/// every document) keep their postings.
struct Index {
    std::vector<std::size_t> offsets;
    std::vector<std::vector<Posting>> postings;  // sorted by doc
    std::vector<double> doc_norms;
    std::vector<std::string> doc_ids;
    std::vector<std::vector<std::uint64_t>> doc_freq;  // per bag
    std::size_t num_docs = 0;
};

inline Index build_index(const Corpus& corpus) {
    if (corpus.size() == 0) throw ArgumentError("cannot index an empty corpus");
    Index index;
    index.num_docs = corpus.size();
    std::size_t terms = 0;
    for (const auto& v : corpus.vocabularies) {
        index.offsets.push_back(terms);
        terms += v.size();
        index.doc_freq.push_back(v.doc_freq);
    }
    index.postings.resize(terms);
    index.doc_norms.assign(corpus.size(), 0.0);
    for (std::size_t b = 0; b < corpus.num_bags(); ++b) {
        const auto weights = tfidf_weights(corpus, b);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            for (const auto& [j, w] : weights[i]) {
                index.postings[index.offsets[b] + j].push_back({static_cast<std::uint32_t>(i), w});
                index.doc_norms[i] += w * w;
            }
        }
    }
    for (double& n : index.doc_norms) n = std::sqrt(n);
    for (const auto& d : corpus.documents) index.doc_ids.push_back(d.id);
    return index;
}

struct RankedDoc {
    std::size_t doc;
    double score;
};

/// Cosine similarity between the query's TF-IDF vector and every document;
/// the top_n documents with nonzero score, best first, ties by doc id.
inline std::vector<RankedDoc> tfidf_rank(const Index& index, const Query& query, std::size_t top_n) {
    if (query.empty()) throw ArgumentError("query is empty after vocabulary filtering");
    if (query.bags.size() != index.offsets.size()) throw ArgumentError("query bags do not match the index");
    std::vector<double> dot(index.num_docs, 0.0);
    double qnorm = 0.0;
    for (std::size_t b = 0; b < query.bags.size(); ++b) {
        for (const auto& e : query.bags[b]) {
            const double w = e.count * idf(index.num_docs, index.doc_freq[b][e.token]);
            if (w == 0.0) continue;
            qnorm += w * w;
            for (const auto& p : index.postings[index.offsets[b] + e.token]) dot[p.doc] += w * p.weight;
        }
    }
    std::vector<RankedDoc> out;
    if (qnorm == 0.0) return out;
    qnorm = std::sqrt(qnorm);
    for (std::size_t i = 0; i < index.num_docs; ++i) {
        if (dot[i] > 0.0 && index.doc_norms[i] > 0.0) {
            out.push_back({i, std::min(1.0, dot[i] / (qnorm * index.doc_norms[i]))});
        }
    }
    std::sort(out.begin(), out.end(), [&](const RankedDoc& a, const RankedDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return index.doc_ids[a.doc] < index.doc_ids[b.doc];
    });
    if (out.size() > top_n) out.resize(top_n);
    return out;
}

struct RerankConfig {
    QueryOptions query;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct RerankedDoc {
    std::size_t doc;
    double log_score;
    std::size_t prior_rank;  // 0-based position in the candidate list
};

struct RerankResult {
    std::vector<RerankedDoc> ranked;
    std::vector<std::pair<std::size_t, std::string>> dropped;  // (doc, reason)
};

/// Scores every candidate by query_match and sorts by descending log score,
/// ties keeping candidate order. Candidates whose scoring fails are dropped.
inline RerankResult rerank(const ComponentModel& model, const Corpus& corpus, const std::vector<std::size_t>& candidates,
                           const Query& query, const RerankConfig& config) {
    if (candidates.empty()) throw ArgumentError("rerank needs at least one candidate");
    std::vector<std::optional<double>> scores(candidates.size());
    std::vector<std::string> errors(candidates.size());
    parallel_for(candidates.size(), config.workers, [&](std::size_t c) {
        const std::size_t doc = candidates[c];
        Rng rng(derive_seed(config.seed, {0x7e7a, doc}));
        try {
            scores[c] = query_match(model, corpus.documents.at(doc), query, config.query, rng).log_score;
        } catch (const Error& e) {
            errors[c] = e.what();
        }
    });
    RerankResult out;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (scores[c]) {
            out.ranked.push_back({candidates[c], *scores[c], c});
        } else {
            out.dropped.emplace_back(candidates[c], errors[c]);
        }
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const RerankedDoc& a, const RerankedDoc& b) { return a.log_score > b.log_score; });
    return out;
}

}  // namespace dpca
