#pragma once

// Feature construction from component-generated word counts, SVMlight
// export, and pairwise correlation of component scores.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dpca/corpus.hpp"
#include "dpca/error.hpp"
#include "dpca/infer.hpp"
#include "dpca/model.hpp"

namespace dpca {

inline constexpr double kComponentPresenceThreshold = 0.01;

/// Expected words generated by each component, m_mean * L, with counts
/// below the presence threshold set to zero.
inline std::vector<double> component_word_counts(std::span<const double> m_mean, std::uint64_t length,
                                                 double threshold = kComponentPresenceThreshold) {
    std::vector<double> out(m_mean.size());
    for (std::size_t k = 0; k < m_mean.size(); ++k) {
        const double v = m_mean[k] * static_cast<double>(length);
        out[k] = v < threshold ? 0.0 : v;
    }
    return out;
}

struct FeatureMatrix {
    std::vector<SparseWeights> rows;
    std::vector<std::string> feature_names;
    std::vector<std::optional<std::string>> labels;

    std::size_t width() const { return feature_names.size(); }
};

enum class FeatureMode { words, components, words_and_components };

inline FeatureMode parse_feature_mode(const std::string& s) {
    if (s == "words") return FeatureMode::words;
    if (s == "components") return FeatureMode::components;
    if (s == "words+components") return FeatureMode::words_and_components;
    throw ArgumentError("unknown feature mode '" + s + "' (expected words|components|words+components)");
}

/// Word features are TF-IDF weights over all bags (bag order, then token
/// order). Component features are TF-IDF-transformed component word counts;
/// a component's document frequency is the number of documents in which its
/// thresholded count is nonzero. With `component_tfidf` off the raw counts
/// are used.
inline FeatureMatrix build_feature_matrix(const Corpus& corpus, const ComponentModel* model,
                                          const std::vector<PosteriorSummary>& summaries, FeatureMode mode,
                                          bool component_tfidf = true) {
    const bool want_words = mode != FeatureMode::components;
    const bool want_components = mode != FeatureMode::words;
    if (want_components) {
        if (model == nullptr || model->m_bar.empty()) throw ArgumentError("component features need a trained model");
        if (summaries.size() != corpus.size()) throw ArgumentError("need one posterior summary per document");
    }
    FeatureMatrix fm;
    fm.rows.resize(corpus.size());
    fm.labels.resize(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) fm.labels[i] = corpus.documents[i].label;

    std::size_t offset = 0;
    if (want_words) {
        for (std::size_t b = 0; b < corpus.num_bags(); ++b) {
            const auto weights = tfidf_weights(corpus, b);
            for (std::size_t i = 0; i < corpus.size(); ++i)
                for (const auto& [j, w] : weights[i]) fm.rows[i].emplace_back(static_cast<TokenId>(offset + j), w);
            for (const auto& t : corpus.vocabularies[b].tokens) fm.feature_names.push_back(corpus.bag_names[b] + ":" + t);
            offset += corpus.vocabularies[b].size();
        }
    }
    if (want_components) {
        const std::size_t K = model->K;
        std::vector<std::vector<double>> counts(corpus.size());
        std::vector<std::uint64_t> df(K, 0);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            counts[i] = component_word_counts(summaries[i].m_mean, corpus.documents[i].length());
            for (std::size_t k = 0; k < K; ++k)
                if (counts[i][k] > 0.0) ++df[k];
        }
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                if (counts[i][k] <= 0.0) continue;
                const double w = component_tfidf ? counts[i][k] * idf(corpus.size(), df[k]) : counts[i][k];
                fm.rows[i].emplace_back(static_cast<TokenId>(offset + k), w);
            }
        }
        for (std::size_t k = 0; k < K; ++k) fm.feature_names.push_back("component:" + std::to_string(k));
    }
    return fm;
}

/// Shortest decimal string that parses back to exactly v.
inline std::string format_shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Lexicographically sorted labels mapped to 1..C.
inline std::map<std::string, int> label_mapping(const FeatureMatrix& fm) {
    std::map<std::string, int> mapping;
    for (const auto& l : fm.labels) {
        if (!l) throw ValidationError("feature export: a row has no label");
        mapping.emplace(*l, 0);
    }
    int next = 1;
    for (auto& [label, id] : mapping) id = next++;
    return mapping;
}

/// One line per row: `<label> <index>:<value> ...`, 1-based ascending
/// indices, zero weights omitted.
inline void export_svmlight(const FeatureMatrix& fm, const std::map<std::string, int>& labels, std::ostream& out) {
    for (std::size_t i = 0; i < fm.rows.size(); ++i) {
        if (!fm.labels[i]) throw ValidationError("feature export: row " + std::to_string(i) + " has no label");
        auto it = labels.find(*fm.labels[i]);
        if (it == labels.end()) throw ValidationError("feature export: unmapped label '" + *fm.labels[i] + "'");
        auto row = fm.rows[i];
        std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        out << it->second;
        for (std::size_t e = 0; e < row.size(); ++e) {
            const auto& [index, value] = row[e];
            if (e > 0 && row[e - 1].first == index)
                throw ValidationError("feature export: duplicate feature index in row " + std::to_string(i));
            if (!std::isfinite(value)) throw NonFiniteError("feature export: non-finite value in row " + std::to_string(i));
            if (value == 0.0) continue;
            out << ' ' << (index + 1) << ':' << format_shortest(value);
        }
        out << '\n';
    }
}

inline void write_label_mapping(const std::map<std::string, int>& labels, std::ostream& out) {
    for (const auto& [label, id] : labels) out << id << '\t' << label << '\n';
}

struct SvmlightRow {
    int label = 0;
    std::vector<std::pair<std::size_t, double>> features;  // 1-based indices
};

inline std::vector<SvmlightRow> read_svmlight(std::istream& in) {
    std::vector<SvmlightRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        SvmlightRow row;
        if (!(ss >> row.label)) throw ParseError("svmlight line " + std::to_string(line_no) + ": missing label");
        std::string item;
        while (ss >> item) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw ParseError("svmlight line " + std::to_string(line_no) + ": bad item '" + item + "'");
            row.features.emplace_back(std::stoul(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Correlations

struct FiveNumber {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Linear-interpolation quantiles of a non-empty sample.
inline FiveNumber five_number_summary(std::vector<double> xs) {
    if (xs.empty()) throw ArgumentError("five-number summary of an empty sample");
    std::sort(xs.begin(), xs.end());
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(xs.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, xs.size() - 1);
        return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
    };
    return {xs.front(), quantile(0.25), quantile(0.5), quantile(0.75), xs.back()};
}

struct CorrelationGroup {
    std::string name;
    std::vector<double> values;
    FiveNumber summary;
};

struct CorrelationReport {
    std::size_t K = 0;
    /// Unordered pairs (k, l), k < l, with their Pearson correlation.
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, double>> pairs;
    std::vector<std::size_t> zero_variance;  // excluded components
    std::vector<CorrelationGroup> groups;    // "all" first, then tag buckets
    /// Full K x K matrix; NaN where a component was excluded.
    Matrix matrix;
};

/// Pearson correlation between every pair of score columns of an I x K
/// matrix. When tags are given (e.g. "T" for internal and "B" for leaf
/// nodes) the pairs are also bucketed by tag pair, e.g. T-T, B-B, T-B.
inline CorrelationReport component_correlations(const Matrix& scores, const std::vector<std::string>& tags = {}) {
    const std::size_t I = scores.rows();
    const std::size_t K = scores.cols();
    if (I < 3) throw ArgumentError("correlations need at least 3 documents");
    if (!tags.empty() && tags.size() != K) throw ArgumentError("need one tag per component");
    std::vector<double> mean(K, 0.0), sd(K, 0.0);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t k = 0; k < K; ++k) mean[k] += scores(i, k);
    for (double& m : mean) m /= static_cast<double>(I);
    Matrix centered(I, K);
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            centered(i, k) = scores(i, k) - mean[k];
            sd[k] += centered(i, k) * centered(i, k);
        }
    }
    CorrelationReport rep;
    rep.K = K;
    rep.matrix = Matrix(K, K, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < K; ++k) {
        sd[k] = std::sqrt(sd[k]);
        if (sd[k] <= 0.0) {
            rep.zero_variance.push_back(k);
        } else {
            rep.matrix(k, k) = 1.0;
        }
    }
    std::map<std::string, std::vector<double>> buckets;
    std::vector<double> all;
    for (std::size_t k = 0; k < K; ++k) {
        if (sd[k] <= 0.0) continue;
        for (std::size_t l = k + 1; l < K; ++l) {
            if (sd[l] <= 0.0) continue;
            double dot = 0.0;
            for (std::size_t i = 0; i < I; ++i) dot += centered(i, k) * centered(i, l);
            const double r = std::clamp(dot / (sd[k] * sd[l]), -1.0, 1.0);
            rep.matrix(k, l) = rep.matrix(l, k) = r;
            rep.pairs.push_back({{k, l}, r});
            all.push_back(r);
            if (!tags.empty()) {
                auto a = tags[k], b = tags[l];
                // "T" sorts after "B"; keep internal-first naming (T-B).
                if (a < b) std::swap(a, b);
                buckets[a + "-" + b].push_back(r);
            }
        }
    }
    if (!all.empty()) rep.groups.push_back({"all", all, five_number_summary(all)});
    for (auto& [name, values] : buckets) rep.groups.push_back({name, values, five_number_summary(values)});
    return rep;
}

/// TSV: group, min, q1, median, q3, max, n_pairs.
inline void write_correlation_summary(const CorrelationReport& rep, std::ostream& out) {
    out << "group\tmin\tq1\tmedian\tq3\tmax\tn_pairs\n";
    for (const auto& g : rep.groups) {
        out << g.name << '\t' << format_shortest(g.summary.min) << '\t' << format_shortest(g.summary.q1) << '\t'
            << format_shortest(g.summary.median) << '\t' << format_shortest(g.summary.q3) << '\t'
            << format_shortest(g.summary.max) << '\t' << g.values.size() << '\n';
    }
}

/// Box plots of each group's correlations plus the individual values as a
/// jittered scatter, as a standalone SVG document.
inline void write_correlation_svg(const CorrelationReport& rep, std::ostream& out) {
    constexpr double kWidth = 120.0, kHeight = 400.0, kMargin = 40.0;
    const double total_width = kMargin * 2 + kWidth * static_cast<double>(rep.groups.size());
    auto y = [&](double r) { return kMargin + (1.0 - (r + 1.0) / 2.0) * (kHeight - 2 * kMargin); };
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_width << "\" height=\"" << kHeight << "\">\n";
    out << "<line x1=\"" << kMargin << "\" x2=\"" << total_width - kMargin << "\" y1=\"" << y(0.0) << "\" y2=\"" << y(0.0)
        << "\" stroke=\"#bbb\"/>\n";
    for (std::size_t g = 0; g < rep.groups.size(); ++g) {
        const auto& grp = rep.groups[g];
        const double cx = kMargin + kWidth * (static_cast<double>(g) + 0.5);
        const auto& s = grp.summary;
        out << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << y(s.max) << "\" y2=\"" << y(s.min)
            << "\" stroke=\"black\"/>\n";
        out << "<rect x=\"" << cx - 20 << "\" y=\"" << y(s.q3) << "\" width=\"40\" height=\"" << y(s.q1) - y(s.q3)
            << "\" fill=\"#cde\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << cx - 20 << "\" x2=\"" << cx + 20 << "\" y1=\"" << y(s.median) << "\" y2=\""
            << y(s.median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        for (std::size_t v = 0; v < grp.values.size(); ++v) {
            const double jitter = (static_cast<double>((v * 2654435761u) % 1000) / 1000.0 - 0.5) * 30.0;
            out << "<circle cx=\"" << cx + 30 + jitter / 3 << "\" cy=\"" << y(grp.values[v])
                << "\" r=\"1\" fill=\"#555\" fill-opacity=\"0.3\"/>\n";
        }
        out << "<text x=\"" << cx << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">" << grp.name << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace dpca
