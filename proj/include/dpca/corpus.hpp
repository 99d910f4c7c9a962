#pragma once

// Multi-bag sparse count corpora: JSON Lines ingest, per-bag vocabulary
// pruning and TF-IDF weights.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dpca/error.hpp"

namespace dpca {

using TokenId = std::uint32_t;
using Count = std::uint32_t;

struct Entry {
    TokenId token;
    Count count;

    friend bool operator==(const Entry&, const Entry&) = default;
};

/// Sorted by token, all counts > 0.
using SparseCounts = std::vector<Entry>;

/// (token, weight) pairs sorted by token.
using SparseWeights = std::vector<std::pair<TokenId, double>>;

struct Vocabulary {
    std::string bag_name;
    std::vector<std::string> tokens;
    std::unordered_map<std::string, TokenId> token_index;
    std::vector<std::uint64_t> doc_freq;
    std::vector<std::uint64_t> total_freq;

    std::size_t size() const { return tokens.size(); }

    std::optional<TokenId> find(const std::string& token) const {
        auto it = token_index.find(token);
        if (it == token_index.end()) return std::nullopt;
        return it->second;
    }

    /// Builds a vocabulary with the given token order and zeroed frequencies.
    static Vocabulary from_tokens(std::string bag, std::vector<std::string> tokens) {
        Vocabulary v;
        v.bag_name = std::move(bag);
        v.tokens = std::move(tokens);
        for (std::size_t j = 0; j < v.tokens.size(); ++j) {
            if (!v.token_index.emplace(v.tokens[j], static_cast<TokenId>(j)).second) {
                throw ValidationError("duplicate token '" + v.tokens[j] + "' in vocabulary of bag '" +
                                      v.bag_name + "'");
            }
        }
        v.doc_freq.assign(v.tokens.size(), 0);
        v.total_freq.assign(v.tokens.size(), 0);
        return v;
    }
};

struct Document {
    std::string id;
    std::vector<SparseCounts> bags;  // aligned with Corpus::bag_names
    std::optional<std::string> label;

    std::uint64_t length() const {
        std::uint64_t total = 0;
        for (const auto& bag : bags)
            for (const auto& e : bag) total += e.count;
        return total;
    }
};

struct Corpus {
    std::vector<std::string> bag_names;
    std::vector<Vocabulary> vocabularies;  // aligned with bag_names
    std::vector<Document> documents;

    std::size_t num_bags() const { return bag_names.size(); }
    std::size_t size() const { return documents.size(); }

    std::optional<std::size_t> bag_position(const std::string& name) const {
        auto it = std::find(bag_names.begin(), bag_names.end(), name);
        if (it == bag_names.end()) return std::nullopt;
        return static_cast<std::size_t>(it - bag_names.begin());
    }
};

/// A document before vocabulary mapping: bag -> token -> count.
struct RawDocument {
    std::string id;
    std::map<std::string, std::map<std::string, Count>> bags;
    std::optional<std::string> label;
};

struct PruneOptions {
    std::uint64_t min_total = 4;
    std::uint64_t min_docs = 3;
    std::set<std::string> stopwords;
};

namespace detail {

inline RawDocument parse_document_line(const std::string& line, std::size_t line_no,
                                       const std::set<std::string>& bag_names) {
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
    RawDocument doc;
    if (auto it = j.find("id"); it != j.end()) {
        if (!it->is_string()) throw ParseError(where + ": field 'id' must be a string");
        doc.id = it->get<std::string>();
    } else {
        throw ParseError(where + ": missing required field 'id'");
    }
    auto bags = j.find("bags");
    if (bags == j.end() || !bags->is_object()) throw ParseError(where + ": field 'bags' must be an object");
    for (auto& [bag, counts] : bags->items()) {
        if (!bag_names.contains(bag)) throw SchemaError(where + ": unknown bag '" + bag + "'");
        if (!counts.is_object()) throw ParseError(where + ": bag '" + bag + "' must be an object");
        auto& target = doc.bags[bag];
        for (auto& [token, value] : counts.items()) {
            if (!value.is_number_integer()) {
                throw ParseError(where + ": count for token '" + token + "' must be an integer");
            }
            const auto c = value.get<std::int64_t>();
            if (c <= 0) {
                throw ValidationError(where + ": count for token '" + token + "' must be positive, got " +
                                      std::to_string(c));
            }
            target[token] = static_cast<Count>(c);
        }
    }
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw ParseError(where + ": field 'label' must be a string");
        doc.label = it->get<std::string>();
    }
    return doc;
}

}  // namespace detail

/// Reads a JSON Lines corpus. Blank lines are skipped; line numbers are 1-based.
inline std::vector<RawDocument> read_raw_documents(std::istream& in, const std::vector<std::string>& bag_names) {
    const std::set<std::string> allowed(bag_names.begin(), bag_names.end());
    std::vector<RawDocument> docs;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto doc = detail::parse_document_line(line, line_no, allowed);
        if (!seen.insert(doc.id).second) {
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate document id '" + doc.id + "'");
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

inline std::vector<RawDocument> read_raw_documents(const std::string& path, const std::vector<std::string>& bag_names) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file '" + path + "'");
    return read_raw_documents(in, bag_names);
}

/// Per-bag vocabulary: a token survives iff total_freq >= min_total,
/// doc_freq >= min_docs and it is not a stopword. Indices run in descending
/// total_freq, ties broken lexicographically.
inline Vocabulary build_vocabulary(const std::vector<RawDocument>& docs, const std::string& bag,
                                   const PruneOptions& opts) {
    if (opts.min_total < 1 || opts.min_docs < 1) throw ArgumentError("min_total and min_docs must be >= 1");
    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> freq;  // token -> (total, docs)
    for (const auto& d : docs) {
        auto it = d.bags.find(bag);
        if (it == d.bags.end()) continue;
        for (const auto& [token, c] : it->second) {
            auto& f = freq[token];
            f.first += c;
            f.second += 1;
        }
    }
    std::vector<std::pair<std::string, std::pair<std::uint64_t, std::uint64_t>>> kept;
    for (auto& [token, f] : freq) {
        if (f.first >= opts.min_total && f.second >= opts.min_docs && !opts.stopwords.contains(token)) {
            kept.emplace_back(token, f);
        }
    }
    if (kept.empty()) throw EmptyVocabularyError("all tokens pruned from bag '" + bag + "'");
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.first < b.first;
    });
    std::vector<std::string> tokens;
    tokens.reserve(kept.size());
    for (const auto& k : kept) tokens.push_back(k.first);
    Vocabulary v = Vocabulary::from_tokens(bag, std::move(tokens));
    for (std::size_t j = 0; j < kept.size(); ++j) {
        v.total_freq[j] = kept[j].second.first;
        v.doc_freq[j] = kept[j].second.second;
    }
    return v;
}

/// Maps raw documents onto fixed vocabularies, dropping unknown tokens, and
/// recomputes doc_freq / total_freq for these documents. Tokens that occur in
/// none of the documents keep doc_freq = 0.
inline Corpus project_corpus(const std::vector<RawDocument>& docs, std::vector<Vocabulary> vocabularies) {
    Corpus corpus;
    for (auto& v : vocabularies) {
        corpus.bag_names.push_back(v.bag_name);
        std::fill(v.doc_freq.begin(), v.doc_freq.end(), 0);
        std::fill(v.total_freq.begin(), v.total_freq.end(), 0);
    }
    corpus.vocabularies = std::move(vocabularies);
    corpus.documents.reserve(docs.size());
    for (const auto& raw : docs) {
        Document doc;
        doc.id = raw.id;
        doc.label = raw.label;
        doc.bags.resize(corpus.num_bags());
        for (std::size_t b = 0; b < corpus.num_bags(); ++b) {
            auto& vocab = corpus.vocabularies[b];
            auto it = raw.bags.find(vocab.bag_name);
            if (it == raw.bags.end()) continue;
            for (const auto& [token, c] : it->second) {
                if (auto j = vocab.find(token)) {
                    doc.bags[b].push_back({*j, c});
                    vocab.total_freq[*j] += c;
                    vocab.doc_freq[*j] += 1;
                }
            }
            std::sort(doc.bags[b].begin(), doc.bags[b].end(),
                      [](const Entry& x, const Entry& y) { return x.token < y.token; });
        }
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

inline Corpus build_corpus(const std::vector<RawDocument>& docs, const std::vector<std::string>& bag_names,
                           const PruneOptions& opts) {
    std::vector<Vocabulary> vocabs;
    for (const auto& bag : bag_names) vocabs.push_back(build_vocabulary(docs, bag, opts));
    return project_corpus(docs, std::move(vocabs));
}

inline Corpus load_corpus(const std::string& path, const std::vector<std::string>& bag_names,
                          const PruneOptions& opts = {}) {
    return build_corpus(read_raw_documents(path, bag_names), bag_names, opts);
}

/// Writes the retained counts back as JSON Lines.
inline void write_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& doc : corpus.documents) {
        nlohmann::ordered_json j;
        j["id"] = doc.id;
        nlohmann::ordered_json bags = nlohmann::ordered_json::object();
        for (std::size_t b = 0; b < corpus.num_bags(); ++b) {
            nlohmann::ordered_json counts = nlohmann::ordered_json::object();
            for (const auto& e : doc.bags[b]) counts[corpus.vocabularies[b].tokens[e.token]] = e.count;
            bags[corpus.bag_names[b]] = std::move(counts);
        }
        j["bags"] = std::move(bags);
        if (doc.label) j["label"] = *doc.label;
        out << j.dump() << '\n';
    }
}

inline void write_vocabulary(const Vocabulary& vocab, std::ostream& out) {
    out << "#J=" << vocab.size() << '\n';
    for (const auto& t : vocab.tokens) out << t << '\n';
}

inline Vocabulary read_vocabulary(std::istream& in, const std::string& bag) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("#J=", 0) != 0) {
        throw ParseError("vocabulary file: missing '#J=<count>' header");
    }
    std::size_t expected = 0;
    try {
        expected = std::stoul(header.substr(3));
    } catch (const std::exception&) {
        throw ParseError("vocabulary file: bad header '" + header + "'");
    }
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    if (tokens.size() != expected) {
        throw ParseError("vocabulary file: header says " + std::to_string(expected) + " tokens, found " +
                         std::to_string(tokens.size()));
    }
    return Vocabulary::from_tokens(bag, std::move(tokens));
}

/// Inverse document frequency ln(I / df); 0 for tokens absent from the corpus.
inline double idf(std::uint64_t num_docs, std::uint64_t doc_freq) {
    if (doc_freq == 0 || num_docs == 0) return 0.0;
    return std::log(static_cast<double>(num_docs) / static_cast<double>(doc_freq));
}

/// weight(i, j) = count(i, j) * ln(I / doc_freq[j]); unnormalized.
/// Zero weights are kept so that each vector mirrors the document's support.
inline std::vector<SparseWeights> tfidf_weights(const Corpus& corpus, std::size_t bag) {
    const auto& vocab = corpus.vocabularies.at(bag);
    const std::uint64_t num_docs = corpus.size();
    std::vector<SparseWeights> out(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& counts = corpus.documents[i].bags[bag];
        out[i].reserve(counts.size());
        for (const auto& e : counts) {
            out[i].emplace_back(e.token, e.count * idf(num_docs, vocab.doc_freq[e.token]));
        }
    }
    return out;
}

}  // namespace dpca
