#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dpca/corpus.hpp"
#include "support/oracles.hpp"

using namespace dpca;
using dpca::testing::raw_doc;

namespace {

std::vector<RawDocument> parse(const std::string& text, std::vector<std::string> bags = {"body"}) {
    std::istringstream in(text);
    return read_raw_documents(in, bags);
}

PruneOptions no_pruning() { return {1, 1, {}}; }

}  // namespace

TEST(LoadCorpus, ParsesDocumentLine) {
    auto docs = parse(R"({"id":"d1","bags":{"body":{"cat":2,"dog":1}}})" "\n");
    auto corpus = build_corpus(docs, {"body"}, no_pruning());
    ASSERT_EQ(corpus.size(), 1u);
    EXPECT_EQ(corpus.documents[0].id, "d1");
    EXPECT_EQ(corpus.documents[0].length(), 3u);
}

TEST(LoadCorpus, UnknownBagIsSchemaError) {
    EXPECT_THROW(parse(R"({"id":"d1","bags":{"title":{"a":1}}})"), SchemaError);
}

TEST(LoadCorpus, EmptyDocumentAccepted) {
    auto docs = parse(R"({"id":"d1","bags":{"body":{"a":1}}})" "\n" R"({"id":"d2","bags":{"body":{}}})" "\n");
    auto corpus = build_corpus(docs, {"body"}, no_pruning());
    EXPECT_EQ(corpus.documents[1].length(), 0u);
}

TEST(LoadCorpus, NonPositiveCountIsValidationError) {
    EXPECT_THROW(parse(R"({"id":"d1","bags":{"body":{"a":0}}})"), ValidationError);
    EXPECT_THROW(parse(R"({"id":"d1","bags":{"body":{"a":-2}}})"), ValidationError);
}

TEST(LoadCorpus, MalformedLineReportsLineNumber) {
    try {
        parse(R"({"id":"d1","bags":{"body":{"a":1}}})" "\n" R"({"id":"d2","bags":)" "\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(LoadCorpus, DuplicateIdsRejected) {
    EXPECT_THROW(parse(R"({"id":"d1","bags":{}})" "\n" R"({"id":"d1","bags":{}})"), ValidationError);
}

TEST(LoadCorpus, LabelIsOptional) {
    auto docs = parse(R"({"id":"d1","bags":{"body":{"a":1}},"label":"x"})" "\n" R"({"id":"d2","bags":{"body":{"a":1}}})");
    EXPECT_EQ(docs[0].label.value(), "x");
    EXPECT_FALSE(docs[1].label.has_value());
}

TEST(BuildVocabulary, StopwordsExcluded) {
    std::vector<RawDocument> docs;
    for (int i = 0; i < 5; ++i) docs.push_back(raw_doc("d" + std::to_string(i), {{"the", 10}, {"cat", 1}}));
    PruneOptions opts{1, 1, {"the"}};
    auto v = build_vocabulary(docs, "body", opts);
    EXPECT_FALSE(v.find("the"));
    EXPECT_TRUE(v.find("cat"));
}

TEST(BuildVocabulary, DefaultThresholdBoundaryIsKept) {
    // 4 occurrences over 3 documents survives min_total = 4, min_docs = 3.
    std::vector<RawDocument> docs{raw_doc("a", {{"x", 2}}), raw_doc("b", {{"x", 1}}), raw_doc("c", {{"x", 1}})};
    auto v = build_vocabulary(docs, "body", PruneOptions{});
    EXPECT_TRUE(v.find("x"));
}

TEST(BuildVocabulary, TooFewDocumentsPruned) {
    std::vector<RawDocument> docs{raw_doc("a", {{"x", 5}, {"y", 4}}), raw_doc("b", {{"x", 5}, {"y", 4}}),
                                  raw_doc("c", {{"y", 4}})};
    auto v = build_vocabulary(docs, "body", PruneOptions{});
    EXPECT_FALSE(v.find("x"));
    EXPECT_TRUE(v.find("y"));
}

TEST(BuildVocabulary, AllPrunedIsError) {
    std::vector<RawDocument> docs{raw_doc("a", {{"x", 1}})};
    EXPECT_THROW(build_vocabulary(docs, "body", PruneOptions{}), EmptyVocabularyError);
}

TEST(BuildVocabulary, OrderIsFrequencyThenLexicographic) {
    std::vector<RawDocument> docs{raw_doc("a", {{"b", 2}, {"a", 2}, {"z", 5}, {"c", 1}})};
    auto v = build_vocabulary(docs, "body", no_pruning());
    EXPECT_EQ(v.tokens, (std::vector<std::string>{"z", "a", "b", "c"}));
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_EQ(v.token_index.at(v.tokens[j]), j);
}

TEST(BuildVocabulary, PruningIsMonotoneAndIndicesContiguous) {
    std::mt19937_64 gen(4);
    std::uniform_int_distribution<int> tok(0, 40), cnt(1, 4);
    std::vector<RawDocument> docs;
    for (int i = 0; i < 60; ++i) {
        std::map<std::string, Count> c;
        for (int w = 0; w < 8; ++w) c["t" + std::to_string(tok(gen))] = cnt(gen);
        docs.push_back(raw_doc("d" + std::to_string(i), c));
    }
    for (std::uint64_t t = 1; t < 12; ++t) {
        for (std::uint64_t d = 1; d < 8; ++d) {
            auto base = build_vocabulary(docs, "body", PruneOptions{t, d, {}});
            for (std::size_t j = 0; j < base.size(); ++j) {
                EXPECT_EQ(base.token_index.at(base.tokens[j]), j);
                EXPECT_GE(base.doc_freq[j], 1u);
                EXPECT_GE(base.total_freq[j], base.doc_freq[j]);
            }
            auto stricter = build_vocabulary(docs, "body", PruneOptions{t + 1, d, {}});
            for (const auto& token : stricter.tokens) EXPECT_TRUE(base.find(token));
            auto stricter_docs = build_vocabulary(docs, "body", PruneOptions{t, d + 1, {}});
            for (const auto& token : stricter_docs.tokens) EXPECT_TRUE(base.find(token));
        }
    }
}

TEST(BuildCorpus, PrunedTokensDroppedFromDocuments) {
    std::vector<RawDocument> docs{raw_doc("a", {{"x", 2}, {"rare", 1}}), raw_doc("b", {{"x", 2}})};
    auto corpus = build_corpus(docs, {"body"}, PruneOptions{2, 1, {}});
    EXPECT_EQ(corpus.documents[0].length(), 2u);
}

TEST(BuildCorpus, RoundTripPreservesRetainedCounts) {
    const std::string text =
        R"({"id":"a","bags":{"body":{"x":2,"y":1},"title":{"t":3}},"label":"L"})" "\n"
        R"({"id":"b","bags":{"body":{"x":1}}})" "\n";
    auto corpus = build_corpus(parse(text, {"body", "title"}), {"body", "title"}, no_pruning());
    std::ostringstream out;
    write_corpus(corpus, out);
    auto again = build_corpus(parse(out.str(), {"body", "title"}), {"body", "title"}, no_pruning());
    ASSERT_EQ(again.size(), corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        EXPECT_EQ(again.documents[i].id, corpus.documents[i].id);
        EXPECT_EQ(again.documents[i].label, corpus.documents[i].label);
        for (std::size_t b = 0; b < 2; ++b) EXPECT_EQ(again.documents[i].bags[b], corpus.documents[i].bags[b]);
    }
}

TEST(Vocabulary, FileRoundTrip) {
    auto v = build_vocabulary({raw_doc("a", {{"x", 2}, {"y", 1}})}, "body", no_pruning());
    std::ostringstream out;
    write_vocabulary(v, out);
    EXPECT_EQ(out.str(), "#J=2\nx\ny\n");
    std::istringstream in(out.str());
    EXPECT_EQ(read_vocabulary(in, "body").tokens, v.tokens);
    std::istringstream bad("#J=3\nx\n");
    EXPECT_THROW(read_vocabulary(bad, "body"), ParseError);
}

TEST(Tfidf, TokenInEveryDocumentHasZeroWeight) {
    std::vector<RawDocument> docs{raw_doc("a", {{"x", 3}}), raw_doc("b", {{"x", 1}})};
    auto corpus = build_corpus(docs, {"body"}, no_pruning());
    auto w = tfidf_weights(corpus, 0);
    EXPECT_EQ(w[0][0].second, 0.0);
}

TEST(Tfidf, FormulaEvaluation) {
    // count 2, I = 10, doc_freq 5 -> 2 ln 2.
    std::vector<RawDocument> docs;
    for (int i = 0; i < 10; ++i) {
        std::map<std::string, Count> c{{"filler", 1}};
        if (i < 5) c["x"] = i == 0 ? 2 : 1;
        docs.push_back(raw_doc("d" + std::to_string(i), c));
    }
    auto corpus = build_corpus(docs, {"body"}, no_pruning());
    auto w = tfidf_weights(corpus, 0);
    const auto j = *corpus.vocabularies[0].find("x");
    double value = 0.0;
    for (const auto& [t, x] : w[0])
        if (t == j) value = x;
    EXPECT_NEAR(value, 2.0 * std::log(2.0), 1e-12);
    EXPECT_NEAR(value, 1.3863, 1e-4);
}

TEST(Tfidf, EmptyDocumentHasEmptyVector) {
    std::vector<RawDocument> docs{raw_doc("a", {{"x", 3}}), raw_doc("b", {})};
    auto corpus = build_corpus(docs, {"body"}, no_pruning());
    EXPECT_TRUE(tfidf_weights(corpus, 0)[1].empty());
}
