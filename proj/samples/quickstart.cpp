// Quickstart: generate a small two-topic corpus, train a model, look at the
// components, infer proportions for a new document and score a query.

#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dpca/dpca.hpp"

int main() {
    using namespace dpca;

    const std::vector<std::vector<std::string>> topics{
        {"goal", "match", "striker", "league", "coach", "penalty"},
        {"vote", "senate", "ballot", "policy", "minister", "campaign"}};
    std::mt19937_64 gen(42);
    std::vector<RawDocument> docs;
    for (int i = 0; i < 120; ++i) {
        std::uniform_real_distribution<double> u;
        const double share = u(gen) < 0.5 ? 0.9 : 0.1;  // mostly one topic
        RawDocument d;
        d.id = "doc" + std::to_string(i);
        for (int w = 0; w < 40; ++w) {
            const auto& words = topics[u(gen) < share ? 0 : 1];
            ++d.bags["body"][words[gen() % words.size()]];
        }
        docs.push_back(std::move(d));
    }

    Corpus corpus = build_corpus(docs, {"body"}, PruneOptions{});
    InitOptions init;
    init.seed = 1;
    TrainConfig cfg;
    cfg.seed = 1;
    cfg.workers = 2;
    TrainResult result = train(corpus, init_model(corpus, 2, init), cfg);
    const ComponentModel& model = result.model;

    std::cout << "log evidence (K=2): " << estimate_log_evidence(result.log_lik_samples, model.K).log_evidence << "\n\n";

    const auto& bag = model.bags[0];
    for (std::size_t k = 0; k < model.K; ++k) {
        std::multimap<double, std::string, std::greater<>> ranked;
        for (std::size_t j = 0; j < bag.tokens.size(); ++j) ranked.emplace(bag.omega(k, j), bag.tokens[j]);
        std::cout << "component " << k << ":";
        int shown = 0;
        for (auto it = ranked.begin(); it != ranked.end() && shown < 4; ++it, ++shown) std::cout << ' ' << it->second;
        std::cout << '\n';
    }

    RawDocument fresh;
    fresh.id = "new";
    fresh.bags["body"] = {{"senate", 3}, {"vote", 2}, {"goal", 1}};
    Corpus held = project_corpus({fresh}, model.vocabularies());
    Rng rng(derive_seed(1, {7}));
    PosteriorSummary s = fit_document(model, held.documents[0], {}, rng).summary;
    std::cout << "\nproportions of '" << s.id << "':";
    for (double m : s.m_mean) std::cout << ' ' << m;
    std::cout << '\n';

    RawDocument qraw;
    qraw.id = "q";
    qraw.bags["body"] = {{"ballot", 1}};
    Query q = make_query(model, qraw);
    std::cout << "log p(ballot | new doc) ~ " << query_match(model, held.documents[0], q, {}, rng).log_score << '\n';
}
