// dpca: train, evaluate and apply discrete component models from the shell.

#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpca/dpca.hpp"

namespace {

using namespace dpca;

constexpr const char* kToolVersion = "1.0.0";

struct Globals {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string manifest;
};

struct CorpusOptions {
    std::string path;
    std::vector<std::string> bags{"body"};
    std::uint64_t min_total = 4;
    std::uint64_t min_docs = 3;
    std::string stopwords;

    void add(CLI::App* cmd, bool with_pruning) {
        cmd->add_option("--corpus", path, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
        if (!with_pruning) return;
        cmd->add_option("--bags", bags, "Bag names to use, comma separated")->delimiter(',')->capture_default_str();
        cmd->add_option("--min-total", min_total, "Drop tokens with fewer total occurrences")->capture_default_str();
        cmd->add_option("--min-docs", min_docs, "Drop tokens found in fewer documents")->capture_default_str();
        cmd->add_option("--stopwords", stopwords, "File with one stopword per line")->check(CLI::ExistingFile);
    }

    PruneOptions prune() const {
        PruneOptions p;
        p.min_total = min_total;
        p.min_docs = min_docs;
        if (!stopwords.empty()) {
            std::ifstream in(stopwords);
            std::string line;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (!line.empty()) p.stopwords.insert(line);
            }
        }
        return p;
    }

    Corpus load() const { return load_corpus(path, bags, prune()); }
};

struct ModelOptions {
    std::size_t K = 0;
    std::string tree;
    std::string variant = "dirichlet";
    double alpha_total = 1.0;
    double prior_strength = 1.0;
    std::size_t burn_in = 100;
    std::size_t recording = 50;

    void add(CLI::App* cmd, bool single_k) {
        if (single_k) cmd->add_option("--k", K, "Number of components (implied by --tree)");
        cmd->add_option("--tree", tree, "Balanced hierarchy as B,D (branching factor, depth)");
        cmd->add_option("--variant", variant, "dirichlet | gamma-poisson")->capture_default_str();
        cmd->add_option("--alpha-total", alpha_total, "Total Dirichlet concentration on proportions")->capture_default_str();
        cmd->add_option("--prior-strength", prior_strength, "Pseudo-count mass of each component's word prior")
            ->capture_default_str();
        cmd->add_option("--burn-in", burn_in, "Unrecorded Gibbs cycles")->capture_default_str();
        cmd->add_option("--recording", recording, "Recorded Gibbs cycles")->capture_default_str();
    }

    std::optional<std::pair<std::size_t, std::size_t>> tree_spec() const {
        if (tree.empty()) return std::nullopt;
        const auto comma = tree.find(',');
        if (comma == std::string::npos) throw ArgumentError("--tree expects B,D");
        std::size_t b = 0, d = 0;
        try {
            b = std::stoul(tree.substr(0, comma));
            d = std::stoul(tree.substr(comma + 1));
        } catch (const std::exception&) {
            throw ArgumentError("--tree expects two integers B,D, got '" + tree + "'");
        }
        return std::make_pair(b, d);
    }

    InitOptions init(std::uint64_t seed) const {
        InitOptions o;
        o.variant = parse_variant(variant);
        o.tree_spec = tree_spec();
        o.alpha_total = alpha_total;
        o.prior_strength = prior_strength;
        o.seed = seed;
        return o;
    }

    std::size_t resolved_K() const {
        if (auto t = tree_spec()) {
            const std::size_t n = TopicTree::balanced_size(t->first, t->second);
            if (K != 0 && K != n)
                throw ArgumentError("--k " + std::to_string(K) + " disagrees with --tree " + tree + " (" +
                                    std::to_string(n) + " nodes)");
            return n;
        }
        if (K == 0) throw ArgumentError("give --k or --tree");
        return K;
    }
};

struct SamplingOptions {
    std::size_t burn_in = 10;
    std::size_t samples = 50;

    void add(CLI::App* cmd, const std::string& samples_flag) {
        cmd->add_option("--burn-in", burn_in, "Per-document burn-in cycles")->capture_default_str();
        cmd->add_option(samples_flag, samples, "Recorded per-document cycles")->capture_default_str();
    }
};

/// Output stream: the file named by `path`, or stdout when empty.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw Error("cannot write '" + path + "'");
        }
    }
    std::ostream& operator*() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::string fmt(double v) { return format_shortest(v); }

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

/// New documents mapped onto a trained model's vocabularies.
Corpus load_for_model(const std::string& path, const ComponentModel& model) {
    return project_corpus(read_raw_documents(path, model.bag_names()), model.vocabularies());
}

std::vector<PosteriorSummary> fit_all(const ComponentModel& model, const Corpus& corpus, const SamplingOptions& s,
                                      std::uint64_t seed, std::size_t workers) {
    std::vector<PosteriorSummary> out(corpus.size());
    parallel_for(corpus.size(), workers, [&](std::size_t i) {
        Rng rng(derive_seed(seed, {0x1f4, i}));
        out[i] = fit_document(model, corpus.documents[i], {s.burn_in, s.samples}, rng).summary;
    });
    return out;
}

void write_manifest(const CLI::App& app, const CLI::App& cmd, const Globals& g, const std::string& out,
                    const std::vector<std::string>& argv) {
    std::string path = g.manifest;
    if (path.empty()) {
        if (out.empty()) return;
        path = out + ".manifest";
    }
    nlohmann::ordered_json j;
    j["tool"] = "dpca";
    j["version"] = kToolVersion;
    j["command"] = cmd.get_name();
    j["argv"] = argv;
    j["seed"] = g.seed;
    j["workers"] = g.workers;
    // globals plus the options of the command that ran
    std::istringstream all(app.config_to_str(true, false));
    std::string resolved, line;
    while (std::getline(all, line)) {
        const auto eq = line.find('=');
        const auto dot = line.find('.');
        if (dot == std::string::npos || dot > eq || line.compare(0, dot, cmd.get_name()) == 0) resolved += line + '\n';
    }
    j["resolved_config"] = resolved;
    std::ofstream f(path);
    if (!f) throw Error("cannot write manifest '" + path + "'");
    f << j.dump(1) << '\n';
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const SchemaError*>(&e)) return "SchemaError";
    if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
    if (dynamic_cast<const EmptyVocabularyError*>(&e)) return "EmptyVocabularyError";
    if (dynamic_cast<const ImpossibleTokenError*>(&e)) return "ImpossibleTokenError";
    if (dynamic_cast<const NonFiniteError*>(&e)) return "NonFiniteError";
    if (dynamic_cast<const ArgumentError*>(&e)) return "ArgumentError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    return "InternalError";
}

void print_error(const std::string& kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete component analysis: train, select K, infer, query, classify, export, re-rank"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file of option values (command line wins)");

    Globals g;
    app.add_option("--seed", g.seed, "Master random seed")->capture_default_str();
    app.add_option("--workers", g.workers, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--manifest", g.manifest, "Run manifest path (default: <out>.manifest)");

    // train
    auto* train_cmd = app.add_subcommand("train", "Fit a model by Gibbs sampling");
    CorpusOptions train_corpus;
    ModelOptions train_model;
    std::string train_out, train_log;
    train_corpus.add(train_cmd, true);
    train_model.add(train_cmd, true);
    train_cmd->add_option("--out", train_out, "Model JSON output")->required();
    train_cmd->add_option("--log", train_log, "Per-cycle progress TSV");

    // evidence
    auto* ev_cmd = app.add_subcommand("evidence", "Estimate log evidence for several K");
    CorpusOptions ev_corpus;
    ModelOptions ev_model;
    std::vector<std::size_t> ev_ks;
    std::size_t ev_jobs = 1;
    std::string ev_out;
    ev_corpus.add(ev_cmd, true);
    ev_model.add(ev_cmd, false);
    ev_cmd->add_option("--k", ev_ks, "Candidate K values, comma separated")->delimiter(',')->required();
    ev_cmd->add_option("--jobs", ev_jobs, "Candidate models trained at once")->capture_default_str();
    ev_cmd->add_option("--out", ev_out, "TSV output (default stdout)");

    // infer
    auto* inf_cmd = app.add_subcommand("infer", "Posterior proportions for documents under a fixed model");
    std::string inf_model, inf_out;
    CorpusOptions inf_corpus;
    SamplingOptions inf_sampling;
    inf_cmd->add_option("--model", inf_model, "Model JSON")->required()->check(CLI::ExistingFile);
    inf_corpus.add(inf_cmd, false);
    inf_sampling.add(inf_cmd, "--cycles");
    inf_cmd->add_option("--out", inf_out, "JSONL output (default stdout)");

    // query
    auto* q_cmd = app.add_subcommand("query", "Score queries against documents");
    std::string q_model, q_query, q_out;
    CorpusOptions q_corpus;
    SamplingOptions q_sampling;
    q_cmd->add_option("--model", q_model, "Model JSON")->required()->check(CLI::ExistingFile);
    q_corpus.add(q_cmd, false);
    q_cmd->add_option("--query", q_query, "Query JSONL (same shape as the corpus)")->required()->check(CLI::ExistingFile);
    q_sampling.add(q_cmd, "--n-samples");
    q_cmd->add_option("--out", q_out, "TSV output (default stdout)");

    // classify
    auto* cls_cmd = app.add_subcommand("classify", "Predict the class bag value of each document");
    std::string cls_model, cls_bag, cls_out;
    std::vector<std::string> cls_values;
    CorpusOptions cls_corpus;
    SamplingOptions cls_sampling;
    cls_cmd->add_option("--model", cls_model, "Model JSON")->required()->check(CLI::ExistingFile);
    cls_corpus.add(cls_cmd, false);
    cls_cmd->add_option("--class-bag", cls_bag, "Bag holding the class token")->required();
    cls_cmd->add_option("--classes", cls_values, "Class values (default: the class bag vocabulary)")->delimiter(',');
    cls_sampling.add(cls_cmd, "--n-samples");
    cls_cmd->add_option("--out", cls_out, "TSV output (default stdout)");

    // export-features
    auto* ex_cmd = app.add_subcommand("export-features", "Write SVMlight features");
    std::string ex_model, ex_mode = "words", ex_out;
    bool ex_raw_counts = false;
    CorpusOptions ex_corpus;
    SamplingOptions ex_sampling;
    ex_corpus.add(ex_cmd, true);
    ex_cmd->add_option("--model", ex_model, "Model JSON (required for component features)")->check(CLI::ExistingFile);
    ex_cmd->add_option("--mode", ex_mode, "words | components | words+components")->capture_default_str();
    ex_cmd->add_flag("--raw-component-counts", ex_raw_counts, "Component features without the TF-IDF transform");
    ex_sampling.add(ex_cmd, "--cycles");
    ex_cmd->add_option("--out", ex_out, "SVMlight output; labels go to <out>.labels")->required();

    // correlations
    auto* cor_cmd = app.add_subcommand("correlations", "Pairwise correlations of component scores");
    std::string cor_model, cor_scoring = "proportions", cor_out, cor_svg;
    CorpusOptions cor_corpus;
    SamplingOptions cor_sampling;
    cor_cmd->add_option("--model", cor_model, "Model JSON")->required()->check(CLI::ExistingFile);
    cor_corpus.add(cor_cmd, false);
    cor_cmd->add_option("--scoring", cor_scoring, "proportions (m times length) | intensities (discrete ICA)")
        ->check(CLI::IsMember({"proportions", "intensities"}))
        ->capture_default_str();
    cor_sampling.add(cor_cmd, "--cycles");
    cor_cmd->add_option("--out", cor_out, "Summary TSV (default stdout)");
    cor_cmd->add_option("--svg", cor_svg, "Box plot SVG output");

    // topics
    auto* top_cmd = app.add_subcommand("topics", "Most probable tokens of each component");
    std::string top_model, top_out;
    std::size_t top_n = 10;
    top_cmd->add_option("--model", top_model, "Model JSON")->required()->check(CLI::ExistingFile);
    top_cmd->add_option("--top", top_n, "Tokens per component")->capture_default_str();
    top_cmd->add_option("--out", top_out, "TSV output (default stdout)");

    // rerank
    auto* rr_cmd = app.add_subcommand("rerank", "TF-IDF retrieval re-ranked by query match");
    std::string rr_model, rr_query, rr_out;
    std::size_t rr_candidates = 1000;
    CorpusOptions rr_corpus;
    SamplingOptions rr_sampling;
    rr_cmd->add_option("--model", rr_model, "Model JSON")->required()->check(CLI::ExistingFile);
    rr_corpus.add(rr_cmd, false);
    rr_cmd->add_option("--query", rr_query, "Query JSONL with exactly one query")->required()->check(CLI::ExistingFile);
    rr_cmd->add_option("--candidates", rr_candidates, "TF-IDF candidates to re-rank")->capture_default_str();
    rr_sampling.add(rr_cmd, "--n-samples");
    rr_cmd->add_option("--out", rr_out, "TSV output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("UsageError", e.what());
        return 2;
    }
    const std::vector<std::string> args(argv, argv + argc);

    try {
        if (train_cmd->parsed()) {
            auto corpus = train_corpus.load();
            const std::size_t K = train_model.resolved_K();
            auto model = init_model(corpus, K, train_model.init(g.seed));
            TrainConfig cfg{train_model.burn_in, train_model.recording, g.seed, g.workers};
            std::unique_ptr<std::ofstream> log;
            if (!train_log.empty()) {
                log = std::make_unique<std::ofstream>(train_log);
                if (!*log) throw Error("cannot write '" + train_log + "'");
                *log << "cycle\tphase\tlog_likelihood\tseconds\n";
            }
            auto result = train(corpus, std::move(model), cfg, [&](const CycleRecord& r) {
                if (log)
                    *log << r.cycle << '\t' << (r.recording ? "recording" : "burn-in") << '\t' << fmt(r.log_likelihood)
                         << '\t' << fmt(r.seconds) << '\n';
            });
            save_model(result.model, train_out);
            write_manifest(app, *train_cmd, g, train_out, args);
        } else if (ev_cmd->parsed()) {
            if (!ev_model.tree.empty()) throw ArgumentError("evidence sweeps flat models; --tree is not supported");
            auto corpus = ev_corpus.load();
            SelectKConfig cfg;
            cfg.train = {ev_model.burn_in, ev_model.recording, g.seed, g.workers};
            cfg.init = ev_model.init(g.seed);
            cfg.jobs = ev_jobs;
            auto result = select_K(corpus, ev_ks, cfg);
            Output out(ev_out);
            *out << "K\tlog_evidence\tn_samples\tvariance_diag\tseconds\tbest\n";
            for (std::size_t r = 0; r < result.rows.size(); ++r) {
                const auto& row = result.rows[r];
                *out << row.estimate.K << '\t' << fmt(row.estimate.log_evidence) << '\t' << row.estimate.n_samples
                     << '\t' << fmt(row.estimate.variance_diag) << '\t' << fmt(row.seconds) << '\t'
                     << (r == result.best ? "*" : "") << '\n';
            }
            write_manifest(app, *ev_cmd, g, ev_out, args);
        } else if (inf_cmd->parsed()) {
            auto model = load_model(inf_model);
            auto corpus = load_for_model(inf_corpus.path, model);
            auto summaries = fit_all(model, corpus, inf_sampling, g.seed, g.workers);
            Output out(inf_out);
            for (const auto& s : summaries) {
                nlohmann::ordered_json j;
                j["id"] = s.id;
                j["m_mean"] = s.m_mean;
                j["m_std"] = s.m_std;
                j["dirichlet_fit"] = s.dirichlet_fit;
                j["precision_capped"] = s.precision_capped;
                if (!s.lambda_mean.empty()) j["lambda_mean"] = s.lambda_mean;
                *out << j.dump() << '\n';
            }
            write_manifest(app, *inf_cmd, g, inf_out, args);
        } else if (q_cmd->parsed()) {
            auto model = load_model(q_model);
            auto corpus = load_for_model(q_corpus.path, model);
            std::vector<Query> queries;
            for (const auto& raw : read_raw_documents(q_query, model.bag_names())) {
                std::vector<std::string> dropped;
                queries.push_back(make_query(model, raw, &dropped));
                for (const auto& d : dropped) warn("query '" + raw.id + "': dropped unknown token " + d);
                if (queries.back().empty()) throw ArgumentError("query '" + raw.id + "' is empty after vocabulary filtering");
            }
            std::vector<double> scores(queries.size() * corpus.size());
            parallel_for(scores.size(), g.workers, [&](std::size_t x) {
                const std::size_t q = x / corpus.size(), i = x % corpus.size();
                Rng rng(derive_seed(g.seed, {0x9e, q, i}));
                scores[x] = query_match(model, corpus.documents[i], queries[q], {q_sampling.burn_in, q_sampling.samples}, rng)
                                .log_score;
            });
            Output out(q_out);
            *out << "query_id\tdoc_id\tlog_score\n";
            for (std::size_t x = 0; x < scores.size(); ++x) {
                const std::size_t q = x / corpus.size(), i = x % corpus.size();
                *out << queries[q].id << '\t' << corpus.documents[i].id << '\t' << fmt(scores[x]) << '\n';
            }
            write_manifest(app, *q_cmd, g, q_out, args);
        } else if (cls_cmd->parsed()) {
            auto model = load_model(cls_model);
            auto corpus = load_for_model(cls_corpus.path, model);
            auto b = model.bag_position(cls_bag);
            if (!b) throw SchemaError("model has no class bag '" + cls_bag + "'");
            if (cls_values.empty()) cls_values = model.bags[*b].tokens;
            std::vector<Classification> results(corpus.size());
            parallel_for(corpus.size(), g.workers, [&](std::size_t i) {
                results[i] = classify(model, corpus.documents[i], cls_bag, cls_values,
                                      {cls_sampling.burn_in, cls_sampling.samples}, derive_seed(g.seed, {0xc1a, i}));
            });
            Output out(cls_out);
            *out << "id\tpredicted";
            for (const auto& v : cls_values) *out << '\t' << v;
            *out << '\n';
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                if (results[i].tie) warn("document '" + corpus.documents[i].id + "': tied class scores");
                *out << corpus.documents[i].id << '\t' << results[i].predicted_value;
                for (double s : results[i].log_scores) *out << '\t' << fmt(s);
                *out << '\n';
            }
            write_manifest(app, *cls_cmd, g, cls_out, args);
        } else if (ex_cmd->parsed()) {
            const auto mode = parse_feature_mode(ex_mode);
            std::optional<ComponentModel> model;
            if (!ex_model.empty()) model = load_model(ex_model);
            if (mode != FeatureMode::words && !model) throw ArgumentError("--mode " + ex_mode + " needs --model");
            auto corpus = model ? load_for_model(ex_corpus.path, *model) : ex_corpus.load();
            std::vector<PosteriorSummary> summaries;
            if (mode != FeatureMode::words) summaries = fit_all(*model, corpus, ex_sampling, g.seed, g.workers);
            auto fm = build_feature_matrix(corpus, model ? &*model : nullptr, summaries, mode, !ex_raw_counts);
            const auto labels = label_mapping(fm);
            {
                Output out(ex_out);
                export_svmlight(fm, labels, *out);
            }
            Output lab(ex_out + ".labels");
            write_label_mapping(labels, *lab);
            write_manifest(app, *ex_cmd, g, ex_out, args);
        } else if (cor_cmd->parsed()) {
            auto model = load_model(cor_model);
            auto corpus = load_for_model(cor_corpus.path, model);
            const bool intensities = cor_scoring == "intensities";
            if (intensities && (model.variant != Variant::gamma_poisson || model.tree))
                throw ArgumentError("--scoring intensities needs a flat gamma-poisson model");
            auto summaries = fit_all(model, corpus, cor_sampling, g.seed, g.workers);
            Matrix scores(corpus.size(), model.K);
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                const double L = static_cast<double>(corpus.documents[i].length());
                for (std::size_t k = 0; k < model.K; ++k)
                    scores(i, k) = intensities ? summaries[i].lambda_mean[k] : summaries[i].m_mean[k] * L;
            }
            std::vector<std::string> tags;
            if (model.tree)
                for (std::size_t k = 0; k < model.K; ++k) tags.push_back(model.tree->node(k).is_leaf() ? "B" : "T");
            auto rep = component_correlations(scores, tags);
            for (auto k : rep.zero_variance) warn("component " + std::to_string(k) + " has zero variance; pairs excluded");
            Output out(cor_out);
            write_correlation_summary(rep, *out);
            if (!cor_svg.empty()) {
                Output svg(cor_svg);
                write_correlation_svg(rep, *svg);
            }
            write_manifest(app, *cor_cmd, g, cor_out, args);
        } else if (top_cmd->parsed()) {
            auto model = load_model(top_model);
            Output out(top_out);
            *out << (model.tree ? "node\tdepth\tbag\ttokens\n" : "component\tbag\ttokens\n");
            for (std::size_t k = 0; k < model.K; ++k) {
                for (const auto& bag : model.bags) {
                    std::vector<double> p;
                    if (model.tree) {
                        p = node_word_average(*model.tree, model.m_bar, bag.omega, k);
                    } else {
                        auto row = bag.omega.row(k);
                        p.assign(row.begin(), row.end());
                    }
                    std::vector<std::size_t> order(p.size());
                    std::iota(order.begin(), order.end(), 0);
                    const std::size_t n = std::min(top_n, order.size());
                    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                                      [&](std::size_t a, std::size_t b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
                    *out << k << '\t';
                    if (model.tree) *out << model.tree->depth_of(k) << '\t';
                    *out << bag.name << '\t';
                    for (std::size_t r = 0; r < n; ++r) *out << (r ? " " : "") << bag.tokens[order[r]];
                    *out << '\n';
                }
            }
        } else if (rr_cmd->parsed()) {
            auto model = load_model(rr_model);
            auto corpus = load_for_model(rr_corpus.path, model);
            auto raws = read_raw_documents(rr_query, model.bag_names());
            if (raws.size() != 1) throw ValidationError("rerank expects exactly one query, found " + std::to_string(raws.size()));
            std::vector<std::string> dropped;
            auto query = make_query(model, raws[0], &dropped);
            for (const auto& d : dropped) warn("query: dropped unknown token " + d);
            auto index = build_index(corpus);
            auto ranked = tfidf_rank(index, query, rr_candidates);
            if (ranked.empty()) throw ArgumentError("no document shares a weighted token with the query");
            std::vector<std::size_t> candidates;
            for (const auto& r : ranked) candidates.push_back(r.doc);
            RerankConfig cfg;
            cfg.query = {rr_sampling.burn_in, rr_sampling.samples};
            cfg.seed = g.seed;
            cfg.workers = g.workers;
            auto result = rerank(model, corpus, candidates, query, cfg);
            for (const auto& [doc, why] : result.dropped) warn("candidate '" + corpus.documents[doc].id + "' dropped: " + why);
            Output out(rr_out);
            *out << "rank\tdoc_id\tlog_score\ttfidf_rank\n";
            for (std::size_t r = 0; r < result.ranked.size(); ++r) {
                const auto& d = result.ranked[r];
                *out << r + 1 << '\t' << corpus.documents[d.doc].id << '\t' << fmt(d.log_score) << '\t' << d.prior_rank + 1
                     << '\n';
            }
            write_manifest(app, *rr_cmd, g, rr_out, args);
        }
    } catch (const std::exception& e) {
        print_error(error_kind(e), e.what());
        return 1;
    }
    return 0;
}
