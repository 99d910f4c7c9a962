#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "dpca/corpus.hpp"
#include "dpca/model.hpp"
#include "support/oracles.hpp"

using namespace dpca;
using dpca::testing::raw_doc;

namespace {

Corpus two_token_corpus() {
    // Pooled counts (3, 1) over J = 2.
    std::vector<RawDocument> docs{raw_doc("a", {{"x", 2}, {"y", 1}}), raw_doc("b", {{"x", 1}})};
    return build_corpus(docs, {"body"}, PruneOptions{1, 1, {}});
}

/// root(0) -> {A(1), B(2)}, A -> {3, 4}
TopicTree five_node_tree() {
    std::vector<TreeNode> nodes(5);
    nodes[0].children = {1, 2};
    nodes[0].beta = {0.5, 0.5};
    nodes[1].parent = 0;
    nodes[1].children = {3, 4};
    nodes[1].beta = {0.5, 0.5};
    nodes[2].parent = 0;
    nodes[3].parent = 1;
    nodes[4].parent = 1;
    return TopicTree(nodes);
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("dpca_test_model_" + name);
}

}  // namespace

TEST(InitModel, LaplaceSmoothedPrior) {
    auto model = init_model(two_token_corpus(), 2);
    ASSERT_EQ(model.bags.size(), 1u);
    EXPECT_NEAR(model.bags[0].omega_prior[0], 4.0 / 6.0, 1e-12);
    EXPECT_NEAR(model.bags[0].omega_prior[1], 2.0 / 6.0, 1e-12);
    EXPECT_NEAR(model.alpha[0], 0.5, 1e-15);
    model.validate();
}

TEST(InitModel, PriorStrengthScalesPseudoCounts) {
    InitOptions opts;
    opts.prior_strength = 12.0;
    auto model = init_model(two_token_corpus(), 1, opts);
    EXPECT_NEAR(model.bags[0].omega_prior[0], 8.0, 1e-12);
}

TEST(InitModel, TreeDefaults) {
    InitOptions opts;
    opts.tree_spec = {{3, 3}};
    auto model = init_model(two_token_corpus(), 13, opts);
    ASSERT_TRUE(model.tree);
    const auto& tree = *model.tree;
    EXPECT_EQ(tree.node(0).alpha1, 1.0);
    EXPECT_EQ(tree.node(0).alpha2, 10.0);
    EXPECT_EQ(tree.node(1).alpha1, 10.0);
    EXPECT_EQ(tree.node(1).alpha2, 60.0);
    for (double b : tree.node(0).beta) EXPECT_NEAR(b, 1.0 / 3.0, 1e-15);
    EXPECT_TRUE(tree.node(4).is_leaf());
}

TEST(InitModel, BadArguments) {
    EXPECT_THROW(init_model(two_token_corpus(), 0), ArgumentError);
    InitOptions opts;
    opts.tree_spec = {{7, 3}};
    EXPECT_THROW(init_model(two_token_corpus(), 50, opts), ArgumentError);
}

TEST(InitModel, BalancedTreeSizesFromExperiments) {
    EXPECT_EQ(TopicTree::balanced_size(7, 3), 57u);
    EXPECT_EQ(TopicTree::balanced_size(10, 3), 111u);
}

TEST(InitModel, SeedDeterminesRows) {
    InitOptions a;
    a.seed = 4;
    EXPECT_EQ(init_model(two_token_corpus(), 3, a).bags[0].omega, init_model(two_token_corpus(), 3, a).bags[0].omega);
}

TEST(TreeMapping, RootWithTwoLeaves) {
    auto tree = TopicTree::balanced(2, 2);
    const std::vector<double> q{0.1, 1.0, 1.0}, n{1.0, 0.5, 0.5};
    auto m = map_tree_to_proportions(q, n, tree);
    EXPECT_NEAR(m[0], 0.1, 1e-15);
    EXPECT_NEAR(m[1], 0.45, 1e-15);
    EXPECT_NEAR(m[2], 0.45, 1e-15);
}

TEST(TreeMapping, FiveNodeExample) {
    auto tree = five_node_tree();
    const std::vector<double> q{0.2, 0.5, 1.0, 1.0, 1.0}, n{1.0, 0.6, 0.4, 0.5, 0.5};
    auto m = map_tree_to_proportions(q, n, tree);
    const std::vector<double> expected{0.2, 0.24, 0.32, 0.12, 0.12};
    double s = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_NEAR(m[k], expected[k], 1e-12);
        s += m[k];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(TreeMapping, SingleNode) {
    auto tree = TopicTree::balanced(3, 1);
    auto m = map_tree_to_proportions(std::vector<double>{1.0}, std::vector<double>{1.0}, tree);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0], 1.0);
}

TEST(TreeMapping, BranchesMustSumToOne) {
    auto tree = TopicTree::balanced(2, 2);
    EXPECT_THROW(map_tree_to_proportions(std::vector<double>{0.1, 1, 1}, std::vector<double>{1, 0.5, 0.6}, tree),
                 ValidationError);
}

TEST(TreeInversion, InvertsSimpleExample) {
    auto tree = TopicTree::balanced(2, 2);
    auto p = invert_proportions_to_tree(std::vector<double>{0.1, 0.45, 0.45}, tree);
    EXPECT_NEAR(p.q[0], 0.1, 1e-12);
    EXPECT_NEAR(p.n[1], 0.5, 1e-12);
    EXPECT_NEAR(p.n[2], 0.5, 1e-12);
}

TEST(TreeInversion, AllMassAtRootGivesUniformBranches) {
    auto tree = TopicTree::balanced(2, 2);
    auto p = invert_proportions_to_tree(std::vector<double>{1.0, 0.0, 0.0}, tree);
    EXPECT_EQ(p.q[0], 1.0);
    EXPECT_EQ(p.n[1], 0.5);
    EXPECT_EQ(p.n[2], 0.5);
    auto m = map_tree_to_proportions(p.q, p.n, tree);
    EXPECT_EQ(m, (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(TreeInversion, EmptySubtreeRoundTrips) {
    auto tree = five_node_tree();
    const std::vector<double> m{0.5, 0.0, 0.5, 0.0, 0.0};
    auto p = invert_proportions_to_tree(m, tree);
    auto back = map_tree_to_proportions(p.q, p.n, tree);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(back[k], m[k], 1e-12);
}

TEST(TreeInversion, FiveNodeRoundTrip) {
    auto tree = five_node_tree();
    const std::vector<double> q{0.2, 0.5, 1.0, 1.0, 1.0}, n{1.0, 0.6, 0.4, 0.5, 0.5};
    auto p = invert_proportions_to_tree(map_tree_to_proportions(q, n, tree), tree);
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_NEAR(p.q[k], q[k], 1e-9);
        EXPECT_NEAR(p.n[k], n[k], 1e-9);
    }
}

TEST(TreeMapping, RandomDrawsSumToOneAndRoundTrip) {
    std::mt19937_64 gen(21);
    for (auto [b, d] : {std::pair<std::size_t, std::size_t>{2, 4}, {3, 3}, {7, 2}}) {
        auto tree = TopicTree::balanced(b, d);
        for (int it = 0; it < 2000; ++it) {
            auto [q, n] = dpca::testing::std_tree_prior_draw(gen, tree);
            auto m = map_tree_to_proportions(q, n, tree);
            double s = 0.0;
            for (double x : m) s += x;
            ASSERT_NEAR(s, 1.0, 1e-9);
            auto p = invert_proportions_to_tree(m, tree);
            auto back = map_tree_to_proportions(p.q, p.n, tree);
            for (std::size_t k = 0; k < m.size(); ++k) ASSERT_NEAR(back[k], m[k], 1e-9);
        }
    }
}

TEST(TreeValidation, RejectsInconsistentLinks) {
    std::vector<TreeNode> nodes(2);
    nodes[0].children = {1};
    nodes[0].beta = {1.0};
    EXPECT_THROW(TopicTree{nodes}, ValidationError);  // child lacks parent link
    nodes[1].parent = 0;
    nodes[0].beta = {};
    EXPECT_THROW(TopicTree{nodes}, ValidationError);  // beta size mismatch
}

TEST(TreeValidation, RejectsCycleAndSecondRoot) {
    std::vector<TreeNode> nodes(3);
    nodes[1].parent = 2;
    nodes[2].parent = 1;
    nodes[1].children = {2};
    nodes[1].beta = {1.0};
    nodes[2].children = {1};
    nodes[2].beta = {1.0};
    EXPECT_THROW(TopicTree{nodes}, ValidationError);
    std::vector<TreeNode> two_roots(2);
    EXPECT_THROW(TopicTree{two_roots}, ValidationError);
}

TEST(TreePriors, DefaultsViolateFlatteningCondition) {
    auto tree = TopicTree::balanced(7, 3);
    for (const auto& n : tree.nodes()) {
        if (n.is_leaf()) continue;
        double s = 0.0;
        for (double b : n.beta) s += b;
        EXPECT_GT(std::abs(s - n.alpha2), 1.0);
    }
}

TEST(TreePriors, ComposableTreeFlattens) {
    auto ct = dpca::testing::composable_tree(2, 3);
    std::mt19937_64 gen(8);
    std::vector<std::vector<double>> draws;
    for (int i = 0; i < 20000; ++i) {
        auto [q, n] = dpca::testing::std_tree_prior_draw(gen, ct.tree);
        draws.push_back(map_tree_to_proportions(q, n, ct.tree));
    }
    EXPECT_LT(dpca::testing::max_dirichlet_moment_z(draws, ct.flat_params), 4.5);
    const auto ref = dpca::testing::flattened_reference(ct.tree);
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(ref[k], ct.flat_params[k], 1e-12);
}

TEST(NodeWordAverage, LeafReturnsOwnRow) {
    auto tree = TopicTree::balanced(2, 2);
    Matrix omega(3, 2);
    omega(0, 0) = 1;
    omega(1, 1) = 1;
    omega(2, 0) = 0.3;
    omega(2, 1) = 0.7;
    auto row = node_word_average(tree, std::vector<double>{0.2, 0.4, 0.4}, omega, 2);
    EXPECT_EQ(row, (std::vector<double>{0.3, 0.7}));
}

TEST(NodeWordAverage, WeightsByProportion) {
    // Node with m = 0.1 and one child with m = 0.3.
    auto tree = TopicTree::balanced(1, 2);
    Matrix omega(2, 2);
    omega(0, 0) = 1;
    omega(1, 1) = 1;
    auto row = node_word_average(tree, std::vector<double>{0.1, 0.3}, omega, 0);
    EXPECT_NEAR(row[0], 0.25, 1e-15);
    EXPECT_NEAR(row[1], 0.75, 1e-15);
}

TEST(NodeWordAverage, OutputIsStochastic) {
    auto tree = TopicTree::balanced(3, 3);
    std::mt19937_64 gen(2);
    Matrix omega(tree.size(), 6);
    for (std::size_t k = 0; k < tree.size(); ++k) {
        auto d = dpca::testing::std_dirichlet(gen, std::vector<double>(6, 1.0));
        std::copy(d.begin(), d.end(), omega.row(k).begin());
    }
    auto m = dpca::testing::std_dirichlet(gen, std::vector<double>(tree.size(), 1.0));
    for (std::size_t k = 0; k < tree.size(); ++k) {
        auto row = node_word_average(tree, m, omega, k);
        double s = 0.0;
        for (double x : row) s += x;
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Persistence, RoundTripIsExact) {
    InitOptions opts;
    opts.seed = 3;
    std::vector<RawDocument> docs{raw_doc("a", {{"a", 2}, {"b", 1}, {"c", 1}}), raw_doc("b", {{"d", 3}, {"e", 1}})};
    auto model = init_model(build_corpus(docs, {"body"}, PruneOptions{1, 1, {}}), 3, opts);
    model.m_bar = {0.2, 0.3, 0.5};
    const auto path = temp_path("roundtrip.json");
    save_model(model, path.string());
    auto back = load_model(path.string());
    EXPECT_EQ(back.K, model.K);
    EXPECT_EQ(back.alpha, model.alpha);
    EXPECT_EQ(back.m_bar, model.m_bar);
    EXPECT_EQ(back.bags[0].tokens, model.bags[0].tokens);
    EXPECT_EQ(back.bags[0].omega, model.bags[0].omega);
    EXPECT_EQ(back.bags[0].omega_prior, model.bags[0].omega_prior);
    std::filesystem::remove(path);
}

TEST(Persistence, TreeRoundTrip) {
    InitOptions opts;
    opts.tree_spec = {{2, 3}};
    auto model = init_model(two_token_corpus(), 7, opts);
    const auto path = temp_path("tree.json");
    save_model(model, path.string());
    auto back = load_model(path.string());
    ASSERT_TRUE(back.tree);
    EXPECT_TRUE(*back.tree == *model.tree);
    std::filesystem::remove(path);
}

TEST(Persistence, TruncatedFileNamesMissingSection) {
    auto j = model_to_json(init_model(two_token_corpus(), 2));
    j.erase("bags");
    try {
        model_from_json(nlohmann::json::parse(j.dump()));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("bags"), std::string::npos) << e.what();
    }
    const auto path = temp_path("truncated.json");
    {
        std::ofstream out(path);
        const auto text = model_to_json(init_model(two_token_corpus(), 2)).dump();
        out << text.substr(0, text.size() / 2);
    }
    EXPECT_THROW(load_model(path.string()), ParseError);
    std::filesystem::remove(path);
}

TEST(Persistence, NonStochasticRowRejected) {
    auto j = model_to_json(init_model(two_token_corpus(), 2));
    j["bags"][0]["omega"][0] = std::vector<double>{0.5, 0.4};
    EXPECT_THROW(model_from_json(nlohmann::json::parse(j.dump())), ValidationError);
}

TEST(Persistence, VersionMismatchRejected) {
    auto j = model_to_json(init_model(two_token_corpus(), 2));
    j["format"] = "dpca-model/0";
    EXPECT_THROW(model_from_json(nlohmann::json::parse(j.dump())), ValidationError);
}

TEST(Persistence, DimensionMismatchRejected) {
    auto j = model_to_json(init_model(two_token_corpus(), 2));
    j["bags"][0]["J"] = 3;
    EXPECT_THROW(model_from_json(nlohmann::json::parse(j.dump())), ValidationError);
}
