#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dpca/corpus.hpp"
#include "dpca/error.hpp"
#include "dpca/random.hpp"

namespace dpca {

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Variant { dirichlet, gamma_poisson };

inline std::string to_string(Variant v) { return v == Variant::dirichlet ? "dirichlet" : "gamma-poisson"; }

inline Variant parse_variant(const std::string& s) {
    if (s == "dirichlet" || s == "dpca") return Variant::dirichlet;
    if (s == "gamma-poisson" || s == "dica") return Variant::gamma_poisson;
    throw ArgumentError("unknown variant '" + s + "' (expected dirichlet|dpca|gamma-poisson|dica)");
}

struct TreeNode {
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
    double alpha1 = 1.0;       // Beta prior on the stop probability q
    double alpha2 = 1.0;
    std::vector<double> beta;  // Dirichlet prior over children, one entry per child

    bool is_leaf() const { return children.empty(); }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class TopicTree {
public:
    TopicTree() = default;
    explicit TopicTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) { validate(); }

    static constexpr double kRootAlpha1 = 1.0;
    static constexpr double kRootAlpha2 = 10.0;
    static constexpr double kInnerAlpha1 = 10.0;
    static constexpr double kInnerAlpha2 = 60.0;

    /// Node count of a complete tree with the given branching factor and
    /// number of levels (depth 3, branching 7 gives 1 + 7 + 49 = 57).
    static std::size_t balanced_size(std::size_t branching, std::size_t depth) {
        std::size_t total = 0;
        std::size_t level = 1;
        for (std::size_t d = 0; d < depth; ++d) {
            total += level;
            level *= branching;
        }
        return total;
    }

    /// Breadth-first complete tree with the default priors: Beta(1, 10) at the
    /// root, Beta(10, 60) at lower parents and beta = 1/B for B children.
    static TopicTree balanced(std::size_t branching, std::size_t depth) {
        if (depth == 0) throw ArgumentError("tree depth must be >= 1");
        if (branching == 0 && depth > 1) throw ArgumentError("tree branching factor must be >= 1");
        std::vector<TreeNode> nodes(1);
        std::vector<std::size_t> frontier{0};
        for (std::size_t d = 1; d < depth; ++d) {
            std::vector<std::size_t> next;
            for (std::size_t p : frontier) {
                for (std::size_t b = 0; b < branching; ++b) {
                    TreeNode child;
                    child.parent = p;
                    nodes.push_back(child);
                    nodes[p].children.push_back(nodes.size() - 1);
                    next.push_back(nodes.size() - 1);
                }
            }
            frontier = std::move(next);
        }
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            auto& n = nodes[k];
            if (n.is_leaf()) continue;
            n.alpha1 = k == 0 ? kRootAlpha1 : kInnerAlpha1;
            n.alpha2 = k == 0 ? kRootAlpha2 : kInnerAlpha2;
            n.beta.assign(n.children.size(), 1.0 / static_cast<double>(n.children.size()));
        }
        return TopicTree(std::move(nodes));
    }

    std::size_t size() const { return nodes_.size(); }
    const TreeNode& node(std::size_t k) const { return nodes_.at(k); }
    TreeNode& node(std::size_t k) { return nodes_.at(k); }
    const std::vector<TreeNode>& nodes() const { return nodes_; }

    /// Nodes ordered so that every child precedes its parent.
    const std::vector<std::size_t>& post_order() const { return post_order_; }

    std::size_t depth_of(std::size_t k) const {
        std::size_t d = 0;
        while (nodes_[k].parent) {
            k = *nodes_[k].parent;
            ++d;
        }
        return d;
    }

    /// Rescales every parent's beta so that it sums to that parent's alpha2.
    void rescale_beta_to_alpha2() {
        for (auto& n : nodes_) {
            if (n.is_leaf()) continue;
            double s = 0.0;
            for (double b : n.beta) s += b;
            for (double& b : n.beta) b *= n.alpha2 / s;
        }
    }

    void validate() {
        if (nodes_.empty()) throw ValidationError("topic tree has no nodes");
        if (nodes_[0].parent) throw ValidationError("topic tree: node 0 must be the root");
        std::vector<int> parent_seen(nodes_.size(), 0);
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            const auto& n = nodes_[k];
            if (k != 0 && !n.parent) throw ValidationError("topic tree: more than one root (node " + std::to_string(k) + ")");
            if (n.parent && *n.parent >= nodes_.size())
                throw ValidationError("topic tree: node " + std::to_string(k) + " has an out-of-range parent");
            for (std::size_t c : n.children) {
                if (c >= nodes_.size() || !nodes_[c].parent || *nodes_[c].parent != k)
                    throw ValidationError("topic tree: parent/child links of node " + std::to_string(k) + " disagree");
                ++parent_seen[c];
            }
            if (!n.is_leaf()) {
                if (n.beta.size() != n.children.size())
                    throw ValidationError("topic tree: node " + std::to_string(k) + " needs one beta entry per child");
                if (!(n.alpha1 > 0.0) || !(n.alpha2 > 0.0))
                    throw ValidationError("topic tree: node " + std::to_string(k) + " has non-positive Beta parameters");
                for (double b : n.beta)
                    if (!(b > 0.0)) throw ValidationError("topic tree: node " + std::to_string(k) + " has non-positive beta");
            }
        }
        for (std::size_t k = 1; k < nodes_.size(); ++k) {
            if (parent_seen[k] != 1)
                throw ValidationError("topic tree: node " + std::to_string(k) + " is not listed exactly once as a child");
        }
        // Depth-first walk from the root; also rules out cycles and
        // unreachable nodes.
        post_order_.clear();
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        std::vector<char> visited(nodes_.size(), 0);
        visited[0] = 1;
        while (!stack.empty()) {
            auto& [k, next] = stack.back();
            if (next < nodes_[k].children.size()) {
                const std::size_t c = nodes_[k].children[next++];
                if (visited[c]) throw ValidationError("topic tree contains a cycle");
                visited[c] = 1;
                stack.emplace_back(c, 0);
            } else {
                post_order_.push_back(k);
                stack.pop_back();
            }
        }
        if (post_order_.size() != nodes_.size()) throw ValidationError("topic tree: some nodes are unreachable from the root");
    }

    friend bool operator==(const TopicTree& a, const TopicTree& b) { return a.nodes_ == b.nodes_; }

private:
    std::vector<TreeNode> nodes_;
    std::vector<std::size_t> post_order_;
};

/// m_k = q_k n_k prod_{l in ancestors(k)} n_l (1 - q_l), with n_root = 1.
inline std::vector<double> map_tree_to_proportions(std::span<const double> q, std::span<const double> n,
                                                   const TopicTree& tree) {
    const std::size_t K = tree.size();
    if (q.size() != K || n.size() != K) throw ArgumentError("q and n must have one entry per tree node");
    for (std::size_t k = 0; k < K; ++k) {
        const auto& node = tree.node(k);
        if (node.is_leaf()) continue;
        double s = 0.0;
        for (std::size_t c : node.children) s += n[c];
        if (std::abs(s - 1.0) > 1e-9)
            throw ValidationError("branch probabilities below node " + std::to_string(k) + " sum to " + std::to_string(s));
    }
    // reach[k] = n_k prod_{ancestors l} n_l (1 - q_l); parents come first in
    // reverse post-order.
    std::vector<double> reach(K, 0.0);
    std::vector<double> m(K, 0.0);
    const auto& order = tree.post_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const std::size_t k = *it;
        const auto& node = tree.node(k);
        reach[k] = node.parent ? reach[*node.parent] * (1.0 - q[*node.parent]) * n[k] : 1.0;
        const double qk = node.is_leaf() ? 1.0 : q[k];
        m[k] = reach[k] * qk;
    }
    return m;
}

struct TreeParams {
    std::vector<double> q;
    std::vector<double> n;
};

/// Subtree mass at each node: m_k plus the mass of all descendants.
inline std::vector<double> subtree_sums(std::span<const double> values, const TopicTree& tree) {
    std::vector<double> s(values.begin(), values.end());
    for (std::size_t k : tree.post_order()) {
        if (auto p = tree.node(k).parent) s[*p] += s[k];
    }
    return s;
}

/// Inverse of map_tree_to_proportions. Where a parent's children carry no
/// mass the branch probabilities are uniform and q = 1 at that parent.
inline TreeParams invert_proportions_to_tree(std::span<const double> m, const TopicTree& tree) {
    const std::size_t K = tree.size();
    if (m.size() != K) throw ArgumentError("m must have one entry per tree node");
    const auto mass = subtree_sums(m, tree);
    if (!(mass[0] > 0.0)) throw ValidationError("proportions have zero total mass");
    TreeParams out{std::vector<double>(K, 1.0), std::vector<double>(K, 0.0)};
    out.n[0] = 1.0;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& node = tree.node(k);
        if (node.is_leaf()) continue;
        const double below = mass[k] - m[k];
        if (mass[k] > 0.0) out.q[k] = std::clamp(m[k] / mass[k], 0.0, 1.0);
        double child_total = 0.0;
        for (std::size_t c : node.children) child_total += mass[c];
        if (below > 0.0 && child_total > 0.0) {
            for (std::size_t c : node.children) out.n[c] = mass[c] / child_total;
        } else {
            out.q[k] = 1.0;
            for (std::size_t c : node.children) out.n[c] = 1.0 / static_cast<double>(node.children.size());
        }
    }
    return out;
}

/// Mean of the prior over (q, n), pushed through the mapping. Used as the
/// starting proportions of hierarchical documents.
inline std::vector<double> tree_prior_mean_proportions(const TopicTree& tree) {
    const std::size_t K = tree.size();
    std::vector<double> q(K, 1.0), n(K, 1.0);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& node = tree.node(k);
        if (node.is_leaf()) continue;
        q[k] = node.alpha1 / (node.alpha1 + node.alpha2);
        double s = 0.0;
        for (double b : node.beta) s += b;
        for (std::size_t c = 0; c < node.children.size(); ++c) n[node.children[c]] = node.beta[c] / s;
    }
    return map_tree_to_proportions(q, n, tree);
}

/// Parameters for one bag: vocabulary, component rows and the prior on rows.
struct BagModel {
    std::string name;
    std::vector<std::string> tokens;
    Matrix omega;                      // K x J, rows on the simplex
    std::vector<double> omega_prior;   // J pseudo-counts

    std::size_t vocabulary_size() const { return tokens.size(); }
};

struct ComponentModel {
    static constexpr const char* kFormat = "dpca-model/1";

    std::size_t K = 0;
    Variant variant = Variant::dirichlet;
    std::vector<BagModel> bags;
    std::vector<double> alpha;
    std::optional<TopicTree> tree;
    /// Corpus mean of the per-document posterior-mean proportions, filled in
    /// by training. Empty until then.
    std::vector<double> m_bar;

    bool hierarchical() const { return tree.has_value(); }

    std::optional<std::size_t> bag_position(const std::string& name) const {
        for (std::size_t b = 0; b < bags.size(); ++b)
            if (bags[b].name == name) return b;
        return std::nullopt;
    }

    /// Vocabularies in model order, for projecting new documents.
    std::vector<Vocabulary> vocabularies() const {
        std::vector<Vocabulary> out;
        for (const auto& b : bags) out.push_back(Vocabulary::from_tokens(b.name, b.tokens));
        return out;
    }

    std::vector<std::string> bag_names() const {
        std::vector<std::string> out;
        for (const auto& b : bags) out.push_back(b.name);
        return out;
    }

    void validate() const {
        if (K == 0) throw ValidationError("model: K must be >= 1");
        if (alpha.size() != K) throw ValidationError("model: alpha must have K entries");
        for (double a : alpha)
            if (!(a > 0.0)) throw ValidationError("model: alpha entries must be positive");
        if (tree && tree->size() != K) throw ValidationError("model: tree node count differs from K");
        if (!m_bar.empty() && m_bar.size() != K) throw ValidationError("model: m_bar must have K entries");
        if (bags.empty()) throw ValidationError("model: no bags");
        for (const auto& bag : bags) {
            const std::size_t J = bag.tokens.size();
            if (bag.omega.rows() != K || bag.omega.cols() != J)
                throw ValidationError("model: omega of bag '" + bag.name + "' has wrong dimensions");
            if (bag.omega_prior.size() != J)
                throw ValidationError("model: omega_prior of bag '" + bag.name + "' has wrong length");
            for (double p : bag.omega_prior)
                if (!(p > 0.0)) throw ValidationError("model: omega_prior of bag '" + bag.name + "' must be positive");
            for (std::size_t k = 0; k < K; ++k) {
                double s = 0.0;
                for (double x : bag.omega.row(k)) {
                    if (!(x >= 0.0) || !std::isfinite(x))
                        throw ValidationError("model: omega of bag '" + bag.name + "' has a negative or non-finite entry");
                    s += x;
                }
                if (std::abs(s - 1.0) > 1e-9)
                    throw ValidationError("model: omega row " + std::to_string(k) + " of bag '" + bag.name +
                                          "' sums to " + std::to_string(s));
            }
        }
    }
};

struct InitOptions {
    Variant variant = Variant::dirichlet;
    /// Complete tree (branching factor, depth); must yield exactly K nodes.
    std::optional<std::pair<std::size_t, std::size_t>> tree_spec;
    /// Total Dirichlet concentration on proportions, spread uniformly (alpha_k = alpha_total / K).
    double alpha_total = 1.0;
    /// Pseudo-counts per component row, spread by the smoothed unigram.
    double prior_strength = 1.0;
    /// Scale of the multiplicative noise applied to initial rows.
    double init_noise = 0.5;
    std::uint64_t seed = 0;
};

/// Laplace-smoothed corpus unigram: (total_freq[j] + 1) / (T + J).
inline std::vector<double> smoothed_unigram(const Vocabulary& vocab) {
    double total = 0.0;
    for (auto f : vocab.total_freq) total += static_cast<double>(f);
    const double denom = total + static_cast<double>(vocab.size());
    std::vector<double> p(vocab.size());
    for (std::size_t j = 0; j < vocab.size(); ++j) p[j] = (static_cast<double>(vocab.total_freq[j]) + 1.0) / denom;
    return p;
}

inline ComponentModel init_model(const Corpus& corpus, std::size_t K, const InitOptions& opts = {}) {
    if (K == 0) throw ArgumentError("K must be >= 1");
    if (!(opts.alpha_total > 0.0) || !(opts.prior_strength > 0.0))
        throw ArgumentError("alpha_total and prior_strength must be positive");
    ComponentModel model;
    model.K = K;
    model.variant = opts.variant;
    model.alpha.assign(K, opts.alpha_total / static_cast<double>(K));
    if (opts.tree_spec) {
        const auto [branching, depth] = *opts.tree_spec;
        const std::size_t nodes = TopicTree::balanced_size(branching, depth);
        if (nodes != K)
            throw ArgumentError("tree spec " + std::to_string(branching) + "," + std::to_string(depth) + " yields " +
                                std::to_string(nodes) + " nodes but K = " + std::to_string(K));
        model.tree = TopicTree::balanced(branching, depth);
    }
    for (std::size_t b = 0; b < corpus.num_bags(); ++b) {
        const auto& vocab = corpus.vocabularies[b];
        BagModel bag;
        bag.name = vocab.bag_name;
        bag.tokens = vocab.tokens;
        const auto p = smoothed_unigram(vocab);
        bag.omega_prior.resize(p.size());
        for (std::size_t j = 0; j < p.size(); ++j) bag.omega_prior[j] = opts.prior_strength * p[j];
        bag.omega = Matrix(K, p.size());
        for (std::size_t k = 0; k < K; ++k) {
            Rng rng(derive_seed(opts.seed, {0x1417, b, k}));
            double s = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double x = p[j] * std::exp(opts.init_noise * (2.0 * rng.uniform() - 1.0));
                bag.omega(k, j) = x;
                s += x;
            }
            for (double& x : bag.omega.row(k)) x /= s;
        }
        model.bags.push_back(std::move(bag));
    }
    return model;
}

/// Word distribution shown for a tree node: the node's row averaged with its
/// direct children's rows, weighted by m_bar.
inline std::vector<double> node_word_average(const TopicTree& tree, std::span<const double> m_bar, const Matrix& omega,
                                             std::size_t node) {
    if (node >= tree.size()) throw ArgumentError("node index out of range");
    if (m_bar.size() != tree.size() || omega.rows() != tree.size())
        throw ArgumentError("m_bar and omega must have one entry per tree node");
    std::vector<std::size_t> members{node};
    for (std::size_t c : tree.node(node).children) members.push_back(c);
    double total = 0.0;
    for (std::size_t k : members) total += m_bar[k];
    std::vector<double> out(omega.cols(), 0.0);
    if (!(total > 0.0)) {
        // No proportion mass in the neighbourhood: equal weights.
        total = static_cast<double>(members.size());
        for (std::size_t k : members)
            for (std::size_t j = 0; j < omega.cols(); ++j) out[j] += omega(k, j) / total;
        return out;
    }
    for (std::size_t k : members) {
        const double w = m_bar[k] / total;
        for (std::size_t j = 0; j < omega.cols(); ++j) out[j] += w * omega(k, j);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::ordered_json model_to_json(const ComponentModel& model) {
    nlohmann::ordered_json j;
    j["format"] = ComponentModel::kFormat;
    j["K"] = model.K;
    j["variant"] = to_string(model.variant);
    j["alpha"] = model.alpha;
    if (!model.m_bar.empty()) j["m_bar"] = model.m_bar;
    if (model.tree) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& n : model.tree->nodes()) {
            nlohmann::ordered_json node;
            node["parent"] = n.parent ? nlohmann::ordered_json(*n.parent) : nlohmann::ordered_json(nullptr);
            node["children"] = n.children;
            node["alpha1"] = n.alpha1;
            node["alpha2"] = n.alpha2;
            node["beta"] = n.beta;
            nodes.push_back(std::move(node));
        }
        j["tree"] = std::move(nodes);
    }
    nlohmann::ordered_json bags = nlohmann::ordered_json::array();
    for (const auto& bag : model.bags) {
        nlohmann::ordered_json jb;
        jb["name"] = bag.name;
        jb["J"] = bag.tokens.size();
        jb["tokens"] = bag.tokens;
        jb["omega_prior"] = bag.omega_prior;
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < model.K; ++k) {
            auto r = bag.omega.row(k);
            rows.push_back(std::vector<double>(r.begin(), r.end()));
        }
        jb["omega"] = std::move(rows);
        bags.push_back(std::move(jb));
    }
    j["bags"] = std::move(bags);
    return j;
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError("model file: missing section '" + where + key + "'");
    return *it;
}

}  // namespace detail

inline ComponentModel model_from_json(const nlohmann::json& j) {
    using detail::require;
    ComponentModel model;
    try {
        const auto format = require(j, "format", "").get<std::string>();
        if (format != ComponentModel::kFormat)
            throw ValidationError("model file: version mismatch, expected '" + std::string(ComponentModel::kFormat) +
                                  "' but found '" + format + "'");
        model.K = require(j, "K", "").get<std::size_t>();
        model.variant = parse_variant(require(j, "variant", "").get<std::string>());
        model.alpha = require(j, "alpha", "").get<std::vector<double>>();
        if (auto it = j.find("m_bar"); it != j.end()) model.m_bar = it->get<std::vector<double>>();
        if (auto it = j.find("tree"); it != j.end()) {
            std::vector<TreeNode> nodes;
            for (const auto& jn : *it) {
                TreeNode n;
                const auto& parent = require(jn, "parent", "tree.");
                if (!parent.is_null()) n.parent = parent.get<std::size_t>();
                n.children = require(jn, "children", "tree.").get<std::vector<std::size_t>>();
                n.alpha1 = require(jn, "alpha1", "tree.").get<double>();
                n.alpha2 = require(jn, "alpha2", "tree.").get<double>();
                n.beta = require(jn, "beta", "tree.").get<std::vector<double>>();
                nodes.push_back(std::move(n));
            }
            model.tree = TopicTree(std::move(nodes));
        }
        for (const auto& jb : require(j, "bags", "")) {
            BagModel bag;
            bag.name = require(jb, "name", "bags.").get<std::string>();
            const auto J = require(jb, "J", "bags.").get<std::size_t>();
            bag.tokens = require(jb, "tokens", "bags.").get<std::vector<std::string>>();
            if (bag.tokens.size() != J)
                throw ValidationError("model file: bag '" + bag.name + "' declares J=" + std::to_string(J) + " but lists " +
                                      std::to_string(bag.tokens.size()) + " tokens");
            bag.omega_prior = require(jb, "omega_prior", "bags.").get<std::vector<double>>();
            const auto& rows = require(jb, "omega", "bags.");
            if (!rows.is_array() || rows.size() != model.K)
                throw ValidationError("model file: bag '" + bag.name + "' must have K omega rows");
            bag.omega = Matrix(model.K, J);
            for (std::size_t k = 0; k < model.K; ++k) {
                const auto row = rows[k].get<std::vector<double>>();
                if (row.size() != J)
                    throw ValidationError("model file: omega row " + std::to_string(k) + " of bag '" + bag.name +
                                          "' has " + std::to_string(row.size()) + " entries, expected " + std::to_string(J));
                std::copy(row.begin(), row.end(), bag.omega.row(k).begin());
            }
            model.bags.push_back(std::move(bag));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    model.validate();
    return model;
}

inline void save_model(const ComponentModel& model, const std::string& path) {
    model.validate();
    std::ofstream out(path);
    if (!out) throw Error("cannot write model file '" + path + "'");
    out << model_to_json(model).dump(1) << '\n';
}

inline ComponentModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

}  // namespace dpca
