// Hand-set models: every node network outputs a pinned probability vector
// regardless of input (zero weights, log-probability biases, no hidden layer).
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "treecat/pathfinder.hpp"
#include "treecat/trainer.hpp"

namespace treecat::testing {

inline NodeModel fixed_prob_node(const Taxonomy& t, int node_idx, const std::vector<double>& probs) {
    const CategoryNode& node = t.node(node_idx);
    if (probs.size() != node.children.size())
        throw std::runtime_error("fixture: prob count != child count for " + node.id);
    NodeModel nm;
    nm.node_id = node.id;
    nm.mode = FeatureMode::bow;
    for (int c : node.children) nm.class_labels.push_back(t.node(c).id);

    Dictionary dict;
    dict.node_id = node.id;
    dict.terms = {"probe"};
    dict.index["probe"] = 0;
    nm.dictionary = dict;

    NetworkSpec spec;
    spec.input_dim = 1;
    spec.hidden_layers = {};
    spec.output_dim = static_cast<int>(probs.size());
    spec.seed = 7;
    nm.network = Network::init(spec);
    auto& w = nm.network.weight_data(0);
    std::fill(w.begin(), w.end(), 0.0);
    auto& b = nm.network.bias_data(0);
    for (size_t i = 0; i < probs.size(); ++i) b[i] = std::log(probs[i]);
    return nm;
}

/// node_probs maps node id -> child probabilities (taxonomy child order).
/// Classify any text containing the token "probe" against the result.
inline HierarchicalModel build_fixture_model(const std::string& taxonomy_text,
                                             const std::map<std::string, std::vector<double>>& node_probs) {
    HierarchicalModel m;
    m.taxonomy = Taxonomy::parse_string(taxonomy_text);
    m.mode = FeatureMode::bow;
    m.stoplist = Stoplist::empty();
    for (int idx : m.taxonomy.non_leaf_nodes()) {
        const std::string& id = m.taxonomy.node(idx).id;
        auto it = node_probs.find(id);
        if (it == node_probs.end()) throw std::runtime_error("fixture: missing probs for node " + id);
        m.node_models.emplace(id, fixed_prob_node(m.taxonomy, idx, it->second));
    }
    return m;
}

/// Node model that routes on child keywords: the dictionary holds one token
/// per child ("<child-without-underscores>tok") and strong identity weights
/// make the child whose token dominates the text win with probability near 1.
inline std::string router_token(const std::string& category_id) {
    std::string t;
    for (char c : category_id)
        if (c != '_') t += c;
    return t + "tok";
}

inline NodeModel router_node(const Taxonomy& t, int node_idx, double scale = 12.0) {
    const CategoryNode& node = t.node(node_idx);
    NodeModel nm;
    nm.node_id = node.id;
    nm.mode = FeatureMode::bow;
    Dictionary dict;
    dict.node_id = node.id;
    for (int c : node.children) {
        nm.class_labels.push_back(t.node(c).id);
        dict.index[router_token(t.node(c).id)] = static_cast<int>(dict.terms.size());
        dict.terms.push_back(router_token(t.node(c).id));
    }
    nm.dictionary = dict;
    NetworkSpec spec;
    spec.input_dim = static_cast<int>(node.children.size());
    spec.hidden_layers = {};
    spec.output_dim = static_cast<int>(node.children.size());
    spec.seed = 3;
    nm.network = Network::init(spec);
    auto& w = nm.network.weight_data(0);
    std::fill(w.begin(), w.end(), 0.0);
    for (size_t i = 0; i < node.children.size(); ++i) w[i * node.children.size() + i] = scale;
    std::fill(nm.network.bias_data(0).begin(), nm.network.bias_data(0).end(), 0.0);
    return nm;
}

/// Fully router-based model: a document naming every category on its true path
/// (via router_token) classifies perfectly.
inline HierarchicalModel build_router_model(const std::string& taxonomy_text) {
    HierarchicalModel m;
    m.taxonomy = Taxonomy::parse_string(taxonomy_text);
    m.mode = FeatureMode::bow;
    m.stoplist = Stoplist::empty();
    for (int idx : m.taxonomy.non_leaf_nodes())
        m.node_models.emplace(m.taxonomy.node(idx).id, router_node(m.taxonomy, idx));
    return m;
}

/// Text that drives a router model down the path of `leaf_idx`.
inline std::string router_text(const Taxonomy& t, int leaf_idx) {
    std::string text;
    for (const auto& id : t.path_ids(leaf_idx)) text += router_token(id) + " ";
    return text;
}

/// Independent reimplementation of the descent rule for oracle comparisons:
/// enumerate every root-to-stop chain the expansion rule permits, score by
/// mean, sort by (score desc, shorter first, lexicographic), truncate.
struct EnumeratedPath {
    std::vector<std::string> categories;
    std::vector<double> scores;
    double total = 0.0;
};

inline void enumerate_paths(const Taxonomy& t, const std::map<std::string, std::vector<double>>& node_probs,
                            int node_idx, std::vector<std::string>& cats, std::vector<double>& scores,
                            int fallbacks_used, const InferenceConfig& cfg,
                            std::vector<EnumeratedPath>& out) {
    const CategoryNode& node = t.node(node_idx);
    auto emit = [&] {
        if (cats.empty()) return;
        EnumeratedPath p;
        p.categories = cats;
        p.scores = scores;
        double s = 0.0;
        for (double x : scores) s += x;
        p.total = s / static_cast<double>(scores.size());
        out.push_back(std::move(p));
    };
    if (node.children.empty()) {
        emit();
        return;
    }
    if (node.children.size() == 1) {
        cats.push_back(t.node(node.children[0]).id);
        scores.push_back(1.0);
        enumerate_paths(t, node_probs, node.children[0], cats, scores, fallbacks_used, cfg, out);
        cats.pop_back();
        scores.pop_back();
        return;
    }
    const auto& probs = node_probs.at(node.id);
    std::vector<int> expand;
    bool fell_back = false;
    for (size_t c = 0; c < probs.size(); ++c)
        if (probs[c] >= cfg.threshold) expand.push_back(static_cast<int>(c));
    if (expand.empty()) {
        int max_fallbacks = cfg.fallback_children > 0 ? (cfg.second_iteration ? 2 : 1) : 0;
        if (fallbacks_used >= max_fallbacks) {
            emit();
            return;
        }
        fell_back = true;
        std::vector<int> order(probs.size());
        for (size_t c = 0; c < probs.size(); ++c) order[c] = static_cast<int>(c);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
        order.resize(std::min<size_t>(order.size(), static_cast<size_t>(cfg.fallback_children)));
        expand = order;
    }
    for (int c : expand) {
        cats.push_back(t.node(node.children[static_cast<size_t>(c)]).id);
        scores.push_back(probs[static_cast<size_t>(c)]);
        enumerate_paths(t, node_probs, node.children[static_cast<size_t>(c)], cats, scores,
                        fallbacks_used + (fell_back ? 1 : 0), cfg, out);
        cats.pop_back();
        scores.pop_back();
    }
}

inline std::vector<EnumeratedPath> enumerate_classify(const Taxonomy& t,
                                                      const std::map<std::string, std::vector<double>>& node_probs,
                                                      const InferenceConfig& cfg) {
    std::vector<EnumeratedPath> out;
    std::vector<std::string> cats;
    std::vector<double> scores;
    enumerate_paths(t, node_probs, 0, cats, scores, 0, cfg, out);
    std::sort(out.begin(), out.end(), [](const EnumeratedPath& a, const EnumeratedPath& b) {
        if (a.total != b.total) return a.total > b.total;
        if (a.categories.size() != b.categories.size()) return a.categories.size() < b.categories.size();
        return a.categories < b.categories;
    });
    if (out.size() > static_cast<size_t>(cfg.top_k_paths)) out.resize(static_cast<size_t>(cfg.top_k_paths));
    return out;
}

}  // namespace treecat::testing
