// Hierarchical inference: threshold-gated descent over the taxonomy.
//
// At each internal node the text is vectorized with that node's dictionary
// (the shared document-embedding vector is computed once per call) and the
// node's network yields child probabilities. Children at or above the
// threshold are expanded; when none qualify the descent falls back to the
// top `fallback_children` children and the run is flagged low-tolerance.
// With `second_iteration`, a branch that already fell back may fall back one
// more time (one extra level past where it would otherwise stop). A path ends
// at a leaf or wherever no child qualifies and the fallback budget is spent.
// Each path is scored by the arithmetic mean of its per-level probabilities.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "treecat/trainer.hpp"

namespace treecat {

struct InferenceConfig {
    double threshold = 0.7;
    int top_k_paths = 3;
    int fallback_children = 2;  // 0 disables fallback entirely
    bool second_iteration = true;

    void validate() const {
        if (!(threshold > 0.0 && threshold <= 1.0)) throw DataError("threshold must be in (0,1]");
        if (top_k_paths < 1) throw DataError("top_k_paths must be >= 1");
        if (fallback_children < 0) throw DataError("fallback_children must be >= 0");
    }
};

struct ClassificationPath {
    std::vector<std::string> categories;  // root child downward
    std::vector<double> node_scores;      // per-level probabilities, same length
    double total_score = 0.0;             // arithmetic mean of node_scores
    bool via_fallback = false;            // this branch used a fallback expansion

    std::string joined(bool trailing_slash = false) const {
        std::string out;
        for (const auto& c : categories) {
            if (!out.empty()) out += '/';
            out += c;
        }
        if (trailing_slash) out += '/';
        return out;
    }
};

struct ClassifyResult {
    std::vector<ClassificationPath> paths;  // sorted, truncated to top_k_paths
    bool unclassifiable = false;
    bool low_tolerance = false;  // some node fell below the threshold
};

inline double path_score(std::span<const double> node_scores) {
    if (node_scores.empty()) throw DataError("path_score: empty score list");
    double sum = 0.0;
    for (double s : node_scores) sum += s;
    return sum / static_cast<double>(node_scores.size());
}

/// Descending total score; ties prefer the shorter path, then the
/// lexicographically smaller category list.
inline bool path_order(const ClassificationPath& a, const ClassificationPath& b) {
    if (a.total_score != b.total_score) return a.total_score > b.total_score;
    if (a.categories.size() != b.categories.size()) return a.categories.size() < b.categories.size();
    return a.categories < b.categories;
}

namespace detail {

struct DescentState {
    std::vector<std::string> categories;
    std::vector<double> scores;
    int fallbacks_used = 0;
};

inline void finish_path(std::vector<ClassificationPath>& out, const DescentState& st) {
    if (st.categories.empty()) return;  // stopped at the root: nothing to report
    ClassificationPath p;
    p.categories = st.categories;
    p.node_scores = st.scores;
    p.total_score = path_score(p.node_scores);
    p.via_fallback = st.fallbacks_used > 0;
    out.push_back(std::move(p));
}

}  // namespace detail

inline ClassifyResult classify(const HierarchicalModel& m, const std::string& text, const InferenceConfig& cfg) {
    cfg.validate();
    if (trim(text).empty()) throw DataError("classify: empty text");

    ClassifyResult result;

    // The document-embedding vector is computed once and reused at every node.
    std::vector<double> shared_d2v;
    bool d2v_oov = false;
    if (mode_uses_d2v(m.mode)) {
        if (!m.embedder) throw DataError("model mode " + to_string(m.mode) + " is missing its embedder");
        DocVector dv = m.embedder->infer(text, m.stoplist);
        d2v_oov = dv.oov;
        shared_d2v = std::move(dv.values);
    }

    // No usable signal in any feature mode: explicit unclassifiable result.
    bool bow_empty = true;
    if (mode_uses_bow(m.mode)) {
        const int root_idx = 0;
        auto it = m.node_models.find(m.taxonomy.node(root_idx).id);
        if (it != m.node_models.end() && it->second.dictionary) {
            auto fv = bow_vectorize(text, *it->second.dictionary, m.stoplist);
            for (double v : fv.values)
                if (v != 0.0) bow_empty = false;
        }
    }
    bool no_signal = (mode_uses_bow(m.mode) ? bow_empty : true) && (mode_uses_d2v(m.mode) ? d2v_oov : true);
    if (no_signal) {
        result.unclassifiable = true;
        return result;
    }

    const int max_fallbacks = cfg.fallback_children > 0 ? (cfg.second_iteration ? 2 : 1) : 0;

    std::vector<ClassificationPath> finished;
    std::vector<detail::DescentState> stack;
    stack.push_back({});

    while (!stack.empty()) {
        detail::DescentState st = std::move(stack.back());
        stack.pop_back();

        int node_idx = 0;
        if (!st.categories.empty()) node_idx = m.taxonomy.require(st.categories.back());
        const CategoryNode& node = m.taxonomy.node(node_idx);

        if (node.is_leaf()) {
            detail::finish_path(finished, st);
            continue;
        }
        if (node.children.size() == 1) {
            // no network: pass through deterministically
            detail::DescentState next = st;
            next.categories.push_back(m.taxonomy.node(node.children[0]).id);
            next.scores.push_back(1.0);
            stack.push_back(std::move(next));
            continue;
        }

        auto it = m.node_models.find(node.id);
        if (it == m.node_models.end()) {
            // untrained node (failure during training): the path stops here
            detail::finish_path(finished, st);
            continue;
        }
        const NodeModel& nm = it->second;
        std::vector<double> features =
            make_features(text, m.mode, nm.dictionary ? &*nm.dictionary : nullptr, m.stoplist,
                          mode_uses_d2v(m.mode) ? &shared_d2v : nullptr);
        std::vector<double> probs = nm.network.forward(features);

        std::vector<int> expand;  // child positions to descend into
        bool fallback = false;
        for (size_t c = 0; c < probs.size(); ++c)
            if (probs[c] >= cfg.threshold) expand.push_back(static_cast<int>(c));
        if (expand.empty()) {
            result.low_tolerance = true;
            if (st.fallbacks_used < max_fallbacks) {
                fallback = true;
                // top fallback_children by probability; equal probabilities keep
                // the lower class index first
                std::vector<int> order(probs.size());
                for (size_t c = 0; c < probs.size(); ++c) order[c] = static_cast<int>(c);
                std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                    return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)];
                });
                int n = std::min<int>(cfg.fallback_children, static_cast<int>(order.size()));
                expand.assign(order.begin(), order.begin() + n);
            } else {
                detail::finish_path(finished, st);  // fallback exhausted
                continue;
            }
        }

        // push in reverse so the stack pops children in taxonomy order
        for (auto c = expand.rbegin(); c != expand.rend(); ++c) {
            detail::DescentState next = st;
            next.categories.push_back(nm.class_labels[static_cast<size_t>(*c)]);
            next.scores.push_back(probs[static_cast<size_t>(*c)]);
            if (fallback) ++next.fallbacks_used;
            stack.push_back(std::move(next));
        }
    }

    std::sort(finished.begin(), finished.end(), path_order);
    if (static_cast<int>(finished.size()) > cfg.top_k_paths) finished.resize(static_cast<size_t>(cfg.top_k_paths));
    result.paths = std::move(finished);
    return result;
}

// --- hierarchical evaluation ---------------------------------------------------

struct DocEvalEntry {
    std::string doc_id;
    std::string true_leaf;
    std::vector<std::string> true_path;  // root child down to the leaf
    std::vector<ClassificationPath> top_paths;
    bool correct = false;
    bool unclassifiable = false;
    int level1_true = -1;  // index into level1_labels
    int level1_pred = -1;  // -1 when unclassifiable
};

struct HierEvalResult {
    int total = 0;
    int correct = 0;
    double topk_accuracy = 0.0;
    std::vector<std::string> level1_labels;       // root children, taxonomy order
    std::vector<std::vector<int>> level1_confusion;  // rows true, cols top-1 predicted
    std::vector<int> level1_unclassified;         // per true class; row sum + this = class count
    std::vector<DocEvalEntry> log;
};

/// A document counts as correct when its true leaf path appears among the
/// top-k returned paths (with leaf_match_only, matching the final category
/// alone suffices). Level-1 confusion assigns each document to the root child
/// of its top-1 path.
inline HierEvalResult evaluate_hierarchical(const HierarchicalModel& m, const Corpus& corpus_b,
                                            const InferenceConfig& cfg, bool leaf_match_only = false) {
    if (corpus_b.size() == 0) throw DataError("evaluate_hierarchical: empty corpus");
    HierEvalResult res;
    std::map<std::string, int> l1_index;
    for (int c : m.taxonomy.root().children) {
        l1_index[m.taxonomy.node(c).id] = static_cast<int>(res.level1_labels.size());
        res.level1_labels.push_back(m.taxonomy.node(c).id);
    }
    size_t k = res.level1_labels.size();
    res.level1_confusion.assign(k, std::vector<int>(k, 0));
    res.level1_unclassified.assign(k, 0);

    for (const auto& doc : corpus_b.documents()) {
        DocEvalEntry entry;
        entry.doc_id = doc.doc_id;
        entry.true_leaf = doc.leaf_id;
        int leaf_idx = m.taxonomy.require(doc.leaf_id);
        entry.true_path = m.taxonomy.path_ids(leaf_idx);
        if (entry.true_path.empty()) throw DataError("document '" + doc.doc_id + "' is labeled with the root");
        entry.level1_true = l1_index.at(entry.true_path.front());

        ClassifyResult cr = classify(m, doc.text, cfg);
        entry.unclassifiable = cr.unclassifiable;
        entry.top_paths = cr.paths;
        for (const auto& p : cr.paths) {
            bool match = leaf_match_only ? (!p.categories.empty() && p.categories.back() == entry.true_leaf)
                                         : (p.categories == entry.true_path);
            if (match) {
                entry.correct = true;
                break;
            }
        }
        if (!cr.paths.empty()) {
            entry.level1_pred = l1_index.at(cr.paths.front().categories.front());
            ++res.level1_confusion[static_cast<size_t>(entry.level1_true)]
                                  [static_cast<size_t>(entry.level1_pred)];
        } else {
            ++res.level1_unclassified[static_cast<size_t>(entry.level1_true)];
        }
        if (entry.correct) ++res.correct;
        ++res.total;
        res.log.push_back(std::move(entry));
    }
    res.topk_accuracy = static_cast<double>(res.correct) / static_cast<double>(res.total);
    return res;
}

}  // namespace treecat
