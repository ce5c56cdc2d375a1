// Document corpus: taxonomy-mirrored ingest, stratified splits, balanced
// per-node datasets.
//
// Directory layout mirrors the taxonomy: <root>/<child>/.../<leaf>/<doc>.txt.
// Split manifest: `doc_id<TAB>side` lines. Dataset manifest: `doc_id<TAB>class`.
#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "treecat/common.hpp"
#include "treecat/taxonomy.hpp"

namespace treecat {

struct Document {
    std::string doc_id;   // relative file path within the corpus directory
    std::string text;
    std::string leaf_id;  // taxonomy leaf this document is labeled with
};

class Corpus {
public:
    Corpus() = default;

    /// Reads a taxonomy-mirrored directory tree. Deterministic: leaves in
    /// taxonomy order, files in lexicographic order. Unknown folders are an
    /// error; empty leaf folders and empty files produce warnings.
    static Corpus ingest(const std::filesystem::path& dir, const Taxonomy& t,
                         std::vector<std::string>* warnings = nullptr) {
        namespace fs = std::filesystem;
        if (!fs::is_directory(dir)) throw DataError("corpus directory does not exist: " + dir.string());

        check_tree(dir, dir, t, warnings);

        Corpus c;
        for (int leaf : t.leaves()) {
            const std::string leaf_id = t.node(leaf).id;
            fs::path leaf_dir = dir / t.dir_path(leaf);
            if (!fs::is_directory(leaf_dir)) {
                if (warnings) warnings->push_back("leaf '" + leaf_id + "' has no folder");
                continue;
            }
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(leaf_dir))
                if (e.is_regular_file() && e.path().filename().string().front() != '.')
                    files.push_back(e.path());
            std::sort(files.begin(), files.end());
            if (files.empty() && warnings) warnings->push_back("leaf '" + leaf_id + "' folder is empty");
            for (const auto& f : files) {
                std::string text = read_file(f);
                if (trim(text).empty()) {
                    if (warnings) warnings->push_back("skipping empty document: " + f.string());
                    continue;
                }
                Document d;
                d.doc_id = fs::relative(f, dir).generic_string();
                d.text = std::move(text);
                d.leaf_id = leaf_id;
                c.add(std::move(d));
            }
        }
        return c;
    }

    void add(Document d) {
        if (trim(d.text).empty()) throw DataError("document '" + d.doc_id + "' is empty");
        per_leaf_[d.leaf_id].push_back(static_cast<int>(docs_.size()));
        docs_.push_back(std::move(d));
    }

    const std::vector<Document>& documents() const { return docs_; }
    const Document& doc(int i) const { return docs_.at(static_cast<size_t>(i)); }
    size_t size() const { return docs_.size(); }

    /// leaf id -> indices into documents(), leaves in lexicographic order.
    const std::map<std::string, std::vector<int>>& per_leaf() const { return per_leaf_; }

    const std::vector<int>* leaf_docs(const std::string& leaf_id) const {
        auto it = per_leaf_.find(leaf_id);
        return it == per_leaf_.end() ? nullptr : &it->second;
    }

    /// Per-leaf stratified split: each leaf contributes ceil(ratio*n) documents
    /// to A, the remainder to B. Shuffling within a leaf is seed-deterministic.
    std::pair<Corpus, Corpus> split_ab(double ratio, uint64_t seed) const {
        if (ratio <= 0.0 || ratio > 1.0) throw DataError("split ratio must be in (0,1]");
        Corpus a, b;
        for (const auto& [leaf, idxs] : per_leaf_) {
            if (idxs.size() < 2)
                throw DataError("split_ab: leaf '" + leaf + "' has fewer than 2 documents (" +
                                std::to_string(idxs.size()) + ")");
            std::vector<int> order = idxs;
            Rng rng(hash_combine(seed, "split_ab"), leaf);
            rng.shuffle(order);
            size_t n_a = static_cast<size_t>(std::ceil(ratio * static_cast<double>(order.size())));
            for (size_t i = 0; i < order.size(); ++i)
                (i < n_a ? a : b).add(docs_[static_cast<size_t>(order[i])]);
        }
        return {std::move(a), std::move(b)};
    }

    std::string split_manifest(const Corpus& b) const {
        std::map<std::string, char> side;
        for (const auto& d : docs_) side[d.doc_id] = 'A';
        for (const auto& d : b.docs_) side[d.doc_id] = 'B';
        std::string out;
        for (const auto& [id, s] : side) out += id + "\t" + s + "\n";
        return out;
    }

private:
    static void check_tree(const std::filesystem::path& root, const std::filesystem::path& dir, const Taxonomy& t,
                           std::vector<std::string>* warnings) {
        namespace fs = std::filesystem;
        std::vector<fs::path> entries;
        for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
        std::sort(entries.begin(), entries.end());
        for (const auto& p : entries) {
            std::string name = p.filename().string();
            if (!name.empty() && name.front() == '.') continue;
            if (fs::is_directory(p)) {
                int idx = t.find(name);
                if (idx < 0) throw DataError("unknown folder '" + name + "' (no matching taxonomy node)");
                // the folder's relative location must match the node's taxonomy path
                std::string rel = fs::relative(p, root).generic_string();
                if (rel != t.dir_path(idx))
                    throw DataError("folder '" + rel + "' does not match taxonomy path '" + t.dir_path(idx) + "'");
                if (!t.is_leaf(idx)) check_tree(root, p, t, warnings);
            } else if (dir != root) {
                std::string rel = fs::relative(dir, root).generic_string();
                int idx = t.find(dir.filename().string());
                if (idx >= 0 && !t.is_leaf(idx) && warnings)
                    warnings->push_back("ignoring stray file in non-leaf folder: " + rel + "/" + name);
            }
        }
    }

    std::vector<Document> docs_;
    std::map<std::string, std::vector<int>> per_leaf_;
};

struct NodeSample {
    int doc_index;            // index into the source corpus
    std::string class_label;  // direct child id of the dataset's node
};

/// Balanced child-labeled training set for one internal node. Samples reference
/// documents in the corpus the dataset was built from.
struct NodeDataset {
    std::string node_id;
    std::vector<std::string> class_labels;  // child ids, taxonomy order
    std::vector<NodeSample> samples;
    std::map<std::string, int> class_counts;

    std::string manifest(const Corpus& c) const {
        std::string out;
        for (const auto& s : samples) out += c.doc(s.doc_index).doc_id + "\t" + s.class_label + "\n";
        return out;
    }
};

/// Draw samples equally from each leaf under every child (round-robin over the
/// child's leaves, documents in lexicographic order) up to cap_per_class.
/// Default cap: the smallest per-child document count, clamped to 500.
inline NodeDataset build_node_dataset(const Corpus& c, const Taxonomy& t, const std::string& node_id,
                                      std::optional<int> cap_per_class = std::nullopt) {
    int node_idx = t.require(node_id);
    const CategoryNode& node = t.node(node_idx);
    if (node.children.size() < 2)
        throw DataError("build_node_dataset: node '" + node_id + "' has fewer than 2 children");

    // per child: list of leaf doc-index lists, plus total availability
    std::vector<std::vector<const std::vector<int>*>> leaf_docs_per_child;
    int min_avail = std::numeric_limits<int>::max();
    for (int child : node.children) {
        std::vector<const std::vector<int>*> lists;
        int avail = 0;
        for (int leaf : t.subtree_leaves(child)) {
            const auto* docs = c.leaf_docs(t.node(leaf).id);
            if (docs && !docs->empty()) {
                lists.push_back(docs);
                avail += static_cast<int>(docs->size());
            }
        }
        if (avail == 0)
            throw DataError("build_node_dataset: child '" + t.node(child).id + "' of '" + node_id +
                            "' has no documents");
        min_avail = std::min(min_avail, avail);
        leaf_docs_per_child.push_back(std::move(lists));
    }
    int cap = cap_per_class.value_or(std::min(min_avail, 500));
    if (cap < 1) throw DataError("build_node_dataset: cap_per_class must be >= 1");

    NodeDataset ds;
    ds.node_id = node_id;
    for (size_t ci = 0; ci < node.children.size(); ++ci) {
        const std::string child_id = t.node(node.children[ci]).id;
        ds.class_labels.push_back(child_id);
        int taken = 0;
        bool exhausted = false;
        for (size_t round = 0; !exhausted && taken < cap; ++round) {
            exhausted = true;
            for (const auto* docs : leaf_docs_per_child[ci]) {
                if (round < docs->size()) {
                    exhausted = false;
                    if (taken < cap) {
                        ds.samples.push_back({(*docs)[round], child_id});
                        ++taken;
                    }
                }
            }
        }
        ds.class_counts[child_id] = taken;
    }
    return ds;
}

/// Stratified 90/10 split of a node dataset: the training side takes
/// ceil(0.9*n) per class. Every class needs at least 10 samples.
inline std::pair<NodeDataset, NodeDataset> split_cv_loo(const NodeDataset& d, uint64_t seed) {
    NodeDataset train, holdout;
    train.node_id = d.node_id;
    holdout.node_id = d.node_id;
    train.class_labels = d.class_labels;
    holdout.class_labels = d.class_labels;

    std::map<std::string, std::vector<NodeSample>> by_class;
    for (const auto& s : d.samples) by_class[s.class_label].push_back(s);
    for (const auto& label : d.class_labels) {
        auto& samples = by_class[label];
        if (samples.size() < 10)
            throw DataError("split_cv_loo on '" + d.node_id + "': class '" + label + "' has " +
                            std::to_string(samples.size()) + " samples (< 10)");
        Rng rng(hash_combine(hash_combine(seed, "cv_loo"), d.node_id), label);
        rng.shuffle(samples);
        size_t n_train = static_cast<size_t>(std::ceil(0.9 * static_cast<double>(samples.size())));
        for (size_t i = 0; i < samples.size(); ++i) {
            auto& side = (i < n_train) ? train : holdout;
            side.samples.push_back(samples[i]);
            ++side.class_counts[samples[i].class_label];
        }
    }
    return {std::move(train), std::move(holdout)};
}

}  // namespace treecat
