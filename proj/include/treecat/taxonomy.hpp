// Topic taxonomy: a rooted category tree loaded from an indented text file.
//
// File grammar (one record per line, '#' starts a comment line):
//   <indent><id>|<label>[|match:<exact|major>:<external-id> ...]
// Indentation is two spaces per depth level; the first record is the root.
#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "treecat/common.hpp"

namespace treecat {

enum class MatchRelation { exact, major };

inline std::string to_string(MatchRelation r) { return r == MatchRelation::exact ? "exact" : "major"; }

struct MatchHint {
    MatchRelation relation;
    std::string external_id;

    bool operator==(const MatchHint&) const = default;
};

struct CategoryNode {
    std::string id;     // path-safe slug, [a-z0-9_]+
    std::string label;  // human-readable name
    int parent = -1;    // index into Taxonomy nodes, -1 for the root
    int depth = 0;
    std::vector<int> children;  // indices, in file order
    std::vector<MatchHint> match_hints;

    bool is_leaf() const { return children.empty(); }
};

/// Immutable after load; safe for unrestricted concurrent reads.
class Taxonomy {
public:
    static Taxonomy load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open taxonomy file: " + path.string());
        return parse(in);
    }

    static Taxonomy parse_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    static Taxonomy parse(std::istream& in) {
        Taxonomy t;
        std::string line;
        std::vector<int> stack;  // ancestors by depth: stack[d] = last node at depth d
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::string_view sv(line);
            size_t indent = 0;
            while (indent < sv.size() && sv[indent] == ' ') ++indent;
            std::string_view body = sv.substr(indent);
            if (body.empty() || body.front() == '#') continue;
            if (indent % 2 != 0)
                throw DataError("taxonomy parse error at line " + std::to_string(lineno) + ": odd indentation");
            int depth = static_cast<int>(indent / 2);

            CategoryNode node = parse_record(body, lineno);
            node.depth = depth;

            if (t.nodes_.empty()) {
                if (depth != 0)
                    throw DataError("taxonomy parse error at line " + std::to_string(lineno) +
                                    ": first record must be the unindented root");
            } else {
                if (depth == 0)
                    throw DataError("taxonomy validation error: second root '" + node.id +
                                    "' (the node graph must be a single tree)");
                if (depth > static_cast<int>(stack.size()))
                    throw DataError("taxonomy parse error at line " + std::to_string(lineno) + ": orphan record '" +
                                    node.id + "' (indentation skips a level)");
                node.parent = stack[depth - 1];
            }

            if (t.index_.count(node.id)) {
                // the same id nested under itself is how a cycle shows up in this grammar
                bool under_self = false;
                for (int a = node.parent; a != -1; a = t.nodes_[a].parent)
                    if (t.nodes_[a].id == node.id) under_self = true;
                throw DataError(std::string("taxonomy validation error: ") +
                                (under_self ? "cycle through node '" : "duplicate id '") + node.id + "'");
            }

            int idx = static_cast<int>(t.nodes_.size());
            t.nodes_.push_back(std::move(node));
            t.index_[t.nodes_[idx].id] = idx;
            if (t.nodes_[idx].parent >= 0) t.nodes_[t.nodes_[idx].parent].children.push_back(idx);
            stack.resize(depth);
            stack.push_back(idx);
        }
        if (t.nodes_.empty()) throw DataError("taxonomy parse error: no records");
        t.finalize();
        return t;
    }

    const CategoryNode& root() const { return nodes_[0]; }
    const CategoryNode& node(int idx) const { return nodes_.at(static_cast<size_t>(idx)); }
    size_t size() const { return nodes_.size(); }
    int depth() const { return depth_; }

    int find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? -1 : it->second;
    }

    int require(const std::string& id) const {
        int idx = find(id);
        if (idx < 0) throw DataError("unknown taxonomy node: '" + id + "'");
        return idx;
    }

    bool is_leaf(int idx) const { return node(idx).is_leaf(); }

    std::vector<int> leaves() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
            if (nodes_[i].is_leaf()) out.push_back(i);
        return out;
    }

    /// Pre-order list of nodes that own a classifier: every node with >= 2 children.
    std::vector<int> non_leaf_nodes() const {
        std::vector<int> out;
        preorder(0, [&](int i) {
            if (nodes_[i].children.size() >= 2) out.push_back(i);
        });
        return out;
    }

    /// [root, ..., n] in descending order.
    std::vector<int> path_to_root(int idx) const {
        std::vector<int> rev;
        for (int i = idx; i != -1; i = nodes_[i].parent) rev.push_back(i);
        return {rev.rbegin(), rev.rend()};
    }

    /// Category ids from the root child down to `idx` (the root itself excluded).
    std::vector<std::string> path_ids(int idx) const {
        std::vector<std::string> out;
        for (int i : path_to_root(idx))
            if (i != 0) out.push_back(nodes_[i].id);
        return out;
    }

    /// The unique child of `parent_idx` whose subtree contains `descendant_idx`, or -1.
    int child_containing(int parent_idx, int descendant_idx) const {
        int cur = descendant_idx;
        while (cur != -1) {
            int p = nodes_[cur].parent;
            if (p == parent_idx) return cur;
            cur = p;
        }
        return -1;
    }

    /// Leaf indices of the subtree rooted at idx, pre-order.
    std::vector<int> subtree_leaves(int idx) const {
        std::vector<int> out;
        preorder(idx, [&](int i) {
            if (nodes_[i].is_leaf()) out.push_back(i);
        });
        return out;
    }

    /// Relative filesystem path for a node: ids from root child downward joined by '/'.
    std::string dir_path(int idx) const {
        std::string out;
        for (const auto& id : path_ids(idx)) {
            if (!out.empty()) out += '/';
            out += id;
        }
        return out;
    }

    void serialize(std::ostream& out) const {
        preorder(0, [&](int i) {
            const CategoryNode& n = nodes_[i];
            out << std::string(static_cast<size_t>(n.depth) * 2, ' ') << n.id << '|' << n.label;
            if (!n.match_hints.empty()) {
                out << '|';
                for (size_t h = 0; h < n.match_hints.size(); ++h) {
                    if (h) out << ' ';
                    out << "match:" << to_string(n.match_hints[h].relation) << ':' << n.match_hints[h].external_id;
                }
            }
            out << '\n';
        });
    }

    std::string serialize() const {
        std::ostringstream ss;
        serialize(ss);
        return ss.str();
    }

    void save(const std::filesystem::path& path) const { write_file(path, serialize()); }

    uint64_t content_hash() const { return fnv1a64(serialize()); }

private:
    template <typename F>
    void preorder(int idx, F&& fn) const {
        fn(idx);
        for (int c : nodes_[idx].children) preorder(c, fn);
    }

    static CategoryNode parse_record(std::string_view body, int lineno) {
        CategoryNode node;
        auto fields = split(body, '|');
        if (fields.size() < 2)
            throw DataError("taxonomy parse error at line " + std::to_string(lineno) +
                            ": expected '<id>|<label>', got '" + std::string(body) + "'");
        node.id = fields[0];
        node.label = fields[1];
        if (node.id.empty() ||
            node.id.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_") != std::string::npos)
            throw DataError("taxonomy validation error: id '" + node.id + "' must match [a-z0-9_]+");
        for (size_t f = 2; f < fields.size(); ++f) {
            for (const auto& spec : split(fields[f], ' ')) {
                if (spec.empty()) continue;
                auto parts = split(spec, ':');
                if (parts.size() < 3 || parts[0] != "match")
                    throw DataError("taxonomy parse error at line " + std::to_string(lineno) +
                                    ": bad match hint '" + spec + "'");
                MatchHint hint;
                if (parts[1] == "exact")
                    hint.relation = MatchRelation::exact;
                else if (parts[1] == "major")
                    hint.relation = MatchRelation::major;
                else
                    throw DataError("taxonomy parse error at line " + std::to_string(lineno) +
                                    ": match relation must be exact|major, got '" + parts[1] + "'");
                // external ids may themselves contain ':'
                std::string ext = parts[2];
                for (size_t k = 3; k < parts.size(); ++k) ext += ':' + parts[k];
                hint.external_id = std::move(ext);
                node.match_hints.push_back(std::move(hint));
            }
        }
        return node;
    }

    void finalize() {
        depth_ = 0;
        for (const auto& n : nodes_) {
            depth_ = std::max(depth_, n.depth);
            if (!n.is_leaf() && !n.match_hints.empty())
                throw DataError("taxonomy validation error: match hints on internal node '" + n.id + "'");
        }
    }

    std::vector<CategoryNode> nodes_;  // nodes_[0] is the root
    std::unordered_map<std::string, int> index_;
    int depth_ = 0;
};

}  // namespace treecat
