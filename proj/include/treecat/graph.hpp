// Weighted category graph: snapshot loading, node embedding, edge weighting by
// inverse cosine similarity, shortest semantic paths, and quota-driven document
// harvesting into a taxonomy-mirrored corpus directory.
//
// Snapshot format, one record per line:
//   N <id>\t<name>[\t<description>]
//   E <u>\t<v>            (directed subcategory link u -> v)
//   D <node_id>\t<doc_id> (document ownership)
#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "treecat/common.hpp"
#include "treecat/embedding.hpp"
#include "treecat/taxonomy.hpp"

namespace treecat {

enum class EdgeWeightKind { one_minus_cos, arccos };

inline EdgeWeightKind edge_weight_from_string(const std::string& s) {
    if (s == "one_minus_cos") return EdgeWeightKind::one_minus_cos;
    if (s == "arccos") return EdgeWeightKind::arccos;
    throw UsageError("unknown edge weight kind '" + s + "' (expected one_minus_cos|arccos)");
}

/// w = 1 - cos(u,v) by default, clamped to [0,2]; arccos maps to angular
/// distance in [0, pi].
inline double inverse_cosine_similarity(std::span<const double> u, std::span<const double> v,
                                        EdgeWeightKind kind = EdgeWeightKind::one_minus_cos) {
    double c = cosine_similarity(u, v);
    if (kind == EdgeWeightKind::arccos) return std::acos(std::clamp(c, -1.0, 1.0));
    return std::clamp(1.0 - c, 0.0, 2.0);
}

struct GraphNode {
    std::string id;
    std::string name;
    std::string description;
    std::vector<double> vector;
    bool embedded = false;
    bool oov = false;  // embedding had no in-vocabulary tokens
    std::vector<std::string> documents;
};

struct GraphEdge {
    int from = -1;
    int to = -1;
    double weight = -1.0;  // unset until weight_edges
};

class CategoryGraph {
public:
    static CategoryGraph load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open graph snapshot: " + path.string());
        CategoryGraph g;
        std::string line;
        int lineno = 0;
        std::vector<std::pair<std::string, std::string>> pending_edges;
        std::vector<std::pair<std::string, std::string>> pending_docs;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            if (line.size() < 2 || line[1] != ' ')
                throw DataError("snapshot parse error at line " + std::to_string(lineno));
            std::string rest = line.substr(2);
            auto f = split(rest, '\t');
            switch (line[0]) {
                case 'N': {
                    if (f.size() < 2 || f.size() > 3)
                        throw DataError("bad node record at line " + std::to_string(lineno));
                    if (g.index_.count(f[0])) throw DataError("duplicate node id '" + f[0] + "'");
                    GraphNode n;
                    n.id = f[0];
                    n.name = f[1];
                    if (f.size() == 3) n.description = f[2];
                    g.index_[n.id] = static_cast<int>(g.nodes_.size());
                    g.nodes_.push_back(std::move(n));
                    break;
                }
                case 'E':
                    if (f.size() != 2) throw DataError("bad edge record at line " + std::to_string(lineno));
                    pending_edges.emplace_back(f[0], f[1]);
                    break;
                case 'D':
                    if (f.size() != 2) throw DataError("bad document record at line " + std::to_string(lineno));
                    pending_docs.emplace_back(f[0], f[1]);
                    break;
                default:
                    throw DataError("unknown record type '" + std::string(1, line[0]) + "' at line " +
                                    std::to_string(lineno));
            }
        }
        for (const auto& [u, v] : pending_edges) {
            auto iu = g.index_.find(u), iv = g.index_.find(v);
            if (iu == g.index_.end() || iv == g.index_.end())
                throw DataError("edge " + u + " -> " + v + " references an unknown node");
            g.edges_.push_back({iu->second, iv->second, -1.0});
        }
        for (const auto& [node, doc] : pending_docs) {
            auto it = g.index_.find(node);
            if (it == g.index_.end())
                throw DataError("document '" + doc + "' is owned by unknown node '" + node + "'");
            g.nodes_[static_cast<size_t>(it->second)].documents.push_back(doc);
        }
        return g;
    }

    size_t node_count() const { return nodes_.size(); }
    size_t edge_count() const { return edges_.size(); }
    const std::vector<GraphNode>& nodes() const { return nodes_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }

    int find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? -1 : it->second;
    }
    int require(const std::string& id) const {
        int i = find(id);
        if (i < 0) throw DataError("unknown graph node: '" + id + "'");
        return i;
    }
    const GraphNode& node(int i) const { return nodes_.at(static_cast<size_t>(i)); }

    /// Embed every node over "name description" text. Nodes with no
    /// in-vocabulary tokens get the zero vector and are returned as flagged.
    std::vector<std::string> embed_nodes(const Embedder& emb, const Stoplist& stop) {
        std::vector<std::string> flagged;
        for (auto& n : nodes_) {
            std::string text = n.name;
            if (!n.description.empty()) text += " " + n.description;
            DocVector dv = emb.infer(text, stop);
            n.vector = std::move(dv.values);
            n.embedded = true;
            n.oov = dv.oov;
            if (n.oov) flagged.push_back(n.id);
        }
        return flagged;
    }

    void weight_edges(EdgeWeightKind kind = EdgeWeightKind::one_minus_cos) {
        for (auto& e : edges_) {
            const auto& u = nodes_[static_cast<size_t>(e.from)];
            const auto& v = nodes_[static_cast<size_t>(e.to)];
            if (!u.embedded || !v.embedded) throw DataError("weight_edges: nodes are not embedded yet");
            e.weight = inverse_cosine_similarity(u.vector, v.vector, kind);
        }
        adjacency_.assign(nodes_.size(), {});
        for (const auto& e : edges_) adjacency_[static_cast<size_t>(e.from)].emplace_back(e.to, e.weight);
        weighted_ = true;
    }

    bool weighted() const { return weighted_; }

    /// Set externally computed edge weights (tests and fixtures).
    void set_edge_weight(size_t edge_idx, double w) {
        edges_.at(edge_idx).weight = w;
        mark_weighted();
    }

    /// Rebuild adjacency from the current edge weights.
    void mark_weighted() {
        adjacency_.assign(nodes_.size(), {});
        for (const auto& e : edges_) adjacency_[static_cast<size_t>(e.from)].emplace_back(e.to, e.weight);
        weighted_ = true;
    }

    struct ShortestPaths {
        std::vector<double> distance;   // +inf when unreachable
        std::vector<int> predecessor;   // -1 for sources/unreachable
    };

    ShortestPaths shortest_semantic_paths(const std::string& source) const {
        return shortest_from({require(source)});
    }

    /// Multi-source Dijkstra; all sources start at distance zero. Ties between
    /// equal distances pop the lexicographically smaller node id first.
    ShortestPaths shortest_from(const std::vector<int>& sources) const {
        if (!weighted_) throw DataError("shortest paths require weighted edges");
        ShortestPaths sp;
        sp.distance.assign(nodes_.size(), std::numeric_limits<double>::infinity());
        sp.predecessor.assign(nodes_.size(), -1);
        using Entry = std::pair<double, int>;
        auto cmp = [this](const Entry& a, const Entry& b) {
            if (a.first != b.first) return a.first > b.first;
            return nodes_[static_cast<size_t>(a.second)].id > nodes_[static_cast<size_t>(b.second)].id;
        };
        std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> pq(cmp);
        for (int s : sources) {
            sp.distance[static_cast<size_t>(s)] = 0.0;
            pq.push({0.0, s});
        }
        std::vector<char> done(nodes_.size(), 0);
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (done[static_cast<size_t>(u)]) continue;
            done[static_cast<size_t>(u)] = 1;
            for (const auto& [v, w] : adjacency_[static_cast<size_t>(u)]) {
                if (w < 0) throw DataError("negative edge weight");
                double nd = d + w;
                if (nd < sp.distance[static_cast<size_t>(v)]) {
                    sp.distance[static_cast<size_t>(v)] = nd;
                    sp.predecessor[static_cast<size_t>(v)] = u;
                    pq.push({nd, v});
                }
            }
        }
        return sp;
    }

private:
    std::vector<GraphNode> nodes_;
    std::unordered_map<std::string, int> index_;
    std::vector<GraphEdge> edges_;
    std::vector<std::vector<std::pair<int, double>>> adjacency_;
    bool weighted_ = false;
};

struct HarvestPlanEntry {
    std::vector<std::string> matched_nodes;  // graph node ids from match hints
    int quota = 1;
};

struct HarvestPlan {
    std::map<std::string, HarvestPlanEntry> per_leaf;

    /// Build from taxonomy match hints; leaves without hints are skipped with a
    /// warning. Hinted nodes must exist in the graph.
    static HarvestPlan build(const Taxonomy& t, const CategoryGraph& g, int quota,
                             std::vector<std::string>* warnings = nullptr) {
        if (quota < 1) throw DataError("harvest quota must be >= 1");
        HarvestPlan plan;
        for (int leaf : t.leaves()) {
            const CategoryNode& n = t.node(leaf);
            if (n.match_hints.empty()) {
                if (warnings) warnings->push_back("leaf '" + n.id + "' has no match hints; skipped");
                continue;
            }
            HarvestPlanEntry entry;
            entry.quota = quota;
            for (const auto& h : n.match_hints) {
                g.require(h.external_id);  // must exist
                entry.matched_nodes.push_back(h.external_id);
            }
            plan.per_leaf[n.id] = std::move(entry);
        }
        return plan;
    }
};

struct HarvestManifestRow {
    std::string leaf;
    std::string node;
    double distance = 0.0;
    int docs_taken = 0;
};

struct HarvestResult {
    std::vector<HarvestManifestRow> manifest;
    std::map<std::string, int> collected;  // per leaf
    std::vector<std::string> shortfalls;   // leaves that missed their quota
    std::vector<std::string> warnings;

    std::string manifest_text() const {
        std::string out;
        for (const auto& r : manifest)
            out += r.leaf + "\t" + r.node + "\t" + format_double(r.distance) + "\t" +
                   std::to_string(r.docs_taken) + "\n";
        return out;
    }
};

/// Collect documents for every planned leaf by visiting graph nodes in
/// ascending shortest-path distance from the matched nodes (all matched nodes
/// start at distance zero), taking each node's documents in snapshot order
/// until the quota is met. Document texts come from `docstore/<doc_id>.txt`.
inline HarvestResult harvest(const CategoryGraph& g, const HarvestPlan& plan, const Taxonomy& t,
                             const std::filesystem::path& docstore, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    if (!g.weighted()) throw DataError("harvest requires a weighted graph");
    HarvestResult res;
    for (const auto& [leaf_id, entry] : plan.per_leaf) {
        int leaf_idx = t.require(leaf_id);
        fs::path leaf_dir = out_dir / t.dir_path(leaf_idx);
        fs::create_directories(leaf_dir);

        std::vector<int> sources;
        for (const auto& id : entry.matched_nodes) sources.push_back(g.require(id));
        auto sp = g.shortest_from(sources);

        // visit order: ascending (distance, node id)
        std::vector<int> order;
        for (size_t i = 0; i < g.node_count(); ++i)
            if (std::isfinite(sp.distance[i])) order.push_back(static_cast<int>(i));
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            double da = sp.distance[static_cast<size_t>(a)], db = sp.distance[static_cast<size_t>(b)];
            if (da != db) return da < db;
            return g.node(a).id < g.node(b).id;
        });

        std::set<std::string> taken;
        int collected = 0;
        for (int ni : order) {
            if (collected >= entry.quota) break;
            const GraphNode& n = g.node(ni);
            int from_node = 0;
            for (const auto& doc_id : n.documents) {
                if (collected >= entry.quota) break;
                if (!taken.insert(doc_id).second) continue;  // dedupe within the leaf
                fs::path src = docstore / (doc_id + ".txt");
                if (!fs::exists(src)) {
                    res.warnings.push_back("leaf '" + leaf_id + "': missing document file " + src.string());
                    continue;
                }
                write_file(leaf_dir / (doc_id + ".txt"), read_file(src));
                ++from_node;
                ++collected;
            }
            res.manifest.push_back({leaf_id, n.id, sp.distance[static_cast<size_t>(ni)], from_node});
        }
        res.collected[leaf_id] = collected;
        if (collected < entry.quota)
            res.shortfalls.push_back(leaf_id + ": collected " + std::to_string(collected) + " of " +
                                     std::to_string(entry.quota));
    }
    return res;
}

}  // namespace treecat
