#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <set>

#include "support/tmpdir.hpp"
#include "treecat/graph.hpp"

using namespace treecat;
using treecat::testing::TmpDir;

namespace {

CategoryGraph graph_from(const std::string& text) {
    TmpDir tmp("snap");
    write_file(tmp / "snapshot.txt", text);
    return CategoryGraph::load(tmp / "snapshot.txt");
}

// exhaustive simple-path enumeration: the shortest-path oracle
double brute_force_distance(const std::vector<std::vector<std::pair<int, double>>>& adj, int src, int dst) {
    if (src == dst) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<char> visited(adj.size(), 0);
    std::function<void(int, double)> dfs = [&](int u, double cost) {
        if (u == dst) {
            best = std::min(best, cost);
            return;
        }
        visited[static_cast<size_t>(u)] = 1;
        for (auto [v, w] : adj[static_cast<size_t>(u)])
            if (!visited[static_cast<size_t>(v)]) dfs(v, cost + w);
        visited[static_cast<size_t>(u)] = 0;
    };
    dfs(src, 0.0);
    return best;
}

}  // namespace

TEST_CASE("snapshot loading") {
    SECTION("nodes, edges, documents, descriptions") {
        CategoryGraph g = graph_from(
            "# a comment\n"
            "N n1\tFirst Node\tabout first things\n"
            "N n2\tSecond Node\n"
            "E n1\tn2\n"
            "D n1\tdoc_a\n"
            "D n1\tdoc_b\n");
        CHECK(g.node_count() == 2);
        CHECK(g.edge_count() == 1);
        CHECK(g.node(g.require("n1")).description == "about first things");
        CHECK(g.node(g.require("n1")).documents == std::vector<std::string>{"doc_a", "doc_b"});
        CHECK(g.node(g.require("n2")).description.empty());
    }
    SECTION("edge to a missing node is an error naming the edge") {
        CHECK_THROWS_WITH(graph_from("N n1\tOne\nE n1\tmissing\n"),
                          Catch::Matchers::ContainsSubstring("n1 -> missing"));
    }
    SECTION("duplicate node id rejected") {
        CHECK_THROWS_WITH(graph_from("N n1\tOne\nN n1\tAgain\n"),
                          Catch::Matchers::ContainsSubstring("duplicate node id 'n1'"));
    }
    SECTION("document owned by a missing node rejected") {
        CHECK_THROWS_AS(graph_from("N n1\tOne\nD nope\tdoc\n"), DataError);
    }
    SECTION("edges may appear before their nodes") {
        CategoryGraph g = graph_from("E a\tb\nN a\tA\nN b\tB\n");
        CHECK(g.edge_count() == 1);
    }
}

TEST_CASE("edge weights are the inverse cosine similarity") {
    std::vector<double> u{1.0, 0.0}, opp{-1.0, 0.0}, orth{0.0, 1.0};
    SECTION("analytic fixtures, exact to 1e-12") {
        CHECK(std::abs(inverse_cosine_similarity(u, u) - 0.0) <= 1e-12);
        CHECK(std::abs(inverse_cosine_similarity(u, orth) - 1.0) <= 1e-12);
        CHECK(std::abs(inverse_cosine_similarity(u, opp) - 2.0) <= 1e-12);
    }
    SECTION("arccos variant maps to angular distance") {
        CHECK(std::abs(inverse_cosine_similarity(u, u, EdgeWeightKind::arccos) - 0.0) <= 1e-12);
        CHECK(std::abs(inverse_cosine_similarity(u, orth, EdgeWeightKind::arccos) - M_PI / 2) <= 1e-12);
        CHECK(std::abs(inverse_cosine_similarity(u, opp, EdgeWeightKind::arccos) - M_PI) <= 1e-12);
    }
    SECTION("weights stay within [0,2] on random vectors") {
        Rng rng(3);
        for (int i = 0; i < 100; ++i) {
            std::vector<double> a(4), b(4);
            for (auto& x : a) x = rng.uniform(-1, 1);
            for (auto& x : b) x = rng.uniform(-1, 1);
            double w = inverse_cosine_similarity(a, b);
            CHECK(w >= 0.0);
            CHECK(w <= 2.0);
        }
    }
    SECTION("zero vectors weigh 1 (cosine pinned to 0)") {
        std::vector<double> z{0, 0};
        CHECK(inverse_cosine_similarity(u, z) == 1.0);
    }
}

TEST_CASE("node embedding over name and description") {
    Corpus c;
    c.add({"d1", "basketball sports game court hoop", "x"});
    c.add({"d2", "basketball court game replay", "x"});
    c.add({"d3", "kitchen oven bread bake flour", "x"});
    c.add({"d4", "bread flour oven crust", "x"});
    EmbedderParams p;
    p.dim = 8;
    p.epochs = 5;
    p.min_count = 1;
    p.seed = 5;
    Stoplist none = Stoplist::empty();
    Embedder emb = Embedder::train(c, none, p);

    CategoryGraph g = graph_from(
        "N sportcat\tbasketball sports\n"
        "N sportcat2\tbasketball sports\n"
        "N foodcat\tbread baking\tkitchen oven\n"
        "N emptycat\tzzz qqq\n");
    auto flagged = g.embed_nodes(emb, none);

    SECTION("in-vocabulary nodes get finite vectors") {
        const auto& n = g.node(g.require("sportcat"));
        REQUIRE(n.embedded);
        CHECK_FALSE(n.oov);
        for (double v : n.vector) CHECK(std::isfinite(v));
    }
    SECTION("identical name and description give identical vectors") {
        CHECK(g.node(g.require("sportcat")).vector == g.node(g.require("sportcat2")).vector);
    }
    SECTION("no in-vocabulary tokens: zero vector, flagged") {
        REQUIRE(flagged == std::vector<std::string>{"emptycat"});
        const auto& n = g.node(g.require("emptycat"));
        CHECK(n.oov);
        CHECK(std::all_of(n.vector.begin(), n.vector.end(), [](double v) { return v == 0.0; }));
    }
    SECTION("weight_edges requires embeddings first") {
        CategoryGraph g2 = graph_from("N a\tA\nN b\tB\nE a\tb\n");
        CHECK_THROWS_AS(g2.weight_edges(), DataError);
    }
}

TEST_CASE("shortest semantic paths") {
    SECTION("the cheaper of two parallel routes wins") {
        CategoryGraph g = graph_from(
            "N s\tS\nN m1\tM1\nN m2\tM2\nN t\tT\n"
            "E s\tm1\nE m1\tt\nE s\tm2\nE m2\tt\n");
        g.set_edge_weight(0, 0.1);  // s->m1
        g.set_edge_weight(1, 0.2);  // m1->t
        g.set_edge_weight(2, 0.2);  // s->m2
        g.set_edge_weight(3, 0.3);  // m2->t
        auto sp = g.shortest_semantic_paths("s");
        CHECK(sp.distance[static_cast<size_t>(g.require("t"))] == Catch::Approx(0.3).margin(1e-15));
        CHECK(sp.predecessor[static_cast<size_t>(g.require("t"))] == g.require("m1"));
    }
    SECTION("unreachable nodes sit at infinity") {
        CategoryGraph g = graph_from("N a\tA\nN b\tB\nN c\tC\nE a\tb\n");
        g.set_edge_weight(0, 0.5);
        auto sp = g.shortest_semantic_paths("a");
        CHECK(std::isinf(sp.distance[static_cast<size_t>(g.require("c"))]));
        CHECK(sp.predecessor[static_cast<size_t>(g.require("c"))] == -1);
    }
    SECTION("unknown source rejected") {
        CategoryGraph g = graph_from("N a\tA\n");
        g.mark_weighted();
        CHECK_THROWS_AS(g.shortest_semantic_paths("nope"), DataError);
    }
    SECTION("distances equal exhaustive enumeration on random digraphs") {
        Rng rng(909);
        for (int trial = 0; trial < 25; ++trial) {
            int n = 2 + static_cast<int>(rng.below(7));
            std::string snap;
            for (int i = 0; i < n; ++i) snap += "N v" + std::to_string(i) + "\tV\n";
            std::vector<std::vector<std::pair<int, double>>> adj(static_cast<size_t>(n));
            std::vector<double> weights;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (i != j && rng.uniform() < 0.4) {
                        snap += "E v" + std::to_string(i) + "\tv" + std::to_string(j) + "\n";
                        double w = 2.0 * rng.uniform();
                        adj[static_cast<size_t>(i)].emplace_back(j, w);
                        weights.push_back(w);
                    }
            CategoryGraph g = graph_from(snap);
            for (size_t e = 0; e < weights.size(); ++e) g.set_edge_weight(e, weights[e]);
            if (weights.empty()) g.mark_weighted();
            auto sp = g.shortest_semantic_paths("v0");
            for (int v = 0; v < n; ++v) {
                double expect = brute_force_distance(adj, 0, v);
                double got = sp.distance[static_cast<size_t>(v)];
                if (std::isinf(expect))
                    CHECK(std::isinf(got));
                else
                    CHECK(got == expect);  // identical association order: exact
            }
            // triangle property over every edge
            for (int u = 0; u < n; ++u)
                for (auto [v, w] : adj[static_cast<size_t>(u)])
                    if (!std::isinf(sp.distance[static_cast<size_t>(u)]))
                        CHECK(sp.distance[static_cast<size_t>(v)] <=
                              sp.distance[static_cast<size_t>(u)] + w + 1e-15);
        }
    }
}

TEST_CASE("harvest collects by ascending distance with per-leaf dedupe") {
    TmpDir tmp("harvest");
    Taxonomy t = Taxonomy::parse_string(
        "root|R\n"
        "  stuff|S\n"
        "    leafa|LA|match:exact:cat_a\n"
        "    leafb|LB|match:exact:cat_b\n");
    // cat_a owns 4 docs; neighbor owns 6 more at distance 0.2
    std::string snap =
        "N cat_a\tA\nN near_a\tNA\nN cat_b\tB\nN far\tF\n"
        "E cat_a\tnear_a\nE near_a\tfar\nE cat_b\tfar\n";
    for (int i = 0; i < 4; ++i) snap += "D cat_a\tdoca" + std::to_string(i) + "\n";
    for (int i = 0; i < 6; ++i) snap += "D near_a\tdocn" + std::to_string(i) + "\n";
    for (int i = 0; i < 5; ++i) snap += "D cat_b\tdocb" + std::to_string(i) + "\n";
    snap += "D near_a\tdoca0\n";  // shared doc: must dedupe within the leaf
    write_file(tmp / "snapshot.txt", snap);
    CategoryGraph g = CategoryGraph::load(tmp / "snapshot.txt");
    g.set_edge_weight(0, 0.2);
    g.set_edge_weight(1, 0.4);
    g.set_edge_weight(2, 0.9);

    std::filesystem::create_directories(tmp / "docs");
    for (const auto& n : g.nodes())
        for (const auto& d : n.documents) write_file(tmp.path() / "docs" / (d + ".txt"), "text of " + d);

    SECTION("quota within the matched node: no expansion") {
        HarvestPlan plan;
        plan.per_leaf["leafa"] = {{"cat_a"}, 3};
        HarvestResult r = harvest(g, plan, t, tmp / "docs", tmp / "out1");
        CHECK(r.collected["leafa"] == 3);
        REQUIRE(r.manifest.size() == 1);
        CHECK(r.manifest[0].node == "cat_a");
        CHECK(r.manifest[0].docs_taken == 3);
        CHECK(r.shortfalls.empty());
        int files = 0;
        for ([[maybe_unused]] const auto& e :
             std::filesystem::directory_iterator(tmp.path() / "out1" / "stuff" / "leafa"))
            ++files;
        CHECK(files == 3);
    }
    SECTION("quota 10: the neighbor is visited second, shared doc deduped") {
        HarvestPlan plan;
        plan.per_leaf["leafa"] = {{"cat_a"}, 10};
        HarvestResult r = harvest(g, plan, t, tmp / "docs", tmp / "out2");
        CHECK(r.collected["leafa"] == 10);
        REQUIRE(r.manifest.size() == 2);
        CHECK(r.manifest[0].node == "cat_a");
        CHECK(r.manifest[0].distance == 0.0);
        CHECK(r.manifest[0].docs_taken == 4);
        CHECK(r.manifest[1].node == "near_a");
        CHECK(r.manifest[1].distance == Catch::Approx(0.2));
        CHECK(r.manifest[1].docs_taken == 6);  // doca0 skipped: already taken
        // manifest rows are in non-decreasing distance order
        CHECK(r.manifest[0].distance <= r.manifest[1].distance);
    }
    SECTION("quota beyond reach: partial result plus shortfall") {
        HarvestPlan plan;
        plan.per_leaf["leafb"] = {{"cat_b"}, 50};
        HarvestResult r = harvest(g, plan, t, tmp / "docs", tmp / "out3");
        CHECK(r.collected["leafb"] == 5);  // cat_b's 5; far owns nothing
        REQUIRE(r.shortfalls.size() == 1);
        CHECK(r.shortfalls[0].find("leafb") != std::string::npos);
        CHECK(r.shortfalls[0].find("5 of 50") != std::string::npos);
    }
    SECTION("plan built from taxonomy hints; hintless leaves warn") {
        Taxonomy t2 = Taxonomy::parse_string(
            "root|R\n"
            "  stuff|S\n"
            "    leafa|LA|match:exact:cat_a\n"
            "    leafb|LB\n");
        std::vector<std::string> warnings;
        HarvestPlan plan = HarvestPlan::build(t2, g, 3, &warnings);
        CHECK(plan.per_leaf.size() == 1);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("leafb") != std::string::npos);
    }
    SECTION("hint referencing a missing graph node is an error") {
        Taxonomy t3 = Taxonomy::parse_string("root|R\n  la|L|match:exact:ghost\n  lb|M|match:exact:cat_a\n");
        CHECK_THROWS_WITH(HarvestPlan::build(t3, g, 3, nullptr),
                          Catch::Matchers::ContainsSubstring("ghost"));
    }
    SECTION("manifest text is byte-stable across reruns") {
        HarvestPlan plan;
        plan.per_leaf["leafa"] = {{"cat_a"}, 10};
        HarvestResult r1 = harvest(g, plan, t, tmp / "docs", tmp / "outa");
        HarvestResult r2 = harvest(g, plan, t, tmp / "docs", tmp / "outb");
        CHECK(r1.manifest_text() == r2.manifest_text());
        CHECK_FALSE(r1.manifest_text().empty());
    }
}

TEST_CASE("multi-source shortest paths start every matched node at zero") {
    CategoryGraph g = graph_from(
        "N a\tA\nN b\tB\nN mid\tM\n"
        "E a\tmid\nE b\tmid\n");
    g.set_edge_weight(0, 0.9);
    g.set_edge_weight(1, 0.1);
    auto sp = g.shortest_from({g.require("a"), g.require("b")});
    CHECK(sp.distance[static_cast<size_t>(g.require("a"))] == 0.0);
    CHECK(sp.distance[static_cast<size_t>(g.require("b"))] == 0.0);
    CHECK(sp.distance[static_cast<size_t>(g.require("mid"))] == Catch::Approx(0.1));
}
