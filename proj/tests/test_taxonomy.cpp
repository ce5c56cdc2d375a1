#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "treecat/taxonomy.hpp"

using namespace treecat;

static const std::string kSmall =
    "root|Root\n"
    "  aa|AA\n"
    "    aa_x|AAX|match:exact:cat_aax\n"
    "    aa_y|AAY|match:major:cat_aay match:exact:cat_aay2\n"
    "  bb|BB\n"
    "    bb_x|BBX\n"
    "    bb_y|BBY\n"
    "  cc|CC\n";

TEST_CASE("general taxonomy matches the documented shape") {
    Taxonomy t = Taxonomy::load(std::filesystem::path(TREECAT_SOURCE_DIR) / "data/taxonomy_general.txt");
    CHECK(t.root().children.size() == 21);
    CHECK(t.leaves().size() == 117);
    CHECK(t.non_leaf_nodes().size() == 18);
    CHECK(t.depth() == 2);

    SECTION("pre-order puts the root first") {
        auto nl = t.non_leaf_nodes();
        CHECK(nl.front() == 0);
    }
    SECTION("path to a named leaf") {
        int leaf = t.require("iron_and_steel_industry");
        auto path = t.path_to_root(leaf);
        REQUIRE(path.size() == 3);
        CHECK(t.node(path[0]).id == "root");
        CHECK(t.node(path[1]).id == "business_and_industrial");
        CHECK(t.node(path[2]).id == "iron_and_steel_industry");
        CHECK(t.dir_path(leaf) == "business_and_industrial/iron_and_steel_industry");
    }
    SECTION("every root-to-leaf path fits the depth bound") {
        for (int leaf : t.leaves()) CHECK(t.path_to_root(leaf).size() <= static_cast<size_t>(t.depth()) + 1);
    }
}

TEST_CASE("small taxonomy structure") {
    Taxonomy t = Taxonomy::parse_string(kSmall);
    CHECK(t.size() == 8);
    CHECK(t.root().children.size() == 3);
    CHECK(t.leaves().size() == 5);  // aa_x aa_y bb_x bb_y cc

    SECTION("match hints parse with relations, space- and pipe-separated") {
        const CategoryNode& aay = t.node(t.require("aa_y"));
        REQUIRE(aay.match_hints.size() == 2);
        CHECK(aay.match_hints[0].relation == MatchRelation::major);
        CHECK(aay.match_hints[0].external_id == "cat_aay");
        CHECK(aay.match_hints[1].relation == MatchRelation::exact);
        CHECK(aay.match_hints[1].external_id == "cat_aay2");
    }
    SECTION("non_leaf_nodes needs >= 2 children") {
        auto nl = t.non_leaf_nodes();
        REQUIRE(nl.size() == 3);  // root, aa, bb; cc is a childless root child
        CHECK(t.node(nl[0]).id == "root");
        CHECK(t.node(nl[1]).id == "aa");
        CHECK(t.node(nl[2]).id == "bb");
    }
    SECTION("path_to_root of the root is [root]") {
        auto p = t.path_to_root(0);
        REQUIRE(p.size() == 1);
        CHECK(p[0] == 0);
    }
    SECTION("child_containing resolves through the subtree") {
        int root = 0;
        int leaf = t.require("bb_y");
        CHECK(t.node(t.child_containing(root, leaf)).id == "bb");
        CHECK(t.child_containing(t.require("aa"), leaf) == -1);
    }
}

TEST_CASE("degenerate single-node taxonomy") {
    Taxonomy t = Taxonomy::parse_string("solo|Just One\n");
    CHECK(t.size() == 1);
    CHECK(t.leaves().size() == 1);
    CHECK(t.root().is_leaf());
    CHECK(t.non_leaf_nodes().empty());
}

TEST_CASE("a chain with single children trains no networks") {
    Taxonomy t = Taxonomy::parse_string(
        "root|R\n"
        "  a|A\n"
        "    leaf|L\n");
    CHECK(t.non_leaf_nodes().empty());
}

TEST_CASE("root with three leaf children trains exactly the root") {
    Taxonomy t = Taxonomy::parse_string(
        "root|R\n"
        "  a|A\n"
        "  b|B\n"
        "  c|C\n");
    auto nl = t.non_leaf_nodes();
    REQUIRE(nl.size() == 1);
    CHECK(nl[0] == 0);
}

TEST_CASE("validation errors name the offending id") {
    SECTION("duplicate id") {
        CHECK_THROWS_WITH(Taxonomy::parse_string("root|R\n  a|A\n  a|A2\n"),
                          Catch::Matchers::ContainsSubstring("duplicate id 'a'"));
    }
    SECTION("a node nested under itself reads as a cycle") {
        CHECK_THROWS_WITH(Taxonomy::parse_string("root|R\n  a|A\n    a|A again\n"),
                          Catch::Matchers::ContainsSubstring("cycle through node 'a'"));
    }
    SECTION("orphan record: indentation skips a level") {
        CHECK_THROWS_WITH(Taxonomy::parse_string("root|R\n      deep|D\n"),
                          Catch::Matchers::ContainsSubstring("orphan"));
    }
    SECTION("second unindented root") {
        CHECK_THROWS_WITH(Taxonomy::parse_string("root|R\nroot2|R2\n"),
                          Catch::Matchers::ContainsSubstring("single tree"));
    }
    SECTION("match hints only on leaves") {
        CHECK_THROWS_WITH(Taxonomy::parse_string("root|R\n  a|A|match:exact:x\n    b|B\n    c|C\n"),
                          Catch::Matchers::ContainsSubstring("internal node 'a'"));
    }
    SECTION("id character set") {
        CHECK_THROWS_AS(Taxonomy::parse_string("Root|R\n"), DataError);
        CHECK_THROWS_AS(Taxonomy::parse_string("ro ot|R\n"), DataError);
    }
    SECTION("empty file") { CHECK_THROWS_AS(Taxonomy::parse_string("# only a comment\n"), DataError); }
}

TEST_CASE("tree invariants hold on the loaded taxonomy") {
    Taxonomy t = Taxonomy::load(std::filesystem::path(TREECAT_SOURCE_DIR) / "data/taxonomy_general.txt");

    SECTION("every non-root appears exactly once in its parent's children") {
        for (size_t i = 1; i < t.size(); ++i) {
            const auto& n = t.node(static_cast<int>(i));
            REQUIRE(n.parent >= 0);
            const auto& kids = t.node(n.parent).children;
            CHECK(std::count(kids.begin(), kids.end(), static_cast<int>(i)) == 1);
        }
    }
    SECTION("subtree leaf sets partition the leaves") {
        std::set<int> seen;
        size_t total = 0;
        for (int c : t.root().children) {
            auto sub = t.subtree_leaves(c);
            total += sub.size();
            for (int l : sub) CHECK(seen.insert(l).second);  // pairwise disjoint
        }
        CHECK(total == t.leaves().size());
    }
}

TEST_CASE("load -> serialize -> load round-trips identically") {
    for (const std::string* text : {&kSmall}) {
        Taxonomy t1 = Taxonomy::parse_string(*text);
        Taxonomy t2 = Taxonomy::parse_string(t1.serialize());
        REQUIRE(t1.size() == t2.size());
        CHECK(t1.serialize() == t2.serialize());
        CHECK(t1.content_hash() == t2.content_hash());
    }
    Taxonomy big = Taxonomy::load(std::filesystem::path(TREECAT_SOURCE_DIR) / "data/taxonomy_general.txt");
    CHECK(Taxonomy::parse_string(big.serialize()).serialize() == big.serialize());
}
