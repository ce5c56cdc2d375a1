#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <numeric>
#include <set>

#include "support/tmpdir.hpp"
#include "treecat/textpipe.hpp"

using namespace treecat;

TEST_CASE("tokenize pinned rules") {
    Stoplist stop = Stoplist::defaults();

    SECTION("stoplist and punctuation") {
        CHECK(tokenize("The cat sat. The cat!", stop) == std::vector<std::string>{"cat", "sat", "cat"});
    }
    SECTION("empty input") { CHECK(tokenize("", stop).empty()); }
    SECTION("mineral sentence") {
        CHECK(tokenize("Bukovskyite is an iron arsenate sulfate mineral", stop) ==
              std::vector<std::string>{"bukovskyite", "iron", "arsenate", "sulfate", "mineral"});
    }
    SECTION("short tokens and digit runs drop; mixed alnum stays") {
        CHECK(tokenize("a I x7 42 1969 covid19", Stoplist::empty()) ==
              std::vector<std::string>{"x7", "covid19"});
    }
    SECTION("non-alphanumeric bytes split") {
        CHECK(tokenize("foo_bar,baz-qux's", Stoplist::empty()) ==
              std::vector<std::string>{"foo", "bar", "baz", "qux"});
    }
}

TEST_CASE("tokenize is idempotent on its own joined output") {
    Stoplist stop = Stoplist::defaults();
    auto rejoin = [](const std::vector<std::string>& toks) {
        std::string s;
        for (const auto& t : toks) s += t + " ";
        return s;
    };
    for (const char* text : {"The Quick, brown FOX; jumps over 42 lazy dogs!", "", "x y z, 12ab --- AB_cd"}) {
        auto once = tokenize(text, stop);
        CHECK(tokenize(rejoin(once), stop) == once);
    }
}

TEST_CASE("dictionary build orders by document frequency then lexicographic") {
    Stoplist none = Stoplist::empty();
    SECTION("tie broken lexicographically") {
        std::vector<std::string_view> docs{"aa bb", "bb cc", "bb"};
        Dictionary d = Dictionary::build("n", docs, 2, none);
        REQUIRE(d.terms.size() == 2);
        CHECK(d.terms[0] == "bb");  // df 3
        CHECK(d.terms[1] == "aa");  // df 1, ties with cc, 'aa' < 'cc'
    }
    SECTION("max_terms >= vocabulary keeps everything df-ordered") {
        std::vector<std::string_view> docs{"xx yy zz", "yy zz", "zz"};
        Dictionary d = Dictionary::build("n", docs, 100, none);
        CHECK(d.terms == std::vector<std::string>{"zz", "yy", "xx"});
    }
    SECTION("repeats in one doc count once for df") {
        std::vector<std::string_view> docs{"xx xx xx"};
        Dictionary d = Dictionary::build("n", docs, 10, none);
        CHECK(d.terms == std::vector<std::string>{"xx"});
    }
    SECTION("all-empty docs are an error") {
        std::vector<std::string_view> docs{"a 1", "!!"};
        CHECK_THROWS_AS(Dictionary::build("n", docs, 10, none), DataError);
    }
    SECTION("df matches a brute-force recount") {
        std::vector<std::string_view> docs{"red green blue", "green blue", "blue", "red blue"};
        Dictionary d = Dictionary::build("n", docs, 100, none);
        std::map<std::string, int> df;
        for (auto text : docs) {
            std::set<std::string> seen;
            for (auto& t : tokenize(text, none)) seen.insert(t);
            for (auto& t : seen) ++df[t];
        }
        for (size_t i = 0; i + 1 < d.terms.size(); ++i) {
            int a = df[d.terms[i]], b = df[d.terms[i + 1]];
            CHECK(a >= b);
            if (a == b) CHECK(d.terms[i] < d.terms[i + 1]);
        }
    }
}

TEST_CASE("bow vectorization") {
    Stoplist none = Stoplist::empty();
    Dictionary dict;
    dict.node_id = "n";
    dict.terms = {"cat", "sat", "dog"};
    for (size_t i = 0; i < dict.terms.size(); ++i) dict.index[dict.terms[i]] = static_cast<int>(i);

    SECTION("raw counts in dictionary order") {
        auto fv = bow_vectorize("cat sat cat", dict, none);
        CHECK(fv.values == std::vector<double>{2, 1, 0});
        CHECK(fv.mode == FeatureMode::bow);
    }
    SECTION("out-of-dictionary text gives the zero vector") {
        auto fv = bow_vectorize("horse goat", dict, none);
        CHECK(fv.values == std::vector<double>{0, 0, 0});
    }
    SECTION("sum of counts equals in-dictionary token count (recount oracle)") {
        Rng rng(99);
        std::vector<std::string> pool{"cat", "sat", "dog", "bird", "fish"};
        for (int trial = 0; trial < 20; ++trial) {
            std::string text;
            int expected = 0;
            for (int t = 0; t < 30; ++t) {
                const std::string& w = pool[rng.below(pool.size())];
                if (dict.index.count(w)) ++expected;
                text += w + " ";
            }
            auto fv = bow_vectorize(text, dict, none);
            CHECK(std::accumulate(fv.values.begin(), fv.values.end(), 0.0) == expected);
        }
    }
    SECTION("permuting the words leaves the vector unchanged") {
        std::vector<std::string> words{"cat", "dog", "sat", "cat", "bird"};
        auto fv1 = bow_vectorize("cat dog sat cat bird", dict, none);
        Rng rng(7);
        rng.shuffle(words);
        std::string text;
        for (auto& w : words) text += w + " ";
        CHECK(bow_vectorize(text, dict, none).values == fv1.values);
    }
}

TEST_CASE("feature concatenation") {
    FeatureVector bow{FeatureMode::bow, {1, 0, 2}};
    FeatureVector d2v{FeatureMode::d2v, {0.5, -0.25}};
    SECTION("dims add and slices line up") {
        auto cat = concat_features(bow, d2v);
        CHECK(cat.mode == FeatureMode::bow_d2v);
        REQUIRE(cat.dims() == 5);
        CHECK(std::vector<double>(cat.values.begin(), cat.values.begin() + 3) == bow.values);
        CHECK(std::vector<double>(cat.values.begin() + 3, cat.values.end()) == d2v.values);
    }
    SECTION("zero inputs stay zero at full width") {
        FeatureVector zb{FeatureMode::bow, std::vector<double>(4, 0.0)};
        FeatureVector zd{FeatureMode::d2v, std::vector<double>(3, 0.0)};
        auto cat = concat_features(zb, zd);
        CHECK(cat.dims() == 7);
        CHECK(std::all_of(cat.values.begin(), cat.values.end(), [](double v) { return v == 0.0; }));
    }
    SECTION("mode mismatch rejected") {
        CHECK_THROWS_AS(concat_features(d2v, bow), DataError);
        CHECK_THROWS_AS(concat_features(bow, bow), DataError);
    }
}

TEST_CASE("dictionary and stoplist persistence") {
    testing::TmpDir tmp("textpipe");
    Stoplist none = Stoplist::empty();
    std::vector<std::string_view> docs{"delta echo foxtrot", "echo foxtrot", "foxtrot"};
    Dictionary d = Dictionary::build("mynode", docs, 10, none);
    d.save(tmp / "dict.txt");
    Dictionary d2 = Dictionary::load(tmp / "dict.txt");
    CHECK(d2.node_id == "mynode");
    CHECK(d2.terms == d.terms);
    CHECK(d2.index.at("foxtrot") == 0);

    write_file(tmp / "stop.txt", "# custom\nfoo\nbar\n");
    Stoplist s = Stoplist::load(tmp / "stop.txt");
    CHECK(s.contains("foo"));
    CHECK(s.contains("bar"));
    CHECK_FALSE(s.contains("baz"));
    CHECK(tokenize("foo baz bar", s) == std::vector<std::string>{"baz"});
}
