// Text preprocessing: tokenizer, per-node term dictionaries, bag-of-words features.
#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "treecat/common.hpp"

namespace treecat {

class Stoplist {
public:
    Stoplist() = default;

    static Stoplist defaults() {
        static const char* kWords[] = {
            "a",     "about", "above",  "after", "again",   "all",   "also",  "an",    "and",   "any",
            "are",   "as",    "at",     "be",    "because", "been",  "being", "below", "both",  "but",
            "by",    "can",   "did",    "do",    "does",    "doing", "down",  "during", "each", "few",
            "for",   "from",  "further", "had",  "has",     "have",  "having", "he",   "her",   "here",
            "him",   "his",   "how",    "i",     "if",      "in",    "into",  "is",    "it",    "its",
            "just",  "me",    "more",   "most",  "my",      "no",    "not",   "of",    "off",   "on",
            "only",  "or",    "other",  "our",   "out",     "over",  "own",   "same",  "she",   "so",
            "some",  "such",  "than",   "that",  "the",     "their", "them",  "then",  "there", "these",
            "they",  "this",  "those",  "through", "to",    "too",   "under", "until", "up",    "us",
            "very",  "was",   "we",     "were",  "what",    "when",  "where", "which", "while", "who",
            "whom",  "why",   "will",   "with",  "would",   "you",   "your"};
        Stoplist s;
        for (const char* w : kWords) s.words_.insert(w);
        return s;
    }

    static Stoplist load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open stoplist file: " + path.string());
        Stoplist s;
        std::string line;
        while (std::getline(in, line)) {
            auto t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            s.words_.emplace(t);
        }
        return s;
    }

    static Stoplist empty() { return Stoplist{}; }

    bool contains(const std::string& w) const { return words_.count(w) != 0; }
    size_t size() const { return words_.size(); }

    void save(const std::filesystem::path& path) const {
        std::string out;
        std::map<std::string, int> sorted;
        for (const auto& w : words_) sorted[w] = 1;
        for (const auto& [w, _] : sorted) out += w + "\n";
        write_file(path, out);
    }

private:
    std::unordered_set<std::string> words_;
};

/// Lowercase, split on any non-alphanumeric byte, drop tokens shorter than two
/// characters and pure digit runs, drop stoplisted words.
inline std::vector<std::string> tokenize(std::string_view text, const Stoplist& stop) {
    std::vector<std::string> out;
    std::string cur;
    bool all_digits = true;
    auto flush = [&] {
        if (cur.size() >= 2 && !all_digits && !stop.contains(cur)) out.push_back(cur);
        cur.clear();
        all_digits = true;
    };
    for (unsigned char c : text) {
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            if (c < '0' || c > '9') all_digits = false;
            cur.push_back(static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

enum class FeatureMode { bow, d2v, bow_d2v };

inline std::string to_string(FeatureMode m) {
    switch (m) {
        case FeatureMode::bow: return "bow";
        case FeatureMode::d2v: return "d2v";
        case FeatureMode::bow_d2v: return "bow_d2v";
    }
    return "?";
}

inline FeatureMode feature_mode_from_string(const std::string& s) {
    if (s == "bow") return FeatureMode::bow;
    if (s == "d2v") return FeatureMode::d2v;
    if (s == "bow_d2v") return FeatureMode::bow_d2v;
    throw UsageError("unknown feature mode '" + s + "' (expected bow|d2v|bow_d2v)");
}

inline bool mode_uses_bow(FeatureMode m) { return m != FeatureMode::d2v; }
inline bool mode_uses_d2v(FeatureMode m) { return m != FeatureMode::bow; }

struct FeatureVector {
    FeatureMode mode = FeatureMode::bow;
    std::vector<double> values;

    int dims() const { return static_cast<int>(values.size()); }
};

/// Fixed-order term list for one taxonomy node: descending document frequency,
/// ties broken lexicographically.
struct Dictionary {
    std::string node_id;
    std::vector<std::string> terms;
    std::unordered_map<std::string, int> index;

    static Dictionary build(std::string node_id, const std::vector<std::string_view>& texts, size_t max_terms,
                            const Stoplist& stop) {
        if (texts.empty()) throw DataError("dictionary build for '" + node_id + "': no documents");
        std::map<std::string, int> df;  // ordered: lexicographic tie-break falls out of iteration
        bool any = false;
        for (auto text : texts) {
            std::unordered_set<std::string> seen;
            for (auto& tok : tokenize(text, stop)) seen.insert(std::move(tok));
            if (!seen.empty()) any = true;
            for (const auto& tok : seen) ++df[tok];
        }
        if (!any) throw DataError("dictionary build for '" + node_id + "': all documents tokenize to empty");

        std::vector<std::pair<std::string, int>> ranked(df.begin(), df.end());
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (ranked.size() > max_terms) ranked.resize(max_terms);

        Dictionary d;
        d.node_id = std::move(node_id);
        d.terms.reserve(ranked.size());
        for (auto& [term, _] : ranked) {
            d.index[term] = static_cast<int>(d.terms.size());
            d.terms.push_back(term);
        }
        return d;
    }

    size_t size() const { return terms.size(); }

    void save(const std::filesystem::path& path) const {
        std::string out = node_id + "\t" + std::to_string(terms.size()) + "\n";
        for (const auto& t : terms) out += t + "\n";
        write_file(path, out);
    }

    static Dictionary load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open dictionary file: " + path.string());
        std::string header;
        if (!std::getline(in, header)) throw DataError("empty dictionary file: " + path.string());
        auto fields = split(header, '\t');
        if (fields.size() != 2) throw DataError("bad dictionary header in " + path.string());
        Dictionary d;
        d.node_id = fields[0];
        size_t count = static_cast<size_t>(parse_int(fields[1]));
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            d.index[line] = static_cast<int>(d.terms.size());
            d.terms.push_back(line);
        }
        if (d.terms.size() != count)
            throw DataError("dictionary term count mismatch in " + path.string() + ": header says " +
                            std::to_string(count) + ", found " + std::to_string(d.terms.size()));
        return d;
    }
};

/// Raw in-dictionary token counts; out-of-dictionary tokens are ignored.
inline FeatureVector bow_vectorize(std::string_view text, const Dictionary& dict, const Stoplist& stop) {
    FeatureVector fv;
    fv.mode = FeatureMode::bow;
    fv.values.assign(dict.size(), 0.0);
    for (const auto& tok : tokenize(text, stop)) {
        auto it = dict.index.find(tok);
        if (it != dict.index.end()) fv.values[static_cast<size_t>(it->second)] += 1.0;
    }
    return fv;
}

inline FeatureVector concat_features(const FeatureVector& bow, const FeatureVector& d2v) {
    if (bow.mode != FeatureMode::bow || d2v.mode != FeatureMode::d2v)
        throw DataError("concat_features: expected (bow, d2v) inputs, got (" + to_string(bow.mode) + ", " +
                        to_string(d2v.mode) + ")");
    FeatureVector fv;
    fv.mode = FeatureMode::bow_d2v;
    fv.values.reserve(bow.values.size() + d2v.values.size());
    fv.values.insert(fv.values.end(), bow.values.begin(), bow.values.end());
    fv.values.insert(fv.values.end(), d2v.values.begin(), d2v.values.end());
    return fv;
}

}  // namespace treecat
