// Paragraph-vector document embedder (PV-DBOW with negative sampling) plus
// cosine similarity. Training is single-threaded and seed-deterministic;
// inference on a frozen model only updates the fresh document vector.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "treecat/common.hpp"
#include "treecat/corpus.hpp"
#include "treecat/textpipe.hpp"

namespace treecat {

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw DataError("cosine_similarity: dim mismatch (" + std::to_string(u.size()) + " vs " +
                        std::to_string(v.size()) + ")");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;  // pinned: zero-norm input -> 0
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Negative-sampling objective for one (doc vector, target word) pair:
///   L = -log s(v.u_t) - sum_j log s(-v.u_nj)
/// Pure function; the finite-difference oracle checks pv_dbow_grad_doc against it.
inline double pv_dbow_loss(std::span<const double> doc_vec, int target, std::span<const int> negatives,
                           const std::vector<double>& word_weights, int dim) {
    auto dot_row = [&](int row) {
        const double* u = word_weights.data() + static_cast<size_t>(row) * dim;
        double s = 0.0;
        for (int c = 0; c < dim; ++c) s += doc_vec[static_cast<size_t>(c)] * u[c];
        return s;
    };
    double loss = -std::log(sigmoid(dot_row(target)));
    for (int n : negatives) loss -= std::log(sigmoid(-dot_row(n)));
    return loss;
}

/// d(pv_dbow_loss)/d(doc_vec), written into grad_out.
inline void pv_dbow_grad_doc(std::span<const double> doc_vec, int target, std::span<const int> negatives,
                             const std::vector<double>& word_weights, int dim, std::span<double> grad_out) {
    for (int c = 0; c < dim; ++c) grad_out[static_cast<size_t>(c)] = 0.0;
    auto accumulate = [&](int row, double label) {
        const double* u = word_weights.data() + static_cast<size_t>(row) * dim;
        double s = 0.0;
        for (int c = 0; c < dim; ++c) s += doc_vec[static_cast<size_t>(c)] * u[c];
        double coeff = sigmoid(s) - label;  // dL/d(dot)
        for (int c = 0; c < dim; ++c) grad_out[static_cast<size_t>(c)] += coeff * u[c];
    };
    accumulate(target, 1.0);
    for (int n : negatives) accumulate(n, 0.0);
}

/// One SGD step of the objective above: doc_vec -= lr * dL/d(doc_vec), and,
/// when update_weights is set, the matching update of the touched word rows.
inline void pv_dbow_step(std::span<double> doc_vec, int target, std::span<const int> negatives,
                         std::vector<double>& word_weights, int dim, double lr, bool update_weights,
                         double* loss_out = nullptr) {
    thread_local std::vector<double> neu1e;
    neu1e.assign(static_cast<size_t>(dim), 0.0);
    double loss = 0.0;
    auto pair_step = [&](int row, double label) {
        double* u = word_weights.data() + static_cast<size_t>(row) * dim;
        double s = 0.0;
        for (int c = 0; c < dim; ++c) s += doc_vec[static_cast<size_t>(c)] * u[c];
        double sig = sigmoid(label > 0.5 ? s : -s);
        loss -= std::log(sig);
        double g = (label - sigmoid(s)) * lr;  // -lr * dL/d(dot)
        for (int c = 0; c < dim; ++c) neu1e[static_cast<size_t>(c)] += g * u[c];
        if (update_weights)
            for (int c = 0; c < dim; ++c) u[c] += g * doc_vec[static_cast<size_t>(c)];
    };
    pair_step(target, 1.0);
    for (int n : negatives) pair_step(n, 0.0);
    for (int c = 0; c < dim; ++c) doc_vec[static_cast<size_t>(c)] += neu1e[static_cast<size_t>(c)];
    if (loss_out) *loss_out += loss;
}

struct EmbedderParams {
    int dim = 300;
    int epochs = 20;
    int negative = 5;
    double lr_start = 0.025;
    double lr_min = 1e-4;
    int min_count = 2;
    int infer_steps = 50;
    uint64_t seed = 1;

    void validate() const {
        if (dim < 1) throw DataError("embedder: dim must be >= 1");
        if (negative < 1) throw DataError("embedder: negative sample count must be >= 1");
        if (epochs < 1) throw DataError("embedder: epochs must be >= 1");
    }
};

struct DocVector {
    std::vector<double> values;
    std::string doc_id;
    bool oov = false;  // set when the text had no in-vocabulary tokens
};

class Embedder {
public:
    static Embedder train(const Corpus& corpus, const Stoplist& stop, const EmbedderParams& params) {
        return train(corpus.documents(), stop, params);
    }

    static Embedder train(const std::vector<Document>& docs, const Stoplist& stop, const EmbedderParams& params) {
        params.validate();
        if (docs.empty()) throw DataError("embedder: empty corpus");
        Embedder m;
        m.p_ = params;

        // vocabulary: tokens at or above min_count, by descending count then lexicographic
        std::map<std::string, long long> counts;
        std::vector<std::vector<std::string>> doc_tokens(docs.size());
        for (size_t i = 0; i < docs.size(); ++i) {
            doc_tokens[i] = tokenize(docs[i].text, stop);
            for (const auto& t : doc_tokens[i]) ++counts[t];
        }
        std::vector<std::pair<std::string, long long>> ranked;
        for (const auto& [tok, n] : counts)
            if (n >= params.min_count) ranked.emplace_back(tok, n);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (ranked.empty())
            throw DataError("embedder: empty vocabulary after min_count=" + std::to_string(params.min_count) +
                            " filtering");
        for (auto& [tok, n] : ranked) {
            m.index_[tok] = static_cast<int>(m.vocab_.size());
            m.vocab_.push_back(tok);
            m.counts_.push_back(n);
        }
        m.build_sampling_table();

        // token streams restricted to the vocabulary
        std::vector<std::vector<int>> streams(docs.size());
        long long total_words = 0;
        for (size_t i = 0; i < docs.size(); ++i) {
            for (const auto& t : doc_tokens[i]) {
                auto it = m.index_.find(t);
                if (it != m.index_.end()) streams[i].push_back(it->second);
            }
            total_words += static_cast<long long>(streams[i].size());
        }

        // init: word weights zero, doc vectors small uniform
        m.weights_.assign(m.vocab_.size() * static_cast<size_t>(params.dim), 0.0);
        m.doc_vecs_.assign(docs.size() * static_cast<size_t>(params.dim), 0.0);
        Rng init_rng(params.seed, "d2v_doc_init");
        for (auto& x : m.doc_vecs_) x = (init_rng.uniform() - 0.5) / params.dim;
        m.doc_ids_.reserve(docs.size());
        for (size_t i = 0; i < docs.size(); ++i) {
            m.doc_index_[docs[i].doc_id] = static_cast<int>(i);
            m.doc_ids_.push_back(docs[i].doc_id);
        }

        Rng rng(params.seed, "d2v_train");
        long long planned = total_words * params.epochs;
        long long processed = 0;
        std::vector<int> negs(static_cast<size_t>(params.negative));
        for (int epoch = 0; epoch < params.epochs; ++epoch) {
            double epoch_loss = 0.0;
            for (size_t d = 0; d < streams.size(); ++d) {
                std::span<double> dv(m.doc_vecs_.data() + d * static_cast<size_t>(params.dim),
                                     static_cast<size_t>(params.dim));
                for (int target : streams[d]) {
                    double lr = std::max(
                        m.p_.lr_min,
                        m.p_.lr_start * (1.0 - static_cast<double>(processed) / static_cast<double>(planned)));
                    ++processed;
                    int n_negs = m.draw_negatives(rng, target, negs);
                    pv_dbow_step(dv, target, std::span<const int>(negs.data(), static_cast<size_t>(n_negs)),
                                 m.weights_, params.dim, lr, /*update_weights=*/true, &epoch_loss);
                }
            }
            m.epoch_loss_.push_back(total_words > 0 ? epoch_loss / static_cast<double>(total_words) : 0.0);
        }
        for (double x : m.doc_vecs_)
            if (!std::isfinite(x)) throw TrainError("embedder training produced non-finite doc vectors");
        return m;
    }

    int dim() const { return p_.dim; }
    const EmbedderParams& params() const { return p_; }
    size_t vocab_size() const { return vocab_.size(); }
    size_t doc_count() const { return doc_ids_.size(); }
    const std::vector<double>& word_weights() const { return weights_; }
    const std::vector<double>& epoch_loss() const { return epoch_loss_; }

    bool in_vocab(const std::string& token) const { return index_.count(token) != 0; }

    const double* trained_doc_vector(const std::string& doc_id) const {
        auto it = doc_index_.find(doc_id);
        if (it == doc_index_.end()) return nullptr;
        return doc_vecs_.data() + static_cast<size_t>(it->second) * p_.dim;
    }

    /// Gradient-descent inference of a fresh document vector with word weights
    /// frozen. Seeded from (model seed, text bytes): identical text always
    /// yields the identical vector. Zero in-vocabulary tokens -> zero vector
    /// with the oov flag set.
    DocVector infer(const std::string& text, const Stoplist& stop, int steps = -1) const {
        if (steps < 0) steps = p_.infer_steps;
        if (steps <= 0) throw DataError("infer: steps must be > 0");
        DocVector out;
        out.values.assign(static_cast<size_t>(p_.dim), 0.0);
        std::vector<int> stream;
        for (const auto& t : tokenize(text, stop)) {
            auto it = index_.find(t);
            if (it != index_.end()) stream.push_back(it->second);
        }
        if (stream.empty()) {
            out.oov = true;
            return out;
        }
        Rng rng(hash_combine(p_.seed, "d2v_infer"), text);
        for (auto& x : out.values) x = (rng.uniform() - 0.5) / p_.dim;
        std::vector<double> frozen = weights_;  // updates must not leak into the model
        std::vector<int> negs(static_cast<size_t>(p_.negative));
        for (int s = 0; s < steps; ++s) {
            double lr = p_.lr_start + (p_.lr_min - p_.lr_start) * static_cast<double>(s) /
                                          static_cast<double>(std::max(1, steps - 1));
            for (int target : stream) {
                int n_negs = draw_negatives(rng, target, negs);
                pv_dbow_step(out.values, target, std::span<const int>(negs.data(), static_cast<size_t>(n_negs)),
                             frozen, p_.dim, lr, /*update_weights=*/false);
            }
        }
        return out;
    }

    // --- persistence -----------------------------------------------------
    //
    // Text format, one section per line group:
    //   dim \t vocab \t seed \t negative \t lr_start \t lr_min \t infer_steps \t min_count \t epochs \t docs
    //   token \t index \t count                 (vocab lines)
    //   <dim space-separated doubles>           (word weight rows, index order)
    //   doc_id \t <dim space-separated doubles> (trained doc vectors)
    // Doubles use shortest round-trip formatting, so save -> load is bit-exact.

    void save(const std::filesystem::path& path) const {
        std::string out;
        out += std::to_string(p_.dim) + "\t" + std::to_string(vocab_.size()) + "\t" + std::to_string(p_.seed) +
               "\t" + std::to_string(p_.negative) + "\t" + format_double(p_.lr_start) + "\t" +
               format_double(p_.lr_min) + "\t" + std::to_string(p_.infer_steps) + "\t" +
               std::to_string(p_.min_count) + "\t" + std::to_string(p_.epochs) + "\t" +
               std::to_string(doc_ids_.size()) + "\n";
        for (size_t i = 0; i < vocab_.size(); ++i)
            out += vocab_[i] + "\t" + std::to_string(i) + "\t" + std::to_string(counts_[i]) + "\n";
        for (size_t i = 0; i < vocab_.size(); ++i) {
            append_row(out, weights_.data() + i * static_cast<size_t>(p_.dim), p_.dim);
            out += "\n";
        }
        for (size_t d = 0; d < doc_ids_.size(); ++d) {
            out += doc_ids_[d] + "\t";
            append_row(out, doc_vecs_.data() + d * static_cast<size_t>(p_.dim), p_.dim);
            out += "\n";
        }
        write_file(path, out);
    }

    static Embedder load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open embedder file: " + path.string());
        std::string line;
        if (!std::getline(in, line)) throw DataError("empty embedder file: " + path.string());
        auto header = split(line, '\t');
        if (header.size() != 10) throw DataError("bad embedder header in " + path.string());
        Embedder m;
        m.p_.dim = static_cast<int>(parse_int(header[0]));
        size_t vocab = static_cast<size_t>(parse_int(header[1]));
        m.p_.seed = static_cast<uint64_t>(parse_int(header[2]));
        m.p_.negative = static_cast<int>(parse_int(header[3]));
        m.p_.lr_start = parse_double(header[4]);
        m.p_.lr_min = parse_double(header[5]);
        m.p_.infer_steps = static_cast<int>(parse_int(header[6]));
        m.p_.min_count = static_cast<int>(parse_int(header[7]));
        m.p_.epochs = static_cast<int>(parse_int(header[8]));
        size_t docs = static_cast<size_t>(parse_int(header[9]));

        for (size_t i = 0; i < vocab; ++i) {
            if (!std::getline(in, line)) throw DataError("truncated embedder vocab in " + path.string());
            auto f = split(line, '\t');
            if (f.size() != 3 || static_cast<size_t>(parse_int(f[1])) != i)
                throw DataError("bad embedder vocab line in " + path.string());
            m.index_[f[0]] = static_cast<int>(i);
            m.vocab_.push_back(f[0]);
            m.counts_.push_back(parse_int(f[2]));
        }
        m.weights_.resize(vocab * static_cast<size_t>(m.p_.dim));
        for (size_t i = 0; i < vocab; ++i) {
            if (!std::getline(in, line)) throw DataError("truncated embedder weights in " + path.string());
            parse_row(line, m.weights_.data() + i * static_cast<size_t>(m.p_.dim), m.p_.dim, path);
        }
        m.doc_vecs_.resize(docs * static_cast<size_t>(m.p_.dim));
        for (size_t d = 0; d < docs; ++d) {
            if (!std::getline(in, line)) throw DataError("truncated embedder doc vectors in " + path.string());
            size_t tab = line.find('\t');
            if (tab == std::string::npos) throw DataError("bad embedder doc line in " + path.string());
            std::string id = line.substr(0, tab);
            m.doc_index_[id] = static_cast<int>(d);
            m.doc_ids_.push_back(std::move(id));
            parse_row(line.substr(tab + 1), m.doc_vecs_.data() + d * static_cast<size_t>(m.p_.dim), m.p_.dim,
                      path);
        }
        m.build_sampling_table();
        return m;
    }

    /// Import externally produced vectors: plain `doc_id<TAB>floats...` rows.
    /// The result can only look up stored vectors; infer() flags everything oov.
    static Embedder import_doc_vectors(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open vector table: " + path.string());
        Embedder m;
        m.p_.dim = 0;
        std::string line;
        std::vector<double> row;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            size_t tab = line.find('\t');
            if (tab == std::string::npos) throw DataError("bad vector table line in " + path.string());
            std::string id = line.substr(0, tab);
            std::string rest = line.substr(tab + 1);
            std::vector<std::string> cols;
            for (auto& c : split(rest, ' '))
                if (!c.empty()) cols.push_back(c);
            if (m.p_.dim == 0) m.p_.dim = static_cast<int>(cols.size());
            if (static_cast<int>(cols.size()) != m.p_.dim)
                throw DataError("inconsistent vector width in " + path.string() + " at doc '" + id + "'");
            for (const auto& c : cols) m.doc_vecs_.push_back(parse_double(c));
            m.doc_index_[id] = static_cast<int>(m.doc_ids_.size());
            m.doc_ids_.push_back(std::move(id));
        }
        if (m.doc_ids_.empty()) throw DataError("empty vector table: " + path.string());
        return m;
    }

private:
    void build_sampling_table() {
        // cumulative unigram^0.75 distribution; negatives found by binary search
        cum_.clear();
        cum_.reserve(counts_.size());
        double acc = 0.0;
        for (long long n : counts_) {
            acc += std::pow(static_cast<double>(n), 0.75);
            cum_.push_back(acc);
        }
    }

    int draw_negatives(Rng& rng, int target, std::vector<int>& out) const {
        int n = 0;
        for (int j = 0; j < p_.negative; ++j) {
            double u = rng.uniform() * cum_.back();
            auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
            int idx = static_cast<int>(it - cum_.begin());
            if (idx >= static_cast<int>(vocab_.size())) idx = static_cast<int>(vocab_.size()) - 1;
            if (idx == target) continue;  // skip; occasionally fewer negatives
            out[static_cast<size_t>(n++)] = idx;
        }
        return n;
    }

    static void append_row(std::string& out, const double* v, int dim) {
        for (int c = 0; c < dim; ++c) {
            if (c) out += ' ';
            out += format_double(v[c]);
        }
    }

    static void parse_row(std::string_view line, double* dst, int dim, const std::filesystem::path& path) {
        int c = 0;
        size_t start = 0;
        while (start <= line.size() && c < dim) {
            size_t end = line.find(' ', start);
            if (end == std::string_view::npos) end = line.size();
            dst[c++] = parse_double(line.substr(start, end - start));
            start = end + 1;
        }
        if (c != dim || start <= line.size())
            throw DataError("bad vector row width in " + path.string());
    }

    EmbedderParams p_;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> index_;
    std::vector<long long> counts_;
    std::vector<double> weights_;   // vocab x dim, row-major
    std::vector<double> cum_;       // sampling table
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, int> doc_index_;
    std::vector<double> doc_vecs_;  // docs x dim, row-major
    std::vector<double> epoch_loss_;
};

}  // namespace treecat
