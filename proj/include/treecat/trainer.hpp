// Per-node training pipeline: balanced dataset -> dictionary -> 90/10 split ->
// stratified 5-fold cross-validation -> final fit -> hold-out evaluation ->
// persisted model bundle. Runs once per internal taxonomy node, per feature mode.
#pragma once

#include <atomic>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "treecat/common.hpp"
#include "treecat/corpus.hpp"
#include "treecat/embedding.hpp"
#include "treecat/mlp.hpp"
#include "treecat/taxonomy.hpp"
#include "treecat/textpipe.hpp"

namespace treecat {

using json = nlohmann::ordered_json;

struct TrainParams {
    FitParams fit;                 // per-network optimizer settings
    EmbedderParams embed;          // shared document embedder
    std::vector<int> hidden{256};  // hidden layer widths for every node network
    int k_folds = 5;
    size_t max_terms = 20000;      // per-node dictionary cap
    std::optional<int> cap_per_class;
    uint64_t seed = 42;
    int jobs = 1;
};

struct FoldLog {
    std::vector<std::vector<std::string>> fold_doc_ids;
    std::vector<double> fold_accuracies;
};

struct NodeReport {
    double cv_accuracy = 0.0;
    double training_accuracy = 0.0;
    double test_accuracy = 0.0;
    EvalMetrics metrics;  // on the hold-out split
    FoldLog folds;
    std::vector<std::string> holdout_doc_ids;
    std::vector<std::string> warnings;
};

struct NodeModel {
    std::string node_id;
    FeatureMode mode = FeatureMode::bow;
    std::optional<Dictionary> dictionary;  // present for bow and bow_d2v
    Network network;
    std::vector<std::string> class_labels;  // child ids, taxonomy order
    NodeReport report;
    std::string dataset_manifest;  // doc_id<TAB>class rows
};

struct HierarchicalModel {
    Taxonomy taxonomy;
    FeatureMode mode = FeatureMode::bow;
    std::map<std::string, NodeModel> node_models;
    std::optional<Embedder> embedder;  // present when mode uses d2v
    Stoplist stoplist;
    std::vector<std::string> failures;  // "node_id: message" for nodes that failed to train
};

/// Trained vector when the document was part of embedder training, otherwise
/// a fresh inference.
inline std::vector<double> document_d2v(const Embedder& e, const Document& d, const Stoplist& stop) {
    if (const double* v = e.trained_doc_vector(d.doc_id))
        return std::vector<double>(v, v + e.dim());
    return e.infer(d.text, stop).values;
}

inline std::vector<double> make_features(const std::string& text, FeatureMode mode, const Dictionary* dict,
                                         const Stoplist& stop, const std::vector<double>* d2v) {
    std::vector<double> out;
    if (mode_uses_bow(mode)) {
        if (!dict) throw DataError("make_features: mode " + to_string(mode) + " needs a dictionary");
        out = bow_vectorize(text, *dict, stop).values;
    }
    if (mode_uses_d2v(mode)) {
        if (!d2v) throw DataError("make_features: mode " + to_string(mode) + " needs a document vector");
        out.insert(out.end(), d2v->begin(), d2v->end());
    }
    return out;
}

struct VectorizedDataset {
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    std::vector<std::string> doc_ids;
};

inline VectorizedDataset vectorize_dataset(const Corpus& c, const NodeDataset& ds, FeatureMode mode,
                                           const Dictionary* dict, const Embedder* emb, const Stoplist& stop) {
    std::map<std::string, int> label_index;
    for (size_t i = 0; i < ds.class_labels.size(); ++i) label_index[ds.class_labels[i]] = static_cast<int>(i);
    VectorizedDataset v;
    v.X.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
        const Document& d = c.doc(s.doc_index);
        std::vector<double> d2v;
        if (mode_uses_d2v(mode)) {
            if (!emb) throw DataError("vectorize_dataset: mode " + to_string(mode) + " needs an embedder");
            d2v = document_d2v(*emb, d, stop);
        }
        v.X.push_back(make_features(d.text, mode, dict, stop, mode_uses_d2v(mode) ? &d2v : nullptr));
        v.y.push_back(label_index.at(s.class_label));
        v.doc_ids.push_back(d.doc_id);
    }
    return v;
}

/// Stratified k-fold indices: per class, seed-shuffled then dealt round-robin,
/// so per-fold class counts differ by at most one.
inline std::vector<std::vector<int>> stratified_folds(const std::vector<int>& y, int n_classes, int k,
                                                      uint64_t seed) {
    std::vector<std::vector<int>> per_class(static_cast<size_t>(n_classes));
    for (size_t i = 0; i < y.size(); ++i) per_class[static_cast<size_t>(y[i])].push_back(static_cast<int>(i));
    std::vector<std::vector<int>> folds(static_cast<size_t>(k));
    for (int c = 0; c < n_classes; ++c) {
        auto& idxs = per_class[static_cast<size_t>(c)];
        if (static_cast<int>(idxs.size()) < k)
            throw DataError("cross-validation: class " + std::to_string(c) + " has " +
                            std::to_string(idxs.size()) + " samples (< k=" + std::to_string(k) + ")");
        Rng rng(hash_combine(seed, "fold_class"), std::to_string(c));
        rng.shuffle(idxs);
        for (size_t i = 0; i < idxs.size(); ++i) folds[i % static_cast<size_t>(k)].push_back(idxs[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

/// Mean held-fold accuracy over the k (k-1,1) combinations. Diagnostic only:
/// the shipped network is trained afterwards on the full training split.
inline double cross_validate(const VectorizedDataset& d, const NetworkSpec& spec, int k, const FitParams& fp,
                             uint64_t seed, FoldLog* log = nullptr) {
    auto folds = stratified_folds(d.y, spec.output_dim, k, seed);
    double sum = 0.0;
    for (int f = 0; f < k; ++f) {
        std::vector<char> held(d.X.size(), 0);
        for (int i : folds[static_cast<size_t>(f)]) held[static_cast<size_t>(i)] = 1;
        std::vector<std::vector<double>> Xtr, Xte;
        std::vector<int> ytr, yte;
        for (size_t i = 0; i < d.X.size(); ++i) {
            (held[i] ? Xte : Xtr).push_back(d.X[i]);
            (held[i] ? yte : ytr).push_back(d.y[i]);
        }
        NetworkSpec fold_spec = spec;
        fold_spec.seed = hash_combine(seed, "fold_net_" + std::to_string(f));
        Network net = Network::init(fold_spec);
        FitParams fold_fp = fp;
        fold_fp.seed = hash_combine(seed, "fold_fit_" + std::to_string(f));
        net.fit(Xtr, ytr, fold_fp);
        double acc = evaluate(net, Xte, yte).accuracy;
        sum += acc;
        if (log) {
            std::vector<std::string> ids;
            for (int i : folds[static_cast<size_t>(f)]) ids.push_back(d.doc_ids[static_cast<size_t>(i)]);
            log->fold_doc_ids.push_back(std::move(ids));
            log->fold_accuracies.push_back(acc);
        }
    }
    return sum / static_cast<double>(k);
}

namespace detail {
template <typename Fn>
auto with_node_context(const std::string& node_id, Fn&& fn) {
    try {
        return fn();
    } catch (const UsageError&) {
        throw;
    } catch (const TrainError& e) {
        throw TrainError("node '" + node_id + "': " + e.what());
    } catch (const DataError& e) {
        throw DataError("node '" + node_id + "': " + e.what());
    } catch (const std::exception& e) {
        throw TrainError("node '" + node_id + "': " + e.what());
    }
}
}  // namespace detail

inline NodeModel train_node(const Corpus& corpus_a, const Taxonomy& t, const std::string& node_id,
                            FeatureMode mode, const TrainParams& tp, const Stoplist& stop,
                            const Embedder* embedder) {
    return detail::with_node_context(node_id, [&]() -> NodeModel {
        uint64_t node_seed = hash_combine(tp.seed, node_id);

        NodeDataset ds = build_node_dataset(corpus_a, t, node_id, tp.cap_per_class);
        NodeModel nm;
        nm.node_id = node_id;
        nm.mode = mode;
        nm.class_labels = ds.class_labels;
        nm.dataset_manifest = ds.manifest(corpus_a);
        int max_count = 0, min_count = std::numeric_limits<int>::max();
        for (const auto& [_, n] : ds.class_counts) {
            max_count = std::max(max_count, n);
            min_count = std::min(min_count, n);
        }
        if (max_count - min_count > 1)
            nm.report.warnings.push_back("class imbalance: counts range " + std::to_string(min_count) + ".." +
                                         std::to_string(max_count));

        if (mode_uses_bow(mode)) {
            std::vector<std::string_view> texts;
            texts.reserve(ds.samples.size());
            for (const auto& s : ds.samples) texts.push_back(corpus_a.doc(s.doc_index).text);
            nm.dictionary = Dictionary::build(node_id, texts, tp.max_terms, stop);
        }
        if (mode_uses_d2v(mode) && !embedder)
            throw DataError("mode " + to_string(mode) + " requires a trained embedder");

        auto [train_cv, val_loo] = split_cv_loo(ds, tp.seed);
        const Dictionary* dict = nm.dictionary ? &*nm.dictionary : nullptr;
        VectorizedDataset vtrain = vectorize_dataset(corpus_a, train_cv, mode, dict, embedder, stop);
        VectorizedDataset vtest = vectorize_dataset(corpus_a, val_loo, mode, dict, embedder, stop);
        for (const auto& id : vtest.doc_ids) nm.report.holdout_doc_ids.push_back(id);

        NetworkSpec spec;
        spec.input_dim = static_cast<int>(vtrain.X.front().size());
        spec.hidden_layers = tp.hidden;
        spec.output_dim = static_cast<int>(ds.class_labels.size());
        spec.seed = hash_combine(node_seed, "init");

        nm.report.cv_accuracy = cross_validate(vtrain, spec, tp.k_folds, tp.fit,
                                               hash_combine(node_seed, "cv"), &nm.report.folds);

        nm.network = Network::init(spec);
        FitParams fp = tp.fit;
        fp.seed = hash_combine(node_seed, "fit");
        nm.report.training_accuracy = nm.network.fit(vtrain.X, vtrain.y, fp).training_accuracy;
        nm.report.metrics = evaluate(nm.network, vtest.X, vtest.y);
        nm.report.test_accuracy = nm.report.metrics.accuracy;

        if (std::abs(nm.report.cv_accuracy - nm.report.test_accuracy) > 0.05)
            nm.report.warnings.push_back("cv/test accuracy gap " +
                                         format_fixed(nm.report.cv_accuracy - nm.report.test_accuracy, 4) +
                                         " exceeds 0.05 (possible over/underfitting)");
        return nm;
    });
}

/// Trains every internal node (>= 2 children). Per-node failures are collected,
/// not fatal: the partial model carries a failure list.
inline HierarchicalModel train_hierarchy(const Corpus& corpus_a, const Taxonomy& t, FeatureMode mode,
                                         const TrainParams& tp, const Stoplist& stop) {
    HierarchicalModel hm;
    hm.taxonomy = t;
    hm.mode = mode;
    hm.stoplist = stop;
    if (mode_uses_d2v(mode)) {
        EmbedderParams ep = tp.embed;
        ep.seed = hash_combine(tp.seed, "embedder");
        hm.embedder = Embedder::train(corpus_a, stop, ep);
    }

    std::vector<std::string> node_ids;
    for (int idx : t.non_leaf_nodes()) node_ids.push_back(t.node(idx).id);

    std::vector<std::optional<NodeModel>> results(node_ids.size());
    std::vector<std::optional<std::string>> errors(node_ids.size());
    const Embedder* emb = hm.embedder ? &*hm.embedder : nullptr;

    auto run_one = [&](size_t i) {
        try {
            results[i] = train_node(corpus_a, t, node_ids[i], mode, tp, stop, emb);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    if (tp.jobs <= 1) {
        for (size_t i = 0; i < node_ids.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= node_ids.size()) break;
                run_one(i);
            }
        };
        std::vector<std::thread> pool;
        int n = std::min<int>(tp.jobs, static_cast<int>(node_ids.size()));
        for (int w = 0; w < n; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (size_t i = 0; i < node_ids.size(); ++i) {
        if (results[i])
            hm.node_models.emplace(node_ids[i], std::move(*results[i]));
        else
            hm.failures.push_back(node_ids[i] + ": " + errors[i].value_or("unknown error"));
    }
    return hm;
}

// --- reporting ---------------------------------------------------------------

inline std::string format_report_table(const HierarchicalModel& m) {
    std::ostringstream out;
    out << std::left << std::setw(34) << "node" << std::right << std::setw(8) << "cv_acc" << std::setw(11)
        << "train_acc" << std::setw(10) << "test_acc" << std::setw(11) << "precision" << std::setw(8)
        << "recall" << std::setw(8) << "f1" << "\n";
    for (int idx : m.taxonomy.non_leaf_nodes()) {
        const std::string& id = m.taxonomy.node(idx).id;
        auto it = m.node_models.find(id);
        if (it == m.node_models.end()) {
            out << std::left << std::setw(34) << id << "  (failed)\n";
            continue;
        }
        const NodeReport& r = it->second.report;
        out << std::left << std::setw(34) << id << std::right << std::setw(8) << format_fixed(r.cv_accuracy, 4)
            << std::setw(11) << format_fixed(r.training_accuracy, 4) << std::setw(10)
            << format_fixed(r.test_accuracy, 4) << std::setw(11) << format_fixed(r.metrics.macro_precision, 4)
            << std::setw(8) << format_fixed(r.metrics.macro_recall, 4) << std::setw(8)
            << format_fixed(r.metrics.macro_f1, 4) << "\n";
    }
    return out.str();
}

inline json metrics_to_json(const EvalMetrics& m, const std::vector<std::string>& labels) {
    json j;
    j["accuracy"] = m.accuracy;
    j["labels"] = labels;
    json per;
    for (size_t c = 0; c < m.per_class.size(); ++c) {
        per[labels[c]] = {{"precision", m.per_class[c].precision},
                          {"recall", m.per_class[c].recall},
                          {"f1", m.per_class[c].f1}};
    }
    j["per_class"] = per;
    j["macro_precision"] = m.macro_precision;
    j["macro_recall"] = m.macro_recall;
    j["macro_f1"] = m.macro_f1;
    j["confusion"] = m.confusion;
    return j;
}

// --- bundle persistence --------------------------------------------------------
//
// <dir>/manifest.json                      taxonomy hash, per-mode seeds + config
// <dir>/taxonomy.txt, stoplist.txt         everything needed to reload
// <dir>/<mode>/embedder.bin                shared embedder (d2v modes)
// <dir>/<mode>/<node_id>/network.bin
// <dir>/<mode>/<node_id>/dictionary.txt    (bow modes)
// <dir>/<mode>/<node_id>/report.json
// <dir>/<mode>/<node_id>/dataset_manifest.tsv

inline void save_model(const HierarchicalModel& m, const std::filesystem::path& dir,
                       const json& config_snapshot = json::object()) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string mode = to_string(m.mode);

    json manifest;
    fs::path manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        manifest = json::parse(read_file(manifest_path));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(m.taxonomy.content_hash()));
        if (manifest.value("taxonomy_hash", std::string(buf)) != buf)
            throw DataError("model bundle at " + dir.string() + " was built from a different taxonomy");
    } else {
        manifest["format"] = 1;
    }
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(m.taxonomy.content_hash()));
    manifest["taxonomy_hash"] = hash_hex;
    if (!manifest.contains("modes")) manifest["modes"] = json::object();
    json mode_entry;
    mode_entry["config"] = config_snapshot;
    mode_entry["failures"] = m.failures;
    manifest["modes"][mode] = mode_entry;

    m.taxonomy.save(dir / "taxonomy.txt");
    m.stoplist.save(dir / "stoplist.txt");
    write_file(manifest_path, manifest.dump(2) + "\n");

    fs::path mode_dir = dir / mode;
    fs::create_directories(mode_dir);
    if (m.embedder) m.embedder->save(mode_dir / "embedder.bin");

    for (const auto& [node_id, nm] : m.node_models) {
        fs::path node_dir = mode_dir / node_id;
        fs::create_directories(node_dir);
        nm.network.save(node_dir / "network.bin");
        if (nm.dictionary) nm.dictionary->save(node_dir / "dictionary.txt");
        write_file(node_dir / "dataset_manifest.tsv", nm.dataset_manifest);

        json r;
        r["node_id"] = nm.node_id;
        r["mode"] = to_string(nm.mode);
        r["classes"] = nm.class_labels;
        r["cv_accuracy"] = nm.report.cv_accuracy;
        r["fold_accuracies"] = nm.report.folds.fold_accuracies;
        r["fold_docs"] = nm.report.folds.fold_doc_ids;
        r["holdout_docs"] = nm.report.holdout_doc_ids;
        r["training_accuracy"] = nm.report.training_accuracy;
        r["test_accuracy"] = nm.report.test_accuracy;
        r["metrics"] = metrics_to_json(nm.report.metrics, nm.class_labels);
        r["warnings"] = nm.report.warnings;
        r["dictionary_terms"] = nm.dictionary ? nm.dictionary->terms.size() : 0;
        write_file(node_dir / "report.json", r.dump(2) + "\n");
    }
}

inline HierarchicalModel load_model(const std::filesystem::path& dir, FeatureMode mode) {
    namespace fs = std::filesystem;
    const std::string mode_str = to_string(mode);
    fs::path mode_dir = dir / mode_str;
    if (!fs::is_directory(mode_dir))
        throw DataError("model bundle " + dir.string() + " has no '" + mode_str + "' mode directory");

    HierarchicalModel m;
    m.mode = mode;
    m.taxonomy = Taxonomy::load(dir / "taxonomy.txt");
    m.stoplist = fs::exists(dir / "stoplist.txt") ? Stoplist::load(dir / "stoplist.txt") : Stoplist::defaults();
    if (mode_uses_d2v(mode)) m.embedder = Embedder::load(mode_dir / "embedder.bin");

    fs::path manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        json manifest = json::parse(read_file(manifest_path));
        if (manifest.contains("modes") && manifest["modes"].contains(mode_str))
            for (const auto& f : manifest["modes"][mode_str].value("failures", std::vector<std::string>{}))
                m.failures.push_back(f);
    }

    for (int idx : m.taxonomy.non_leaf_nodes()) {
        const std::string node_id = m.taxonomy.node(idx).id;
        fs::path node_dir = mode_dir / node_id;
        if (!fs::is_directory(node_dir)) continue;  // failed or absent node

        NodeModel nm;
        nm.node_id = node_id;
        nm.mode = mode;
        for (int c : m.taxonomy.node(idx).children) nm.class_labels.push_back(m.taxonomy.node(c).id);
        nm.network = Network::load(node_dir / "network.bin");
        if (nm.network.spec().output_dim != static_cast<int>(nm.class_labels.size()))
            throw DataError("node '" + node_id + "': network output dim " +
                            std::to_string(nm.network.spec().output_dim) + " != child count " +
                            std::to_string(nm.class_labels.size()));
        if (mode_uses_bow(mode)) nm.dictionary = Dictionary::load(node_dir / "dictionary.txt");
        if (fs::exists(node_dir / "dataset_manifest.tsv"))
            nm.dataset_manifest = read_file(node_dir / "dataset_manifest.tsv");

        if (fs::exists(node_dir / "report.json")) {
            json r = json::parse(read_file(node_dir / "report.json"));
            nm.report.cv_accuracy = r.value("cv_accuracy", 0.0);
            nm.report.training_accuracy = r.value("training_accuracy", 0.0);
            nm.report.test_accuracy = r.value("test_accuracy", 0.0);
            if (r.contains("fold_accuracies"))
                nm.report.folds.fold_accuracies = r["fold_accuracies"].get<std::vector<double>>();
            if (r.contains("fold_docs"))
                nm.report.folds.fold_doc_ids = r["fold_docs"].get<std::vector<std::vector<std::string>>>();
            if (r.contains("holdout_docs"))
                nm.report.holdout_doc_ids = r["holdout_docs"].get<std::vector<std::string>>();
            if (r.contains("warnings")) nm.report.warnings = r["warnings"].get<std::vector<std::string>>();
        }
        m.node_models.emplace(node_id, std::move(nm));
    }
    return m;
}

}  // namespace treecat
