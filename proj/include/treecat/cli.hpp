// Command-line surface: build-corpus, train, classify, evaluate.
//
// Configuration precedence: built-in defaults, then the config file
// (TREECAT_CONFIG or --config), then --set key=value overrides, then
// dedicated flags. Exit codes: 0 success, 1 usage, 2 data/validation,
// 3 training failure.
#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "treecat/config.hpp"
#include "treecat/graph.hpp"
#include "treecat/pathfinder.hpp"
#include "treecat/trainer.hpp"

namespace treecat::cli {

namespace detail {

inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
        cfg.set(std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
    }
}

inline void load_config_sources(RunConfig& cfg, const std::string& config_flag) {
    if (!config_flag.empty()) {
        cfg.load_file(config_flag);
    } else if (const char* env = std::getenv("TREECAT_CONFIG")) {
        if (*env) cfg.load_file(env);
    }
}

inline std::string two_decimals(double v) { return format_fixed(v, 2); }

inline void print_classification(const ClassifyResult& r, const std::string& format, std::ostream& out) {
    if (format == "machine") {
        if (r.unclassifiable) {
            out << "unclassifiable\n";
            return;
        }
        for (size_t i = 0; i < r.paths.size(); ++i) {
            const auto& p = r.paths[i];
            out << (i + 1) << '\t' << p.joined() << '\t' << format_fixed(p.total_score, 4) << '\t';
            for (size_t s = 0; s < p.node_scores.size(); ++s) {
                if (s) out << ',';
                out << format_fixed(p.node_scores[s], 4);
            }
            out << '\n';
        }
        return;
    }
    if (format == "json") {
        json j;
        j["unclassifiable"] = r.unclassifiable;
        j["low_tolerance"] = r.low_tolerance;
        j["paths"] = json::array();
        for (const auto& p : r.paths)
            j["paths"].push_back(
                {{"path", p.joined()}, {"score", p.total_score}, {"node_scores", p.node_scores}});
        out << j.dump(2) << "\n";
        return;
    }
    // human mode mirrors the classic result listing
    if (r.unclassifiable) {
        out << "Unclassifiable (no usable features)\n";
        return;
    }
    for (const auto& p : r.paths)
        out << "Label = " << p.joined(/*trailing_slash=*/true) << " Score = " << two_decimals(p.total_score)
            << "\n";
    if (r.low_tolerance) out << "(low tolerance: fallback expansion used)\n";
}

inline std::map<std::string, char> parse_split_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split manifest: " + path.string());
    std::map<std::string, char> sides;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 2 || f[1].size() != 1 || (f[1][0] != 'A' && f[1][0] != 'B'))
            throw DataError("bad split manifest line: '" + line + "'");
        sides[f[0]] = f[1][0];
    }
    return sides;
}

inline json hier_eval_to_json(const HierEvalResult& r, const std::string& mode, const std::string& model_dir) {
    json j;
    j["mode"] = mode;
    j["model_dir"] = model_dir;
    j["topk_accuracy"] = r.topk_accuracy;
    j["correct"] = r.correct;
    j["total"] = r.total;
    j["level1_labels"] = r.level1_labels;
    j["level1_confusion"] = r.level1_confusion;
    j["level1_unclassified"] = r.level1_unclassified;
    json docs = json::array();
    for (const auto& e : r.log) {
        json d;
        d["doc_id"] = e.doc_id;
        d["true_leaf"] = e.true_leaf;
        std::string tp;
        for (const auto& c : e.true_path) tp += (tp.empty() ? "" : "/") + c;
        d["true_path"] = tp;
        d["correct"] = e.correct;
        d["unclassifiable"] = e.unclassifiable;
        d["level1_true"] = e.level1_true >= 0 ? r.level1_labels[static_cast<size_t>(e.level1_true)] : "";
        d["level1_pred"] = e.level1_pred >= 0 ? r.level1_labels[static_cast<size_t>(e.level1_pred)] : "";
        json paths = json::array();
        for (const auto& p : e.top_paths)
            paths.push_back({{"path", p.joined()}, {"score", p.total_score}, {"node_scores", p.node_scores}});
        d["paths"] = paths;
        docs.push_back(std::move(d));
    }
    j["per_doc"] = docs;
    return j;
}

inline void print_confusion(const HierEvalResult& r, std::ostream& out) {
    size_t w = 6;
    for (const auto& l : r.level1_labels) w = std::max(w, l.size() + 1);
    out << std::string(w, ' ');
    for (const auto& l : r.level1_labels) out << std::setw(static_cast<int>(w)) << l;
    out << "\n";
    for (size_t i = 0; i < r.level1_labels.size(); ++i) {
        out << std::setw(static_cast<int>(w)) << std::left << r.level1_labels[i] << std::right;
        for (size_t c = 0; c < r.level1_labels.size(); ++c)
            out << std::setw(static_cast<int>(w)) << r.level1_confusion[i][c];
        if (r.level1_unclassified[i] > 0) out << "  (+" << r.level1_unclassified[i] << " unclassified)";
        out << "\n";
    }
}

// --- subcommand bodies -------------------------------------------------------

inline int cmd_build_corpus(const RunConfig& cfg, const std::string& out_dir, const std::string& embedder_file,
                            const std::string& import_vectors, std::ostream& out, std::ostream& err) {
    Taxonomy taxonomy = Taxonomy::load(cfg.taxonomy);
    Stoplist stop = cfg.make_stoplist();
    CategoryGraph graph = CategoryGraph::load(cfg.snapshot);
    out << "graph: " << graph.node_count() << " nodes, " << graph.edge_count() << " edges\n";

    Embedder embedder = [&] {
        if (!embedder_file.empty()) return Embedder::load(embedder_file);
        if (!import_vectors.empty()) return Embedder::import_doc_vectors(import_vectors);
        // bootstrap: train on the graph's own node texts
        std::vector<Document> node_texts;
        for (const auto& n : graph.nodes()) {
            std::string text = n.name;
            if (!n.description.empty()) text += " " + n.description;
            if (trim(text).empty()) text = n.id;
            node_texts.push_back({n.id, text, ""});
        }
        EmbedderParams ep;
        ep.dim = cfg.embed_dim;
        ep.epochs = cfg.embed_epochs;
        ep.negative = cfg.embed_negative;
        ep.lr_start = cfg.embed_lr;
        ep.lr_min = cfg.embed_lr_min;
        ep.min_count = cfg.embed_min_count;
        ep.infer_steps = cfg.embed_infer_steps;
        ep.seed = hash_combine(cfg.seed, "bootstrap_embedder");
        return Embedder::train(node_texts, stop, ep);
    }();

    auto flagged = graph.embed_nodes(embedder, stop);
    for (const auto& id : flagged) err << "warning: node '" << id << "' has no in-vocabulary tokens\n";
    graph.weight_edges(edge_weight_from_string(cfg.edge_weight));

    std::vector<std::string> warnings;
    HarvestPlan plan = HarvestPlan::build(taxonomy, graph, cfg.quota, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    if (plan.per_leaf.empty()) throw DataError("harvest plan is empty: no taxonomy leaf has match hints");

    HarvestResult res = harvest(graph, plan, taxonomy, cfg.docstore, out_dir);
    for (const auto& w : res.warnings) err << "warning: " << w << "\n";
    write_file(std::filesystem::path(out_dir) / "harvest_manifest.tsv", res.manifest_text());
    for (const auto& [leaf, n] : res.collected) out << leaf << ": " << n << " documents\n";
    if (!res.shortfalls.empty()) {
        err << "shortfall report:\n";
        for (const auto& s : res.shortfalls) err << "  " << s << "\n";
        return 2;
    }
    return 0;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    namespace fs = std::filesystem;
    Taxonomy taxonomy = Taxonomy::load(cfg.taxonomy);
    Stoplist stop = cfg.make_stoplist();
    std::vector<std::string> warnings;
    Corpus corpus = Corpus::ingest(cfg.corpus_dir, taxonomy, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    out << "corpus: " << corpus.size() << " documents across " << corpus.per_leaf().size() << " leaves\n";

    auto [corpus_a, corpus_b] = corpus.split_ab(cfg.split_ratio, cfg.seed);
    out << "split: A=" << corpus_a.size() << " B=" << corpus_b.size() << "\n";

    std::string manifest = corpus_a.split_manifest(corpus_b);
    fs::path manifest_path = fs::path(cfg.model_dir) / "split_manifest.tsv";
    if (fs::exists(manifest_path) && read_file(manifest_path) != manifest)
        throw DataError("existing split manifest at " + manifest_path.string() +
                        " differs; refusing to mix models trained on different splits");

    FeatureMode mode = cfg.feature_mode();
    HierarchicalModel model = train_hierarchy(corpus_a, taxonomy, mode, cfg.train_params(), stop);
    save_model(model, cfg.model_dir, cfg.to_json());
    write_file(manifest_path, manifest);
    write_file(fs::path(cfg.model_dir) / to_string(mode) / "config_used.cfg", cfg.serialize());

    out << format_report_table(model);
    if (!model.failures.empty()) {
        err << "training failures:\n";
        for (const auto& f : model.failures) err << "  " << f << "\n";
        return 3;
    }
    return 0;
}

inline int cmd_classify(const RunConfig& cfg, const std::string& input_file, const std::string& format, int k,
                        std::istream& in, std::ostream& out) {
    HierarchicalModel model = load_model(cfg.model_dir, cfg.feature_mode());
    std::string text;
    if (!input_file.empty()) {
        text = read_file(input_file);
    } else {
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    if (trim(text).empty()) throw UsageError("classify: no input text (pass a file or pipe text on stdin)");
    InferenceConfig icfg = cfg.inference_config();
    if (k > 0) icfg.top_k_paths = k;
    ClassifyResult r = classify(model, text, icfg);
    print_classification(r, format, out);
    return 0;
}

inline int cmd_evaluate(const RunConfig& cfg, const std::string& model2_dir, const std::string& mode2,
                        const std::string& split_manifest_flag, const std::string& json_out, int k,
                        std::ostream& out, std::ostream& err) {
    namespace fs = std::filesystem;
    FeatureMode mode1 = cfg.feature_mode();
    HierarchicalModel m1 = load_model(cfg.model_dir, mode1);

    std::optional<HierarchicalModel> m2;
    std::string dir2 = model2_dir.empty() ? cfg.model_dir : model2_dir;
    if (!mode2.empty()) {
        m2 = load_model(dir2, feature_mode_from_string(mode2));
        if (m2->taxonomy.content_hash() != m1.taxonomy.content_hash())
            throw DataError("models were built from different taxonomies");
        if (dir2 != cfg.model_dir) {
            fs::path sm1 = fs::path(cfg.model_dir) / "split_manifest.tsv";
            fs::path sm2 = fs::path(dir2) / "split_manifest.tsv";
            if (fs::exists(sm1) && fs::exists(sm2) && read_file(sm1) != read_file(sm2))
                throw DataError("models carry different corpus split manifests; comparison needs an identical B split");
        }
    }

    std::vector<std::string> warnings;
    Corpus full = Corpus::ingest(cfg.corpus_dir, m1.taxonomy, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";

    // B side selection: explicit manifest, else the bundle's, else the whole corpus
    Corpus corpus_b;
    std::string manifest_used;
    fs::path manifest_path = split_manifest_flag.empty()
                                 ? fs::path(cfg.model_dir) / "split_manifest.tsv"
                                 : fs::path(split_manifest_flag);
    if (fs::exists(manifest_path)) {
        manifest_used = manifest_path.string();
        auto sides = parse_split_manifest(manifest_path);
        std::map<std::string, int> by_id;
        for (size_t i = 0; i < full.size(); ++i) by_id[full.doc(static_cast<int>(i)).doc_id] = static_cast<int>(i);
        for (const auto& [id, side] : sides) {
            if (side != 'B') continue;
            auto it = by_id.find(id);
            if (it == by_id.end())
                throw DataError("split manifest names document '" + id + "' missing from the corpus");
            corpus_b.add(full.doc(it->second));
        }
        if (corpus_b.size() == 0) throw DataError("split manifest selects no B documents");
    } else {
        corpus_b = std::move(full);
    }

    InferenceConfig icfg = cfg.inference_config();
    if (k > 0) icfg.top_k_paths = k;

    HierEvalResult r1 = evaluate_hierarchical(m1, corpus_b, icfg, cfg.leaf_match_only);
    out << "mode " << to_string(mode1) << ": top-" << icfg.top_k_paths << " path accuracy "
        << format_fixed(r1.topk_accuracy, 4) << " (" << r1.correct << "/" << r1.total << ")\n";
    print_confusion(r1, out);

    json report;
    report["k"] = icfg.top_k_paths;
    report["corpus_dir"] = cfg.corpus_dir;
    report["split_manifest"] = manifest_used;
    report["models"] = json::array();
    report["models"].push_back(hier_eval_to_json(r1, to_string(mode1), cfg.model_dir));

    if (m2) {
        HierEvalResult r2 = evaluate_hierarchical(*m2, corpus_b, icfg, cfg.leaf_match_only);
        out << "mode " << mode2 << ": top-" << icfg.top_k_paths << " path accuracy "
            << format_fixed(r2.topk_accuracy, 4) << " (" << r2.correct << "/" << r2.total << ")\n";
        print_confusion(r2, out);
        out << "delta (" << mode2 << " - " << to_string(mode1) << "): correct "
            << (r2.correct >= r1.correct ? "+" : "") << (r2.correct - r1.correct) << " ("
            << (r2.topk_accuracy >= r1.topk_accuracy ? "+" : "")
            << format_fixed(100.0 * (r2.topk_accuracy - r1.topk_accuracy), 2) << "%)\n";
        report["models"].push_back(hier_eval_to_json(r2, mode2, dir2));
        json delta;
        delta["correct"] = r2.correct - r1.correct;
        delta["topk_accuracy"] = r2.topk_accuracy - r1.topk_accuracy;
        std::vector<std::vector<int>> dconf = r2.level1_confusion;
        for (size_t i = 0; i < dconf.size(); ++i)
            for (size_t c = 0; c < dconf[i].size(); ++c) dconf[i][c] -= r1.level1_confusion[i][c];
        delta["level1_confusion"] = dconf;
        report["delta"] = delta;
    }

    if (!json_out.empty()) write_file(json_out, report.dump(2) + "\n");
    return 0;
}

}  // namespace detail

/// Entry point shared by the binary and the test suite. `args` excludes the
/// program name.
inline int run(std::vector<std::string> args, std::istream& in = std::cin, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"hierarchical text classifier over a topic taxonomy"};
    app.name("treecat");
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_file;
    std::vector<std::string> sets;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "config file (key = value lines)");
        sub->add_option("--set", sets, "override a config key: --set key=value")->allow_extra_args(false);
        return sub;
    };

    // build-corpus
    auto* sc_build = add_common(app.add_subcommand("build-corpus", "harvest a corpus from a category graph"));
    std::string b_out = "corpus", b_embedder, b_import;
    std::optional<std::string> b_snapshot, b_taxonomy, b_docstore;
    std::optional<int> b_quota;
    std::optional<uint64_t> b_seed;
    sc_build->add_option("--snapshot", b_snapshot, "category graph snapshot file");
    sc_build->add_option("--taxonomy", b_taxonomy, "taxonomy file");
    sc_build->add_option("--docstore", b_docstore, "directory with <doc_id>.txt files");
    sc_build->add_option("--out", b_out, "output corpus directory");
    sc_build->add_option("--quota", b_quota, "documents per leaf");
    sc_build->add_option("--embedder", b_embedder, "pre-trained embedder model file");
    sc_build->add_option("--import-vectors", b_import, "plain doc_id<TAB>floats vector table");
    sc_build->add_option("--seed", b_seed, "random seed");

    // train
    auto* sc_train = add_common(app.add_subcommand("train", "train one model per internal taxonomy node"));
    std::optional<std::string> t_corpus, t_taxonomy, t_model, t_mode;
    std::optional<double> t_ratio;
    std::optional<uint64_t> t_seed;
    std::optional<int> t_jobs;
    sc_train->add_option("--corpus", t_corpus, "corpus directory");
    sc_train->add_option("--taxonomy", t_taxonomy, "taxonomy file");
    sc_train->add_option("--model", t_model, "model bundle directory");
    sc_train->add_option("--mode", t_mode, "feature mode: bow|d2v|bow_d2v");
    sc_train->add_option("--ratio", t_ratio, "corpus A/B split ratio");
    sc_train->add_option("--seed", t_seed, "random seed");
    sc_train->add_option("--jobs", t_jobs, "parallel node trainings");

    // classify
    auto* sc_classify = add_common(app.add_subcommand("classify", "classify a document into taxonomy paths"));
    std::optional<std::string> c_model, c_mode;
    std::string c_file;
    int c_k = 0;
    bool c_machine = false, c_json = false;
    sc_classify->add_option("--model", c_model, "model bundle directory");
    sc_classify->add_option("--mode", c_mode, "feature mode: bow|d2v|bow_d2v");
    sc_classify->add_option("-k,--k", c_k, "paths to return");
    sc_classify->add_flag("--machine", c_machine, "tab-separated machine output");
    sc_classify->add_flag("--json", c_json, "JSON output");
    sc_classify->add_option("file", c_file, "input text file (default: stdin)");

    // evaluate
    auto* sc_eval = add_common(app.add_subcommand("evaluate", "hierarchical top-k evaluation, optional mode comparison"));
    std::optional<std::string> e_model, e_mode, e_corpus;
    std::string e_model2, e_mode2, e_manifest, e_json_out;
    int e_k = 0;
    bool e_leaf_only = false;
    sc_eval->add_option("--model", e_model, "model bundle directory");
    sc_eval->add_option("--mode", e_mode, "feature mode of the first model");
    sc_eval->add_option("--model2", e_model2, "second model bundle (defaults to --model)");
    sc_eval->add_option("--mode2", e_mode2, "feature mode of the second model");
    sc_eval->add_option("--corpus", e_corpus, "corpus directory holding the evaluation documents");
    sc_eval->add_option("--split-manifest", e_manifest, "split manifest selecting the B side");
    sc_eval->add_option("-k,--k", e_k, "paths to consider per document");
    sc_eval->add_option("--out", e_json_out, "write the JSON comparison report here");
    sc_eval->add_flag("--leaf-only", e_leaf_only, "match the leaf category instead of the full path");

    std::vector<const char*> argv;
    argv.push_back("treecat");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        detail::load_config_sources(cfg, config_file);
        detail::apply_overrides(cfg, sets);

        if (sc_build->parsed()) {
            if (b_snapshot) cfg.snapshot = *b_snapshot;
            if (b_taxonomy) cfg.taxonomy = *b_taxonomy;
            if (b_docstore) cfg.docstore = *b_docstore;
            if (b_quota) cfg.quota = *b_quota;
            if (b_seed) cfg.seed = *b_seed;
            return detail::cmd_build_corpus(cfg, b_out, b_embedder, b_import, out, err);
        }
        if (sc_train->parsed()) {
            if (t_corpus) cfg.corpus_dir = *t_corpus;
            if (t_taxonomy) cfg.taxonomy = *t_taxonomy;
            if (t_model) cfg.model_dir = *t_model;
            if (t_mode) cfg.mode = *t_mode;
            if (t_ratio) cfg.split_ratio = *t_ratio;
            if (t_seed) cfg.seed = *t_seed;
            if (t_jobs) cfg.jobs = *t_jobs;
            return detail::cmd_train(cfg, out, err);
        }
        if (sc_classify->parsed()) {
            if (c_model) cfg.model_dir = *c_model;
            if (c_mode) cfg.mode = *c_mode;
            if (c_machine && c_json) throw UsageError("--machine and --json are mutually exclusive");
            std::string format = c_machine ? "machine" : (c_json ? "json" : "human");
            return detail::cmd_classify(cfg, c_file, format, c_k, in, out);
        }
        if (sc_eval->parsed()) {
            if (e_model) cfg.model_dir = *e_model;
            if (e_mode) cfg.mode = *e_mode;
            if (e_corpus) cfg.corpus_dir = *e_corpus;
            return detail::cmd_evaluate(cfg, e_model2, e_mode2, e_manifest, e_json_out, e_k, out, err);
        }
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const TrainError& e) {
        err << "training error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace treecat::cli
