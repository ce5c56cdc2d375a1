// Run configuration: every knob has a default, a key in the `key = value`
// config file format, and a matching CLI flag. Unknown keys are rejected.
#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "treecat/common.hpp"
#include "treecat/embedding.hpp"
#include "treecat/graph.hpp"
#include "treecat/mlp.hpp"
#include "treecat/pathfinder.hpp"
#include "treecat/textpipe.hpp"
#include "treecat/trainer.hpp"

namespace treecat {

struct RunConfig {
    // paths
    std::string taxonomy = "taxonomy.txt";
    std::string corpus_dir = "corpus";
    std::string model_dir = "model";
    std::string snapshot = "snapshot.txt";
    std::string docstore = "docs";
    std::string stoplist;  // empty = built-in default list

    // feature pipeline
    std::string mode = "bow_d2v";
    size_t max_terms = 20000;
    int cap_per_class = 0;  // 0 = auto (smallest per-child count, clamped to 500)

    // splits / cross-validation
    double split_ratio = 0.95;
    int cv_folds = 5;

    // network training
    std::string hidden = "256";  // comma-separated layer widths
    int epochs = 30;
    int batch = 32;
    double lr = 1e-3;

    // document embedder
    int embed_dim = 300;
    int embed_epochs = 20;
    int embed_negative = 5;
    double embed_lr = 0.025;
    double embed_lr_min = 1e-4;
    int embed_min_count = 2;
    int embed_infer_steps = 50;

    // inference
    double threshold = 0.7;
    int top_k = 3;
    int fallback_children = 2;
    bool second_iteration = true;
    bool leaf_match_only = false;

    // corpus construction
    int quota = 500;
    std::string edge_weight = "one_minus_cos";

    uint64_t seed = 42;
    int jobs = 1;

    void set(const std::string& key, const std::string& value) {
        if (key == "taxonomy") taxonomy = value;
        else if (key == "corpus_dir") corpus_dir = value;
        else if (key == "model_dir") model_dir = value;
        else if (key == "snapshot") snapshot = value;
        else if (key == "docstore") docstore = value;
        else if (key == "stoplist") stoplist = value;
        else if (key == "mode") mode = value;
        else if (key == "max_terms") max_terms = static_cast<size_t>(parse_int(value));
        else if (key == "cap_per_class") cap_per_class = static_cast<int>(parse_int(value));
        else if (key == "split_ratio") split_ratio = parse_double(value);
        else if (key == "cv_folds") cv_folds = static_cast<int>(parse_int(value));
        else if (key == "hidden") hidden = value;
        else if (key == "epochs") epochs = static_cast<int>(parse_int(value));
        else if (key == "batch") batch = static_cast<int>(parse_int(value));
        else if (key == "lr") lr = parse_double(value);
        else if (key == "embed_dim") embed_dim = static_cast<int>(parse_int(value));
        else if (key == "embed_epochs") embed_epochs = static_cast<int>(parse_int(value));
        else if (key == "embed_negative") embed_negative = static_cast<int>(parse_int(value));
        else if (key == "embed_lr") embed_lr = parse_double(value);
        else if (key == "embed_lr_min") embed_lr_min = parse_double(value);
        else if (key == "embed_min_count") embed_min_count = static_cast<int>(parse_int(value));
        else if (key == "embed_infer_steps") embed_infer_steps = static_cast<int>(parse_int(value));
        else if (key == "threshold") threshold = parse_double(value);
        else if (key == "top_k") top_k = static_cast<int>(parse_int(value));
        else if (key == "fallback_children") fallback_children = static_cast<int>(parse_int(value));
        else if (key == "second_iteration") second_iteration = parse_bool(value);
        else if (key == "leaf_match_only") leaf_match_only = parse_bool(value);
        else if (key == "quota") quota = static_cast<int>(parse_int(value));
        else if (key == "edge_weight") edge_weight = value;
        else if (key == "seed") seed = static_cast<uint64_t>(parse_int(value));
        else if (key == "jobs") jobs = static_cast<int>(parse_int(value));
        else throw UsageError("unknown config key '" + key + "'");
    }

    static bool parse_bool(const std::string& v) {
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw UsageError("bad boolean value '" + v + "'");
    }

    /// `key = value` lines; '#' starts a comment.
    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file: " + path.string());
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto body = trim(line);
            if (body.empty() || body.front() == '#') continue;
            size_t eq = body.find('=');
            if (eq == std::string_view::npos)
                throw UsageError("config parse error at " + path.string() + ":" + std::to_string(lineno) +
                                 " (expected 'key = value')");
            std::string key(trim(body.substr(0, eq)));
            std::string value(trim(body.substr(eq + 1)));
            set(key, value);
        }
    }

    std::vector<int> hidden_layers() const {
        std::vector<int> out;
        for (const auto& part : split(hidden, ',')) {
            auto p = trim(part);
            if (p.empty()) continue;
            out.push_back(static_cast<int>(parse_int(p)));
        }
        return out;
    }

    FeatureMode feature_mode() const { return feature_mode_from_string(mode); }

    Stoplist make_stoplist() const {
        return stoplist.empty() ? Stoplist::defaults() : Stoplist::load(stoplist);
    }

    TrainParams train_params() const {
        TrainParams tp;
        tp.fit.epochs = epochs;
        tp.fit.batch_size = batch;
        tp.fit.learning_rate = lr;
        tp.hidden = hidden_layers();
        tp.k_folds = cv_folds;
        tp.max_terms = max_terms;
        if (cap_per_class > 0) tp.cap_per_class = cap_per_class;
        tp.seed = seed;
        tp.jobs = jobs;
        tp.embed.dim = embed_dim;
        tp.embed.epochs = embed_epochs;
        tp.embed.negative = embed_negative;
        tp.embed.lr_start = embed_lr;
        tp.embed.lr_min = embed_lr_min;
        tp.embed.min_count = embed_min_count;
        tp.embed.infer_steps = embed_infer_steps;
        return tp;
    }

    InferenceConfig inference_config() const {
        InferenceConfig ic;
        ic.threshold = threshold;
        ic.top_k_paths = top_k;
        ic.fallback_children = fallback_children;
        ic.second_iteration = second_iteration;
        return ic;
    }

    /// Serialized `key = value` form; reloadable via load_file, stored in every
    /// model bundle so a training run can be reproduced from its snapshot.
    std::string serialize() const {
        std::string o;
        auto kv = [&](const std::string& k, const std::string& v) { o += k + " = " + v + "\n"; };
        kv("taxonomy", taxonomy);
        kv("corpus_dir", corpus_dir);
        kv("model_dir", model_dir);
        kv("snapshot", snapshot);
        kv("docstore", docstore);
        kv("stoplist", stoplist);
        kv("mode", mode);
        kv("max_terms", std::to_string(max_terms));
        kv("cap_per_class", std::to_string(cap_per_class));
        kv("split_ratio", format_double(split_ratio));
        kv("cv_folds", std::to_string(cv_folds));
        kv("hidden", hidden);
        kv("epochs", std::to_string(epochs));
        kv("batch", std::to_string(batch));
        kv("lr", format_double(lr));
        kv("embed_dim", std::to_string(embed_dim));
        kv("embed_epochs", std::to_string(embed_epochs));
        kv("embed_negative", std::to_string(embed_negative));
        kv("embed_lr", format_double(embed_lr));
        kv("embed_lr_min", format_double(embed_lr_min));
        kv("embed_min_count", std::to_string(embed_min_count));
        kv("embed_infer_steps", std::to_string(embed_infer_steps));
        kv("threshold", format_double(threshold));
        kv("top_k", std::to_string(top_k));
        kv("fallback_children", std::to_string(fallback_children));
        kv("second_iteration", second_iteration ? "true" : "false");
        kv("leaf_match_only", leaf_match_only ? "true" : "false");
        kv("quota", std::to_string(quota));
        kv("edge_weight", edge_weight);
        kv("seed", std::to_string(seed));
        kv("jobs", std::to_string(jobs));
        return o;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        for (const auto& line : split(serialize(), '\n')) {
            if (line.empty()) continue;
            size_t eq = line.find(" = ");
            j[line.substr(0, eq)] = line.substr(eq + 3);
        }
        return j;
    }
};

}  // namespace treecat
