// Feed-forward softmax classifier trained with minibatch cross-entropy descent.
//
// Everything here is deterministic: Glorot-uniform init from a pinned RNG
// stream, fixed shuffle order, fixed accumulation order. Two runs with the
// same data and seed produce bit-identical parameters.
#pragma once

#include <cmath>
#include <cstring>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "treecat/common.hpp"

namespace treecat {

struct NetworkSpec {
    int input_dim = 1;
    std::vector<int> hidden_layers{256};  // empty list = plain softmax regression
    int output_dim = 2;
    uint64_t seed = 0;

    void validate() const {
        if (input_dim < 1) throw DataError("network spec: input_dim must be >= 1");
        if (output_dim < 2) throw DataError("network spec: output_dim must be >= 2");
        for (int h : hidden_layers)
            if (h < 1) throw DataError("network spec: hidden layer sizes must be >= 1");
    }

    /// [input_dim, hidden..., output_dim]
    std::vector<int> layer_dims() const {
        std::vector<int> dims{input_dim};
        dims.insert(dims.end(), hidden_layers.begin(), hidden_layers.end());
        dims.push_back(output_dim);
        return dims;
    }

    long long parameter_count() const {
        auto dims = layer_dims();
        long long n = 0;
        for (size_t l = 0; l + 1 < dims.size(); ++l)
            n += static_cast<long long>(dims[l]) * dims[l + 1] + dims[l + 1];
        return n;
    }
};

struct FitParams {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 0;
};

struct FitResult {
    double training_accuracy = 0.0;
    std::vector<double> epoch_loss;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalMetrics {
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<int>> confusion;  // rows = true class, cols = predicted
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

class Network {
public:
    struct Gradients {
        std::vector<std::vector<double>> weights;
        std::vector<std::vector<double>> biases;
    };

    static Network init(const NetworkSpec& spec) {
        spec.validate();
        Network net;
        net.spec_ = spec;
        net.dims_ = spec.layer_dims();
        Rng rng(spec.seed, "mlp_init");
        for (size_t l = 0; l + 1 < net.dims_.size(); ++l) {
            int in = net.dims_[l], out = net.dims_[l + 1];
            double bound = std::sqrt(6.0 / (in + out));
            std::vector<double> w(static_cast<size_t>(in) * out);
            for (auto& x : w) x = rng.uniform(-bound, bound);
            net.weights_.push_back(std::move(w));
            net.biases_.emplace_back(static_cast<size_t>(out), 0.0);
        }
        return net;
    }

    const NetworkSpec& spec() const { return spec_; }
    size_t layer_count() const { return weights_.size(); }
    // weights are row-major: weight from input i to output j at [i*out + j]
    std::vector<double>& weight_data(size_t l) { return weights_.at(l); }
    std::vector<double>& bias_data(size_t l) { return biases_.at(l); }
    const std::vector<double>& weight_data(size_t l) const { return weights_.at(l); }
    const std::vector<double>& bias_data(size_t l) const { return biases_.at(l); }

    /// Softmax class probabilities for one input.
    std::vector<double> forward(std::span<const double> x) const {
        check_input(x);
        std::vector<double> act(x.begin(), x.end());
        for (size_t l = 0; l < weights_.size(); ++l) {
            act = affine(l, act);
            if (l + 1 < weights_.size()) relu_inplace(act);
        }
        softmax_inplace(act);
        return act;
    }

    std::vector<std::vector<double>> forward_batch(const std::vector<std::vector<double>>& xs) const {
        std::vector<std::vector<double>> out;
        out.reserve(xs.size());
        for (const auto& x : xs) out.push_back(forward(x));
        return out;
    }

    int predict(std::span<const double> x) const { return argmax(forward(x)); }

    /// Ties break toward the lowest class index.
    static int argmax(std::span<const double> probs) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(probs.size()); ++i)
            if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) best = i;
        return best;
    }

    Gradients zero_gradients() const {
        Gradients g;
        for (size_t l = 0; l < weights_.size(); ++l) {
            g.weights.emplace_back(weights_[l].size(), 0.0);
            g.biases.emplace_back(biases_[l].size(), 0.0);
        }
        return g;
    }

    /// Cross-entropy loss for one sample plus d(loss)/d(parameters), accumulated
    /// into `grad`. This is the training path; the finite-difference oracle in
    /// the test suite checks it directly.
    double accumulate_loss_grad(std::span<const double> x, int label, Gradients& grad) const {
        check_input(x);
        if (label < 0 || label >= spec_.output_dim) throw DataError("label out of range");

        // forward, keeping activations per layer
        std::vector<std::vector<double>> acts;  // acts[0] = input, acts[L] = probs
        acts.emplace_back(x.begin(), x.end());
        for (size_t l = 0; l < weights_.size(); ++l) {
            auto z = affine(l, acts.back());
            if (l + 1 < weights_.size()) relu_inplace(z);
            acts.push_back(std::move(z));
        }
        softmax_inplace(acts.back());
        double loss = -std::log(acts.back()[static_cast<size_t>(label)]);

        // delta at the output: probs - onehot
        std::vector<double> delta = acts.back();
        delta[static_cast<size_t>(label)] -= 1.0;

        for (size_t l = weights_.size(); l-- > 0;) {
            const auto& a_in = acts[l];
            int in = dims_[l], out = dims_[l + 1];
            auto& gw = grad.weights[l];
            auto& gb = grad.biases[l];
            for (int j = 0; j < out; ++j) gb[static_cast<size_t>(j)] += delta[static_cast<size_t>(j)];
            for (int i = 0; i < in; ++i) {
                double ai = a_in[static_cast<size_t>(i)];
                if (ai != 0.0) {
                    double* gw_row = gw.data() + static_cast<size_t>(i) * out;
                    for (int j = 0; j < out; ++j) gw_row[j] += ai * delta[static_cast<size_t>(j)];
                }
            }
            if (l > 0) {
                std::vector<double> prev(static_cast<size_t>(in), 0.0);
                for (int i = 0; i < in; ++i) {
                    if (a_in[static_cast<size_t>(i)] <= 0.0) continue;  // relu gate
                    const double* w_row = weights_[l].data() + static_cast<size_t>(i) * out;
                    double s = 0.0;
                    for (int j = 0; j < out; ++j) s += w_row[j] * delta[static_cast<size_t>(j)];
                    prev[static_cast<size_t>(i)] = s;
                }
                delta = std::move(prev);
            }
        }
        return loss;
    }

    /// Minibatch Adam on cross-entropy. Aborts with a diagnostic if the loss
    /// turns non-finite (divergence).
    FitResult fit(const std::vector<std::vector<double>>& X, const std::vector<int>& y, const FitParams& p) {
        if (X.empty() || X.size() != y.size()) throw DataError("fit: empty dataset or size mismatch");
        std::vector<bool> present(static_cast<size_t>(spec_.output_dim), false);
        for (int label : y) {
            if (label < 0 || label >= spec_.output_dim) throw DataError("fit: label out of range");
            present[static_cast<size_t>(label)] = true;
        }
        if (std::count(present.begin(), present.end(), true) < 2)
            throw DataError("fit: need at least 2 classes present in the data");

        Gradients m = zero_gradients(), v = zero_gradients();
        Rng rng(p.seed, "mlp_shuffle");
        std::vector<int> order(X.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

        FitResult res;
        long long t = 0;
        for (int epoch = 0; epoch < p.epochs; ++epoch) {
            rng.shuffle(order);
            double epoch_loss = 0.0;
            for (size_t start = 0; start < order.size(); start += static_cast<size_t>(p.batch_size)) {
                size_t end = std::min(order.size(), start + static_cast<size_t>(p.batch_size));
                Gradients g = zero_gradients();
                double batch_loss = 0.0;
                for (size_t k = start; k < end; ++k) {
                    int i = order[k];
                    batch_loss += accumulate_loss_grad(X[static_cast<size_t>(i)], y[static_cast<size_t>(i)], g);
                }
                double inv = 1.0 / static_cast<double>(end - start);
                if (!std::isfinite(batch_loss))
                    throw TrainError("fit diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch starting " + std::to_string(start));
                ++t;
                double corr1 = 1.0 - std::pow(p.beta1, static_cast<double>(t));
                double corr2 = 1.0 - std::pow(p.beta2, static_cast<double>(t));
                for (size_t l = 0; l < weights_.size(); ++l) {
                    adam_update(weights_[l], g.weights[l], m.weights[l], v.weights[l], inv, corr1, corr2, p);
                    adam_update(biases_[l], g.biases[l], m.biases[l], v.biases[l], inv, corr1, corr2, p);
                }
                epoch_loss += batch_loss;
            }
            res.epoch_loss.push_back(epoch_loss / static_cast<double>(X.size()));
        }

        int correct = 0;
        for (size_t i = 0; i < X.size(); ++i)
            if (predict(X[i]) == y[i]) ++correct;
        res.training_accuracy = static_cast<double>(correct) / static_cast<double>(X.size());
        return res;
    }

    // --- persistence: versioned binary, bit-exact round trip ---

    void save(const std::filesystem::path& path) const {
        std::string buf;
        buf.append("TCNN\x01\x00\x00\x00", 8);
        append_u32(buf, static_cast<uint32_t>(dims_.size()));
        for (int d : dims_) append_u32(buf, static_cast<uint32_t>(d));
        append_u64(buf, spec_.seed);
        buf.push_back(0);  // activation id: 0 = relu
        for (size_t l = 0; l < weights_.size(); ++l) {
            append_doubles(buf, weights_[l]);
            append_doubles(buf, biases_[l]);
        }
        write_file(path, buf);
    }

    static Network load(const std::filesystem::path& path) {
        std::string buf = read_file(path);
        size_t off = 0;
        auto need = [&](size_t n) {
            if (off + n > buf.size()) throw DataError("truncated network file: " + path.string());
        };
        need(8);
        if (std::memcmp(buf.data(), "TCNN\x01\x00\x00\x00", 8) != 0)
            throw DataError("bad network file header: " + path.string());
        off = 8;
        uint32_t ndims = read_u32(buf, off, need);
        std::vector<int> dims(ndims);
        for (auto& d : dims) d = static_cast<int>(read_u32(buf, off, need));
        if (dims.size() < 2) throw DataError("bad network dims in " + path.string());
        uint64_t seed = read_u64(buf, off, need);
        need(1);
        if (buf[off++] != 0) throw DataError("unknown activation id in " + path.string());

        NetworkSpec spec;
        spec.input_dim = dims.front();
        spec.output_dim = dims.back();
        spec.hidden_layers.assign(dims.begin() + 1, dims.end() - 1);
        spec.seed = seed;
        Network net;
        net.spec_ = spec;
        net.dims_ = dims;
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            net.weights_.push_back(read_doubles(buf, off, static_cast<size_t>(dims[l]) * dims[l + 1], need));
            net.biases_.push_back(read_doubles(buf, off, static_cast<size_t>(dims[l + 1]), need));
        }
        if (off != buf.size()) throw DataError("trailing bytes in network file: " + path.string());
        return net;
    }

private:
    void check_input(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != spec_.input_dim)
            throw DataError("forward: input has " + std::to_string(x.size()) + " dims, network expects " +
                            std::to_string(spec_.input_dim));
        for (double v : x)
            if (!std::isfinite(v)) throw DataError("forward: non-finite input value");
    }

    std::vector<double> affine(size_t l, const std::vector<double>& a) const {
        int in = dims_[l], out = dims_[l + 1];
        std::vector<double> z(biases_[l]);
        const auto& w = weights_[l];
        for (int i = 0; i < in; ++i) {
            double ai = a[static_cast<size_t>(i)];
            if (ai == 0.0) continue;
            const double* w_row = w.data() + static_cast<size_t>(i) * out;
            for (int j = 0; j < out; ++j) z[static_cast<size_t>(j)] += ai * w_row[j];
        }
        return z;
    }

    static void relu_inplace(std::vector<double>& v) {
        for (auto& x : v) x = x > 0.0 ? x : 0.0;
    }

    static void softmax_inplace(std::vector<double>& v) {
        double mx = v[0];
        for (double x : v) mx = std::max(mx, x);
        double sum = 0.0;
        for (auto& x : v) {
            x = std::exp(x - mx);
            sum += x;
        }
        for (auto& x : v) x /= sum;
    }

    static void adam_update(std::vector<double>& param, const std::vector<double>& grad, std::vector<double>& m,
                            std::vector<double>& v, double grad_scale, double corr1, double corr2,
                            const FitParams& p) {
        for (size_t i = 0; i < param.size(); ++i) {
            double g = grad[i] * grad_scale;
            m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g;
            v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g * g;
            double mhat = m[i] / corr1;
            double vhat = v[i] / corr2;
            param[i] -= p.learning_rate * mhat / (std::sqrt(vhat) + p.eps);
        }
    }

    static void append_u32(std::string& buf, uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    static void append_u64(std::string& buf, uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    static void append_doubles(std::string& buf, const std::vector<double>& v) {
        size_t old = buf.size();
        buf.resize(old + v.size() * sizeof(double));
        std::memcpy(buf.data() + old, v.data(), v.size() * sizeof(double));
    }
    template <typename Need>
    static uint32_t read_u32(const std::string& buf, size_t& off, Need need) {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[off++])) << (8 * i);
        return v;
    }
    template <typename Need>
    static uint64_t read_u64(const std::string& buf, size_t& off, Need need) {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[off++])) << (8 * i);
        return v;
    }
    template <typename Need>
    static std::vector<double> read_doubles(const std::string& buf, size_t& off, size_t n, Need need) {
        need(n * sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), buf.data() + off, n * sizeof(double));
        off += n * sizeof(double);
        return v;
    }

    NetworkSpec spec_;
    std::vector<int> dims_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

/// Argmax evaluation: accuracy, per-class precision/recall/F1, confusion counts.
inline EvalMetrics evaluate(const Network& net, const std::vector<std::vector<double>>& X,
                            const std::vector<int>& y) {
    if (X.empty() || X.size() != y.size()) throw DataError("evaluate: empty dataset or size mismatch");
    int k = net.spec().output_dim;
    EvalMetrics m;
    m.confusion.assign(static_cast<size_t>(k), std::vector<int>(static_cast<size_t>(k), 0));
    int correct = 0;
    for (size_t i = 0; i < X.size(); ++i) {
        int pred = net.predict(X[i]);
        if (y[i] < 0 || y[i] >= k) throw DataError("evaluate: label out of range");
        ++m.confusion[static_cast<size_t>(y[i])][static_cast<size_t>(pred)];
        if (pred == y[i]) ++correct;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(X.size());
    m.per_class.resize(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
        long long tp = m.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
        long long actual = 0, predicted = 0;
        for (int j = 0; j < k; ++j) {
            actual += m.confusion[static_cast<size_t>(c)][static_cast<size_t>(j)];
            predicted += m.confusion[static_cast<size_t>(j)][static_cast<size_t>(c)];
        }
        ClassMetrics& cm = m.per_class[static_cast<size_t>(c)];
        cm.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        cm.recall = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
        cm.f1 = (cm.precision + cm.recall) > 0.0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                                                 : 0.0;
        m.macro_precision += cm.precision;
        m.macro_recall += cm.recall;
        m.macro_f1 += cm.f1;
    }
    m.macro_precision /= k;
    m.macro_recall /= k;
    m.macro_f1 /= k;
    return m;
}

}  // namespace treecat
