#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "polbc/math.hpp"
#include "polbc/rng.hpp"

namespace polbc {

enum class Activation { Tanh, Identity };

// Small dense feed-forward network with manual backprop.
class Mlp {
public:
    struct Layer {
        std::size_t in = 0;
        std::size_t out = 0;
        Vec weights; // row-major, out x in
        Vec bias;    // out
        Activation act = Activation::Identity;
    };

    Mlp() = default;

    // dims = {in, h1, ..., out}; hidden layers use tanh, the last layer the
    // given output activation.
    static Mlp make(const std::vector<std::size_t>& dims, Activation output_act, Rng& rng) {
        if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
        Mlp net;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            Layer layer;
            layer.in = dims[l];
            layer.out = dims[l + 1];
            layer.act = (l + 2 == dims.size()) ? output_act : Activation::Tanh;
            double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
            layer.weights.resize(layer.in * layer.out);
            for (double& w : layer.weights) w = rng.uniform(-bound, bound);
            layer.bias.assign(layer.out, 0.0);
            net.layers_.push_back(std::move(layer));
        }
        return net;
    }

    static Mlp zeros(const std::vector<std::size_t>& dims, Activation output_act) {
        Rng dummy(0);
        Mlp net = make(dims, output_act, dummy);
        for (auto& l : net.layers_) std::fill(l.weights.begin(), l.weights.end(), 0.0);
        return net;
    }

    std::size_t input_dim() const { return layers_.front().in; }
    std::size_t output_dim() const { return layers_.back().out; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    struct Cache {
        std::vector<Vec> inputs;  // input to each layer
        std::vector<Vec> preacts; // pre-activation of each layer
        Vec output;
    };

    Vec forward(const Vec& input) const {
        Cache c;
        return forward(input, c);
    }

    Vec forward(const Vec& input, Cache& cache) const {
        if (input.size() != input_dim())
            throw std::invalid_argument("Mlp::forward: input dimension mismatch");
        cache.inputs.clear();
        cache.preacts.clear();
        Vec x = input;
        for (const Layer& l : layers_) {
            cache.inputs.push_back(x);
            Vec z(l.out);
            for (std::size_t o = 0; o < l.out; ++o) {
                double s = l.bias[o];
                const double* w = &l.weights[o * l.in];
                for (std::size_t i = 0; i < l.in; ++i) s += w[i] * x[i];
                z[o] = s;
            }
            cache.preacts.push_back(z);
            if (l.act == Activation::Tanh)
                for (double& v : z) v = std::tanh(v);
            x = std::move(z);
        }
        cache.output = x;
        return x;
    }

    struct Gradients {
        std::vector<Vec> weights; // per layer, same shape as Layer::weights
        std::vector<Vec> bias;
        Vec input; // dL/dinput, occasionally useful
    };

    // Backprop dL/doutput through the cached forward pass.
    Gradients backward(const Cache& cache, const Vec& output_grad) const {
        if (output_grad.size() != output_dim())
            throw std::invalid_argument("Mlp::backward: output_grad dimension mismatch");
        Gradients g;
        g.weights.resize(layers_.size());
        g.bias.resize(layers_.size());
        Vec delta = output_grad;
        for (std::size_t li = layers_.size(); li-- > 0;) {
            const Layer& l = layers_[li];
            if (l.act == Activation::Tanh) {
                for (std::size_t o = 0; o < l.out; ++o) {
                    double t = std::tanh(cache.preacts[li][o]);
                    delta[o] *= 1.0 - t * t;
                }
            }
            g.weights[li].assign(l.in * l.out, 0.0);
            g.bias[li] = delta;
            const Vec& x = cache.inputs[li];
            for (std::size_t o = 0; o < l.out; ++o)
                for (std::size_t i = 0; i < l.in; ++i)
                    g.weights[li][o * l.in + i] = delta[o] * x[i];
            Vec prev(l.in, 0.0);
            for (std::size_t o = 0; o < l.out; ++o) {
                const double* w = &l.weights[o * l.in];
                for (std::size_t i = 0; i < l.in; ++i) prev[i] += w[i] * delta[o];
            }
            delta = std::move(prev);
        }
        g.input = std::move(delta);
        return g;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
        return n;
    }

    Vec flat_params() const {
        Vec out;
        out.reserve(param_count());
        for (const Layer& l : layers_) {
            out.insert(out.end(), l.weights.begin(), l.weights.end());
            out.insert(out.end(), l.bias.begin(), l.bias.end());
        }
        return out;
    }

    void set_flat_params(const Vec& flat) {
        if (flat.size() != param_count())
            throw std::invalid_argument("Mlp::set_flat_params: length mismatch");
        std::size_t pos = 0;
        for (Layer& l : layers_) {
            std::copy(flat.begin() + pos, flat.begin() + pos + l.weights.size(), l.weights.begin());
            pos += l.weights.size();
            std::copy(flat.begin() + pos, flat.begin() + pos + l.bias.size(), l.bias.begin());
            pos += l.bias.size();
        }
    }

    static Vec flatten(const Gradients& g) {
        Vec out;
        for (std::size_t li = 0; li < g.weights.size(); ++li) {
            out.insert(out.end(), g.weights[li].begin(), g.weights[li].end());
            out.insert(out.end(), g.bias[li].begin(), g.bias[li].end());
        }
        return out;
    }

private:
    std::vector<Layer> layers_;
};

// Adam with standard bias correction.
struct AdamState {
    Vec m;
    Vec v;
    std::uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n, double learning_rate = 1e-3)
        : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

inline void adam_step(Vec& params, const Vec& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    if (!all_finite(grads)) throw std::invalid_argument("adam_step: non-finite gradient");
    state.step += 1;
    double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        double mhat = state.m[i] / b1t;
        double vhat = state.v[i] / b2t;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

} // namespace polbc
