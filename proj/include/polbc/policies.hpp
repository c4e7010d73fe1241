#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "polbc/math.hpp"
#include "polbc/mlp.hpp"
#include "polbc/rng.hpp"

namespace polbc {

// ---------------------------------------------------------------------------
// Tabular gridworld policy: per-cell categorical over the four directions.

constexpr std::size_t kGridSize = 5;
enum GridAction : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

class TabularPolicy {
public:
    TabularPolicy() : probs_(kGridSize * kGridSize, Vec(4, 0.25)) {}

    const Vec& cell(std::size_t row, std::size_t col) const {
        return probs_[row * kGridSize + col];
    }

    void set_cell(std::size_t row, std::size_t col, const Vec& p) {
        if (p.size() != 4) throw std::invalid_argument("TabularPolicy: need 4 probabilities");
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0) throw std::invalid_argument("TabularPolicy: negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("TabularPolicy: probabilities must sum to 1");
        probs_[row * kGridSize + col] = p;
    }

    void set_deterministic(std::size_t row, std::size_t col, GridAction a) {
        Vec p(4, 0.0);
        p[a] = 1.0;
        probs_[row * kGridSize + col] = p;
    }

    std::size_t sample(std::size_t row, std::size_t col, Rng& rng) const {
        const Vec& p = cell(row, col);
        double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t a = 0; a < 4; ++a) {
            acc += p[a];
            if (u < acc) return a;
        }
        return 3;
    }

    // Adapter for the rollout loop, which passes states as (row, col) vectors.
    std::size_t sample(const Vec& state, Rng& rng) const {
        return sample(static_cast<std::size_t>(state[0]), static_cast<std::size_t>(state[1]), rng);
    }

    // Grid text format: five rows of five tokens. A token is one of U/D/L/R
    // (deterministic), '.' (uniform), or four colon-separated probabilities
    // in U:D:L:R order.
    static TabularPolicy from_text(const std::string& text) {
        TabularPolicy pol;
        std::stringstream ss(text);
        std::string token;
        for (std::size_t r = 0; r < kGridSize; ++r) {
            for (std::size_t c = 0; c < kGridSize; ++c) {
                if (!(ss >> token)) throw std::runtime_error("TabularPolicy: truncated grid text");
                if (token == "U") pol.set_deterministic(r, c, kUp);
                else if (token == "D") pol.set_deterministic(r, c, kDown);
                else if (token == "L") pol.set_deterministic(r, c, kLeft);
                else if (token == "R") pol.set_deterministic(r, c, kRight);
                else if (token == ".") pol.set_cell(r, c, Vec(4, 0.25));
                else {
                    Vec p;
                    std::stringstream ts(token);
                    std::string part;
                    while (std::getline(ts, part, ':')) p.push_back(std::stod(part));
                    pol.set_cell(r, c, p);
                }
            }
        }
        return pol;
    }

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["type"] = "tabular_policy";
        j["grid"] = kGridSize;
        Vec flat;
        for (const Vec& p : probs_) flat.insert(flat.end(), p.begin(), p.end());
        j["params"] = flat;
        return j.dump(2);
    }

    static TabularPolicy from_json(const std::string& text) {
        auto j = nlohmann::json::parse(text);
        if (j.at("type") != "tabular_policy") throw std::runtime_error("TabularPolicy: wrong type");
        Vec flat = j.at("params").get<Vec>();
        if (flat.size() != kGridSize * kGridSize * 4)
            throw std::runtime_error("TabularPolicy: bad parameter count");
        TabularPolicy pol;
        for (std::size_t i = 0; i < kGridSize * kGridSize; ++i)
            pol.probs_[i] = Vec(flat.begin() + i * 4, flat.begin() + (i + 1) * 4);
        return pol;
    }

private:
    std::vector<Vec> probs_;
};

// Sum over non-wall cells of |pi - pi_hat| across the four actions.
inline double grid_action_distance(const TabularPolicy& a, const TabularPolicy& b,
                                   const std::vector<bool>& wall_mask) {
    if (wall_mask.size() != kGridSize * kGridSize)
        throw std::invalid_argument("grid_action_distance: layout mismatch");
    double acc = 0.0;
    for (std::size_t r = 0; r < kGridSize; ++r)
        for (std::size_t c = 0; c < kGridSize; ++c) {
            if (wall_mask[r * kGridSize + c]) continue;
            for (std::size_t act = 0; act < 4; ++act)
                acc += std::abs(a.cell(r, c)[act] - b.cell(r, c)[act]);
        }
    return acc;
}

// ---------------------------------------------------------------------------
// Network policies.

// Categorical policy over N actions via a softmax head.
class SoftmaxPolicy {
public:
    SoftmaxPolicy() = default;
    SoftmaxPolicy(std::size_t state_dim, std::size_t action_count, Rng& rng)
        : net_(Mlp::make({state_dim, 16, 16, action_count}, Activation::Identity, rng)) {}

    std::size_t action_count() const { return net_.output_dim(); }
    const Mlp& net() const { return net_; }
    Mlp& net() { return net_; }

    Vec action_probs(const Vec& state) const {
        Vec logits = net_.forward(state);
        double lse = log_sum_exp(logits);
        for (double& v : logits) v = std::exp(v - lse);
        return logits;
    }

    std::size_t sample(const Vec& state, Rng& rng) const {
        Vec p = action_probs(state);
        double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t a = 0; a < p.size(); ++a) {
            acc += p[a];
            if (u < acc) return a;
        }
        return p.size() - 1;
    }

    double action_log_prob(const Vec& state, std::size_t action) const {
        if (action >= action_count())
            throw std::invalid_argument("action_log_prob: invalid action index");
        Vec logits = net_.forward(state);
        return logits[action] - log_sum_exp(logits);
    }

    // Gradient of log pi(action|state) w.r.t. the flat parameters.
    Vec log_prob_gradient(const Vec& state, std::size_t action) const {
        Mlp::Cache cache;
        Vec logits = net_.forward(state, cache);
        double lse = log_sum_exp(logits);
        Vec dlogits(logits.size());
        for (std::size_t a = 0; a < logits.size(); ++a)
            dlogits[a] = (a == action ? 1.0 : 0.0) - std::exp(logits[a] - lse);
        return Mlp::flatten(net_.backward(cache, dlogits));
    }

    Vec flat_params() const { return net_.flat_params(); }
    void set_flat_params(const Vec& v) { net_.set_flat_params(v); }

    std::string to_json() const { return net_json("softmax_policy", net_); }
    static SoftmaxPolicy from_json(const std::string& text) {
        SoftmaxPolicy p;
        p.net_ = net_from_json(text, "softmax_policy");
        return p;
    }

    static std::string net_json(const std::string& type, const Mlp& net) {
        nlohmann::ordered_json j;
        j["type"] = type;
        std::vector<std::size_t> dims{net.input_dim()};
        for (const auto& l : net.layers()) dims.push_back(l.out);
        j["dims"] = dims;
        j["params"] = net.flat_params();
        return j.dump(2);
    }

    static Mlp net_from_json(const std::string& text, const std::string& type) {
        auto j = nlohmann::json::parse(text);
        if (j.at("type") != type) throw std::runtime_error("policy JSON: wrong type");
        auto dims = j.at("dims").get<std::vector<std::size_t>>();
        Mlp net = Mlp::zeros(dims, Activation::Identity);
        net.set_flat_params(j.at("params").get<Vec>());
        return net;
    }

private:
    Mlp net_;
};

// Continuous heading policy: scalar network output mapped to [0, 2pi] via
// phi = pi * (1 + tanh(o)).
class AnglePolicy {
public:
    AnglePolicy() = default;
    AnglePolicy(std::size_t state_dim, Rng& rng)
        : net_(Mlp::make({state_dim, 16, 16, 1}, Activation::Identity, rng)) {}

    const Mlp& net() const { return net_; }
    Mlp& net() { return net_; }

    double sample(const Vec& state, Rng&) const { return angle(state); }

    double angle(const Vec& state) const {
        double o = net_.forward(state)[0];
        return M_PI * (1.0 + std::tanh(o));
    }

    Vec flat_params() const { return net_.flat_params(); }
    void set_flat_params(const Vec& v) { net_.set_flat_params(v); }

    std::string to_json() const { return SoftmaxPolicy::net_json("angle_policy", net_); }
    static AnglePolicy from_json(const std::string& text) {
        AnglePolicy p;
        p.net_ = SoftmaxPolicy::net_from_json(text, "angle_policy");
        return p;
    }

private:
    Mlp net_;
};

} // namespace polbc
