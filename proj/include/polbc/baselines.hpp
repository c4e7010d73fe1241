#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "polbc/dataset.hpp"
#include "polbc/mlp.hpp"
#include "polbc/supervector.hpp"

namespace polbc {

// ---------------------------------------------------------------------------
// Single diagonal Gaussian.

struct GaussianBc {
    Vec mean;
    Vec variance;

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["type"] = "gaussian_bc";
        j["mean"] = mean;
        j["variance"] = variance;
        return j.dump(2);
    }

    static GaussianBc from_json(const std::string& text) {
        auto j = nlohmann::json::parse(text);
        if (j.at("type") != "gaussian_bc") throw std::runtime_error("GaussianBc: wrong type");
        return GaussianBc{j.at("mean").get<Vec>(), j.at("variance").get<Vec>()};
    }
};

inline GaussianBc fit_gaussian_bc(const StateDataset& data) {
    if (data.size() < 2) throw std::invalid_argument("fit_gaussian_bc: need at least two states");
    const std::size_t d = data.dim();
    GaussianBc bc{Vec(d, 0.0), Vec(d, 0.0)};
    for (const Vec& s : data.states())
        for (std::size_t j = 0; j < d; ++j) bc.mean[j] += s[j];
    for (std::size_t j = 0; j < d; ++j) bc.mean[j] /= static_cast<double>(data.size());
    for (const Vec& s : data.states())
        for (std::size_t j = 0; j < d; ++j) {
            double diff = s[j] - bc.mean[j];
            bc.variance[j] += diff * diff;
        }
    for (std::size_t j = 0; j < d; ++j)
        bc.variance[j] = std::max(bc.variance[j] / static_cast<double>(data.size()), kVarianceFloor);
    return bc;
}

// KL(a||b) + KL(b||a) for diagonal Gaussians, in closed form.
inline double gaussian_symmetric_kl(const GaussianBc& a, const GaussianBc& b) {
    if (a.mean.size() != b.mean.size())
        throw std::invalid_argument("gaussian_symmetric_kl: dimension mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < a.mean.size(); ++j) {
        double diff = a.mean[j] - b.mean[j];
        // Per-dimension symmetric KL; the log-det terms cancel.
        acc += 0.5 * (a.variance[j] / b.variance[j] + b.variance[j] / a.variance[j] - 2.0) +
               0.5 * diff * diff * (1.0 / a.variance[j] + 1.0 / b.variance[j]);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// State-space discretization. Sparse storage only; a dense 10^d tensor is out
// of the question for higher-dimensional states.

struct BinEdges {
    std::vector<double> lo;  // per-dimension minimum
    std::vector<double> hi;  // per-dimension maximum
    static constexpr std::size_t kBins = 10;

    std::size_t dim() const { return lo.size(); }

    // Half-open bins, closed last bin: values at the max land in bin 9.
    std::size_t bin_of(std::size_t j, double v) const {
        double span = hi[j] - lo[j];
        if (span <= 0.0) return 0; // constant dimension: single degenerate bin
        double t = (v - lo[j]) / span * static_cast<double>(kBins);
        long b = static_cast<long>(std::floor(t));
        if (b < 0) b = 0;
        if (b >= static_cast<long>(kBins)) b = kBins - 1;
        return static_cast<std::size_t>(b);
    }

    bool operator==(const BinEdges& other) const { return lo == other.lo && hi == other.hi; }
};

inline BinEdges compute_bin_edges(const StateDataset& pooled) {
    if (pooled.size() == 0) throw std::invalid_argument("compute_bin_edges: empty data");
    const std::size_t d = pooled.dim();
    BinEdges edges;
    edges.lo = pooled.states().front();
    edges.hi = pooled.states().front();
    for (const Vec& s : pooled.states())
        for (std::size_t j = 0; j < d; ++j) {
            edges.lo[j] = std::min(edges.lo[j], s[j]);
            edges.hi[j] = std::max(edges.hi[j], s[j]);
        }
    return edges;
}

struct HistogramBc {
    BinEdges edges;
    std::map<std::vector<std::size_t>, double> cells; // cell index tuple -> probability
};

inline HistogramBc fit_histogram_bc(const StateDataset& data, const BinEdges& edges) {
    if (data.dim() != edges.dim())
        throw std::invalid_argument("fit_histogram_bc: dimension mismatch");
    if (data.size() == 0) throw std::invalid_argument("fit_histogram_bc: empty data");
    HistogramBc bc;
    bc.edges = edges;
    for (const Vec& s : data.states()) {
        std::vector<std::size_t> cell(data.dim());
        for (std::size_t j = 0; j < data.dim(); ++j) cell[j] = edges.bin_of(j, s[j]);
        bc.cells[cell] += 1.0;
    }
    for (auto& [cell, count] : bc.cells) count /= static_cast<double>(data.size());
    return bc;
}

// 1/2 sum_s |p(s) - q(s)| over occupied cells, i.e. total variation.
inline double histogram_distance(const HistogramBc& a, const HistogramBc& b) {
    if (!(a.edges == b.edges)) throw std::invalid_argument("histogram_distance: edge mismatch");
    double acc = 0.0;
    auto ia = a.cells.begin();
    auto ib = b.cells.begin();
    while (ia != a.cells.end() || ib != b.cells.end()) {
        if (ib == b.cells.end() || (ia != a.cells.end() && ia->first < ib->first)) {
            acc += ia->second;
            ++ia;
        } else if (ia == a.cells.end() || ib->first < ia->first) {
            acc += ib->second;
            ++ib;
        } else {
            acc += std::abs(ia->second - ib->second);
            ++ia;
            ++ib;
        }
    }
    return 0.5 * acc;
}

// ---------------------------------------------------------------------------
// Discriminator as a density-ratio estimator.

constexpr double kDiscriminatorLogitClip = 10.0;

struct DiscriminatorBc {
    Mlp net; // scalar output, logit clipped before the sigmoid

    double logit(const Vec& s) const {
        double v = net.forward(s)[0];
        return std::clamp(v, -kDiscriminatorLogitClip, kDiscriminatorLogitClip);
    }

    // D(s) in (sigma(-10), sigma(10)).
    double probability(const Vec& s) const { return 1.0 / (1.0 + std::exp(-logit(s))); }

    // f(s) = (1 - D(s)) / D(s) = exp(-logit).
    double density_ratio_penalty(const Vec& s) const { return std::exp(-logit(s)); }
};

struct DiscriminatorTrainConfig {
    std::size_t hidden_units = 256;
    std::size_t hidden_layers = 3;
    std::size_t epochs = 30;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    // "Others" pool is capped at this multiple of the own dataset to keep
    // classes roughly balanced.
    std::size_t max_other_ratio = 10;
};

// Train one discriminator to separate `own` states from `others`.
inline DiscriminatorBc train_discriminator(const StateDataset& own, const StateDataset& others,
                                           Rng& rng,
                                           const DiscriminatorTrainConfig& cfg = {}) {
    if (own.size() == 0 || others.size() == 0)
        throw std::invalid_argument("train_discriminator: empty dataset");
    if (own.dim() != others.dim())
        throw std::invalid_argument("train_discriminator: dimension mismatch");

    std::vector<const Vec*> pos;
    std::vector<const Vec*> neg;
    for (const Vec& s : own.states()) pos.push_back(&s);
    std::size_t neg_cap = std::min(others.size(), own.size() * cfg.max_other_ratio);
    if (neg_cap == others.size()) {
        for (const Vec& s : others.states()) neg.push_back(&s);
    } else {
        for (std::size_t i = 0; i < neg_cap; ++i)
            neg.push_back(&others.states()[rng.uniform_int(others.size())]);
    }

    std::vector<std::size_t> dims{own.dim()};
    for (std::size_t l = 0; l < cfg.hidden_layers; ++l) dims.push_back(cfg.hidden_units);
    dims.push_back(1);
    DiscriminatorBc disc;
    disc.net = Mlp::make(dims, Activation::Identity, rng);

    Vec params = disc.net.flat_params();
    AdamState adam(params.size(), cfg.learning_rate);

    const std::size_t total = pos.size() + neg.size();
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the run's RNG.
        for (std::size_t i = total; i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        for (std::size_t start = 0; start < total; start += cfg.batch_size) {
            std::size_t end = std::min(start + cfg.batch_size, total);
            Vec grad(params.size(), 0.0);
            for (std::size_t idx = start; idx < end; ++idx) {
                std::size_t pick = order[idx];
                bool is_own = pick < pos.size();
                const Vec& s = is_own ? *pos[pick] : *neg[pick - pos.size()];
                Mlp::Cache cache;
                Vec out = disc.net.forward(s, cache);
                double z = out[0];
                bool clipped = z < -kDiscriminatorLogitClip || z > kDiscriminatorLogitClip;
                double zc = std::clamp(z, -kDiscriminatorLogitClip, kDiscriminatorLogitClip);
                double p = 1.0 / (1.0 + std::exp(-zc));
                // Minimize binary cross-entropy; dL/dz = p - y, zero where
                // the clip is active.
                double dz = clipped ? 0.0 : (p - (is_own ? 1.0 : 0.0));
                if (dz != 0.0) {
                    auto g = disc.net.backward(cache, Vec{dz / static_cast<double>(end - start)});
                    Vec gf = Mlp::flatten(g);
                    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gf[i];
                }
            }
            adam_step(params, grad, adam);
            disc.net.set_flat_params(params);
        }
    }
    return disc;
}

// One discriminator per dataset (own vs pooled rest), pairwise penalties
// averaged both ways. Diagonal reported as 0.
inline DistanceMatrix discriminator_distance(const std::vector<StateDataset>& datasets, Rng& rng,
                                             const DiscriminatorTrainConfig& cfg = {},
                                             const std::vector<std::string>& ids = {}) {
    if (datasets.size() < 2)
        throw std::invalid_argument("discriminator_distance: need at least two datasets");

    std::vector<DiscriminatorBc> discs;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        StateDataset others(datasets[i].dim());
        for (std::size_t j = 0; j < datasets.size(); ++j)
            if (j != i) others.append(datasets[j]);
        Rng sub = rng.split(i);
        discs.push_back(train_discriminator(datasets[i], others, sub, cfg));
    }

    auto mean_penalty = [](const DiscriminatorBc& disc, const StateDataset& data) {
        double acc = 0.0;
        for (const Vec& s : data.states()) acc += disc.density_ratio_penalty(s);
        return acc / static_cast<double>(data.size());
    };

    std::vector<std::string> names = ids;
    if (names.empty())
        for (std::size_t i = 0; i < datasets.size(); ++i) names.push_back("policy" + std::to_string(i));
    DistanceMatrix m = DistanceMatrix::zeros(names);
    for (std::size_t i = 0; i < datasets.size(); ++i)
        for (std::size_t j = i + 1; j < datasets.size(); ++j)
            m.set_symmetric(i, j, mean_penalty(discs[i], datasets[j]) +
                                      mean_penalty(discs[j], datasets[i]));
    return m;
}

} // namespace polbc
