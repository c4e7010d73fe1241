#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "polbc/dataset.hpp"
#include "polbc/io.hpp"
#include "polbc/math.hpp"
#include "polbc/rng.hpp"

namespace polbc {

constexpr double kVarianceFloor = 1e-6;
constexpr double kEmTolerance = 1e-6;
constexpr std::size_t kEmMaxIters = 200;
constexpr std::size_t kKmeansMaxIters = 50;

// Diagonal-covariance Gaussian mixture.
class DiagGmm {
public:
    DiagGmm() = default;
    DiagGmm(Vec weights, std::vector<Vec> means, std::vector<Vec> variances)
        : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
        validate();
    }

    std::size_t components() const { return weights_.size(); }
    std::size_t dim() const { return means_.empty() ? 0 : means_.front().size(); }
    const Vec& weights() const { return weights_; }
    const std::vector<Vec>& means() const { return means_; }
    const std::vector<Vec>& variances() const { return variances_; }

    // log N(s; mu_k, sigma2_k), diagonal covariance.
    double component_log_density(std::size_t k, const Vec& s) const {
        const Vec& mu = means_[k];
        const Vec& var = variances_[k];
        double acc = -0.5 * static_cast<double>(s.size()) * std::log(2.0 * M_PI);
        for (std::size_t j = 0; j < s.size(); ++j) {
            double diff = s[j] - mu[j];
            acc -= 0.5 * (std::log(var[j]) + diff * diff / var[j]);
        }
        return acc;
    }

    // log(w_k N_k(s)) for all k.
    Vec weighted_log_densities(const Vec& s) const {
        if (s.size() != dim()) throw std::invalid_argument("DiagGmm: state dimension mismatch");
        Vec out(components());
        for (std::size_t k = 0; k < components(); ++k)
            out[k] = std::log(weights_[k]) + component_log_density(k, s);
        return out;
    }

    double log_density(const Vec& s) const { return log_sum_exp(weighted_log_densities(s)); }

    // Posterior p(k | s), computed in the log domain.
    Vec responsibilities(const Vec& s) const {
        Vec logp = weighted_log_densities(s);
        double lse = log_sum_exp(logp);
        for (double& v : logp) v = std::exp(v - lse);
        return logp;
    }

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["type"] = "diag_gmm";
        j["k"] = components();
        j["d"] = dim();
        j["weights"] = weights_;
        j["means"] = means_;
        j["variances"] = variances_;
        return j.dump(2);
    }

    static DiagGmm from_json(const std::string& text) {
        auto j = nlohmann::json::parse(text);
        if (j.at("type") != "diag_gmm") throw std::runtime_error("DiagGmm: wrong document type");
        return DiagGmm(j.at("weights").get<Vec>(), j.at("means").get<std::vector<Vec>>(),
                       j.at("variances").get<std::vector<Vec>>());
    }

    // Content hash binding supervectors to the UBM they were adapted from.
    std::string id() const { return hash_hex(fnv1a_hash(to_json())); }

private:
    void validate() const {
        if (weights_.empty() || means_.size() != weights_.size() ||
            variances_.size() != weights_.size())
            throw std::invalid_argument("DiagGmm: inconsistent shapes");
        double sum = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0)) throw std::invalid_argument("DiagGmm: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("DiagGmm: weights must sum to 1");
        for (std::size_t k = 0; k < means_.size(); ++k) {
            if (means_[k].size() != means_.front().size() ||
                variances_[k].size() != means_.front().size())
                throw std::invalid_argument("DiagGmm: ragged components");
            if (!all_finite(means_[k]) || !all_finite(variances_[k]))
                throw std::invalid_argument("DiagGmm: non-finite parameters");
            for (double v : variances_[k])
                if (v < kVarianceFloor) throw std::invalid_argument("DiagGmm: variance below floor");
        }
    }

    Vec weights_;
    std::vector<Vec> means_;
    std::vector<Vec> variances_;
};

inline double mean_log_likelihood(const DiagGmm& gmm, const StateDataset& data) {
    if (data.size() == 0) throw std::invalid_argument("mean_log_likelihood: empty dataset");
    if (data.dim() != gmm.dim())
        throw std::invalid_argument("mean_log_likelihood: dimension mismatch");
    double acc = 0.0;
    for (const Vec& s : data.states()) acc += gmm.log_density(s);
    return acc / static_cast<double>(data.size());
}

// k-means++ seeding followed by Lloyd iterations.
inline std::vector<Vec> kmeans_init(const StateDataset& data, std::size_t k, Rng& rng) {
    const auto& pts = data.states();
    if (pts.size() < k) throw std::invalid_argument("kmeans_init: fewer points than clusters");
    if (k == 0) throw std::invalid_argument("kmeans_init: k must be positive");

    auto sqdist = [](const Vec& a, const Vec& b) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            double diff = a[j] - b[j];
            s += diff * diff;
        }
        return s;
    };

    std::vector<Vec> centers;
    centers.push_back(pts[rng.uniform_int(pts.size())]);
    Vec d2(pts.size());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = sqdist(pts[i], centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c)
                best = std::min(best, sqdist(pts[i], centers[c]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            // All remaining points coincide with existing centers.
            pick = rng.uniform_int(pts.size());
        } else {
            double u = rng.uniform() * total;
            double acc = 0.0;
            pick = pts.size() - 1;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                acc += d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pts[pick]);
    }

    std::vector<std::size_t> assignment(pts.size(), k);
    for (std::size_t iter = 0; iter < kKmeansMaxIters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            std::size_t best = 0;
            double bestd = sqdist(pts[i], centers[0]);
            for (std::size_t c = 1; c < k; ++c) {
                double d = sqdist(pts[i], centers[c]);
                if (d < bestd) {
                    bestd = d;
                    best = c;
                }
            }
            if (assignment[i] != best) {
                assignment[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<Vec> sums(k, Vec(data.dim(), 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = 0; j < data.dim(); ++j) sums[assignment[i]][j] += pts[i][j];
            counts[assignment[i]] += 1;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue; // keep the old center
            for (std::size_t j = 0; j < data.dim(); ++j)
                centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
        }
    }
    return centers;
}

// EM fit with variance flooring and empty-component re-seeding. Deterministic
// given (data, k, rng state).
inline DiagGmm em_fit(const StateDataset& data, std::size_t k, Rng& rng,
                      double tol = kEmTolerance, std::size_t max_iters = kEmMaxIters) {
    const auto& pts = data.states();
    const std::size_t n = pts.size();
    const std::size_t d = data.dim();
    if (n < k) throw std::invalid_argument("em_fit: fewer points than components");

    std::vector<Vec> means = kmeans_init(data, k, rng);
    Vec weights(k, 1.0 / static_cast<double>(k));
    Vec global_var(d, 0.0);
    {
        Vec gmean(d, 0.0);
        for (const Vec& s : pts)
            for (std::size_t j = 0; j < d; ++j) gmean[j] += s[j];
        for (std::size_t j = 0; j < d; ++j) gmean[j] /= static_cast<double>(n);
        for (const Vec& s : pts)
            for (std::size_t j = 0; j < d; ++j) {
                double diff = s[j] - gmean[j];
                global_var[j] += diff * diff;
            }
        for (std::size_t j = 0; j < d; ++j)
            global_var[j] = std::max(global_var[j] / static_cast<double>(n), kVarianceFloor);
    }
    std::vector<Vec> variances(k, global_var);

    auto build = [&]() { return DiagGmm(weights, means, variances); };

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        DiagGmm current = build();

        // E-step accumulators; fixed summation order over points keeps runs
        // bit-reproducible.
        Vec nk(k, 0.0);
        std::vector<Vec> sx(k, Vec(d, 0.0));
        std::vector<Vec> sxx(k, Vec(d, 0.0));
        double ll = 0.0;
        Vec point_logdens(n);
        for (std::size_t i = 0; i < n; ++i) {
            Vec logp = current.weighted_log_densities(pts[i]);
            double lse = log_sum_exp(logp);
            point_logdens[i] = lse;
            ll += lse;
            for (std::size_t c = 0; c < k; ++c) {
                double r = std::exp(logp[c] - lse);
                nk[c] += r;
                for (std::size_t j = 0; j < d; ++j) {
                    sx[c][j] += r * pts[i][j];
                    sxx[c][j] += r * pts[i][j] * pts[i][j];
                }
            }
        }
        ll /= static_cast<double>(n);

        // M-step.
        for (std::size_t c = 0; c < k; ++c) {
            if (nk[c] < 1e-8) {
                // Re-seed a starved component at the point the mixture
                // explains worst.
                std::size_t worst = 0;
                for (std::size_t i = 1; i < n; ++i)
                    if (point_logdens[i] < point_logdens[worst]) worst = i;
                means[c] = pts[worst];
                variances[c] = global_var;
                weights[c] = 1.0 / static_cast<double>(n);
                continue;
            }
            weights[c] = nk[c] / static_cast<double>(n);
            for (std::size_t j = 0; j < d; ++j) {
                double mu = sx[c][j] / nk[c];
                means[c][j] = mu;
                variances[c][j] = std::max(sxx[c][j] / nk[c] - mu * mu, kVarianceFloor);
            }
        }
        double wsum = 0.0;
        for (double w : weights) wsum += w;
        for (double& w : weights) w /= wsum;

        if (std::isfinite(prev_ll)) {
            double rel = std::abs(ll - prev_ll) / std::max(std::abs(prev_ll), 1.0);
            if (rel < tol) break;
        }
        prev_ll = ll;
    }
    return build();
}

} // namespace polbc
