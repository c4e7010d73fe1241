#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "polbc/math.hpp"
#include "polbc/supervector.hpp"

namespace polbc {

// Min-max normalize the whole matrix to [0, 1]. A constant matrix maps to
// all zeros.
inline DistanceMatrix minmax_normalize(const DistanceMatrix& m) {
    if (m.size() < 2) throw std::invalid_argument("minmax_normalize: need at least 2 policies");
    double lo = m.at(0, 0), hi = m.at(0, 0);
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) {
            lo = std::min(lo, m.at(i, j));
            hi = std::max(hi, m.at(i, j));
        }
    DistanceMatrix out = DistanceMatrix::zeros(m.ids());
    if (hi - lo <= 0.0) return out;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j)
            out.set_symmetric(i, j, (m.at(i, j) - lo) / (hi - lo));
    return out;
}

// Pearson correlation between per-pair |return difference| and BC distance,
// over the upper triangle.
inline double return_correlation(const DistanceMatrix& distances, const Vec& returns) {
    const std::size_t n = distances.size();
    if (returns.size() != n || n < 3)
        throw std::invalid_argument("return_correlation: need returns for >= 3 policies");
    Vec xs, ys;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            xs.push_back(std::abs(returns[i] - returns[j]));
            ys.push_back(distances.at(i, j));
        }
    double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t p = 0; p < xs.size(); ++p) {
        sxy += (xs[p] - mx) * (ys[p] - my);
        sxx += (xs[p] - mx) * (xs[p] - mx);
        syy += (ys[p] - my) * (ys[p] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0)
        throw std::invalid_argument("return_correlation: undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

// Mean relative error |d - d_truth| / d_truth over upper-triangle entries;
// zero-truth entries are excluded.
inline double distance_error(const DistanceMatrix& predicted, const DistanceMatrix& truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("distance_error: shape mismatch");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t j = i + 1; j < truth.size(); ++j) {
            if (truth.at(i, j) <= 0.0) continue;
            acc += std::abs(predicted.at(i, j) - truth.at(i, j)) / truth.at(i, j);
            count += 1;
        }
    if (count == 0) throw std::invalid_argument("distance_error: no usable entries");
    return acc / static_cast<double>(count);
}

// Mean over upper-triangle entries of sigma/mu across repetitions
// (population sigma); zero-mean entries are excluded.
inline double coefficient_of_variation(const std::vector<DistanceMatrix>& matrices) {
    if (matrices.size() < 2)
        throw std::invalid_argument("coefficient_of_variation: need >= 2 repetitions");
    const std::size_t n = matrices.front().size();
    for (const auto& m : matrices)
        if (m.size() != n) throw std::invalid_argument("coefficient_of_variation: shape mismatch");
    double acc = 0.0;
    std::size_t count = 0;
    Vec entry(matrices.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            for (std::size_t r = 0; r < matrices.size(); ++r) entry[r] = matrices[r].at(i, j);
            double mu = mean(entry);
            if (mu <= 0.0) continue;
            acc += std::sqrt(variance(entry)) / mu;
            count += 1;
        }
    if (count == 0) throw std::invalid_argument("coefficient_of_variation: no usable entries");
    return acc / static_cast<double>(count);
}

struct MetricReport {
    double correlation = 0.0;
    double mean_relative_distance_error = 0.0;
    double mean_cv = 0.0;
    std::size_t trajectory_count = 0;
    std::size_t repetition_count = 0;

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["type"] = "metric_report";
        j["correlation"] = correlation;
        j["mean_relative_distance_error"] = mean_relative_distance_error;
        j["mean_cv"] = mean_cv;
        j["trajectory_count"] = trajectory_count;
        j["repetition_count"] = repetition_count;
        return j.dump(2);
    }
};

} // namespace polbc
