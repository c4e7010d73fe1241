#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "polbc/dataset.hpp"
#include "polbc/gmm.hpp"
#include "polbc/io.hpp"

namespace polbc {

// MAP-adapted component means bound to the UBM they were adapted from.
struct Supervector {
    std::vector<Vec> means; // K x d
    std::string ubm_id;

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["type"] = "supervector";
        j["ubm_id"] = ubm_id;
        j["means"] = means;
        return j.dump(2);
    }

    static Supervector from_json(const std::string& text) {
        auto j = nlohmann::json::parse(text);
        if (j.at("type") != "supervector")
            throw std::runtime_error("Supervector: wrong document type");
        Supervector sv;
        sv.ubm_id = j.at("ubm_id").get<std::string>();
        sv.means = j.at("means").get<std::vector<Vec>>();
        return sv;
    }
};

// MAP adaptation of the UBM component means towards the policy's data.
// Components that receive no soft counts stay at the prior mean.
inline Supervector map_adapt(const DiagGmm& ubm, const StateDataset& data, double relevance) {
    if (data.size() == 0) throw std::invalid_argument("map_adapt: empty dataset");
    if (data.dim() != ubm.dim()) throw std::invalid_argument("map_adapt: dimension mismatch");
    if (relevance < 0.0) throw std::invalid_argument("map_adapt: relevance factor must be >= 0");

    const std::size_t k = ubm.components();
    const std::size_t d = ubm.dim();
    Vec nk(k, 0.0);
    std::vector<Vec> ex(k, Vec(d, 0.0));
    for (const Vec& s : data.states()) {
        Vec resp = ubm.responsibilities(s);
        for (std::size_t c = 0; c < k; ++c) {
            nk[c] += resp[c];
            for (std::size_t j = 0; j < d; ++j) ex[c][j] += resp[c] * s[j];
        }
    }

    Supervector sv;
    sv.ubm_id = ubm.id();
    sv.means.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        sv.means[c] = ubm.means()[c];
        if (nk[c] <= 0.0) continue;
        double denom = nk[c] + relevance;
        double alpha = denom > 0.0 ? nk[c] / denom : 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double e = ex[c][j] / nk[c];
            sv.means[c][j] = alpha * e + (1.0 - alpha) * ubm.means()[c][j];
        }
    }
    return sv;
}

// KL-divergence upper bound between two mean-adapted mixtures that share a
// UBM: 1/2 sum_k w_k (mu_a - mu_b)^T Sigma_k^-1 (mu_a - mu_b).
inline double kl_upper_bound(const Supervector& a, const Supervector& b, const DiagGmm& ubm) {
    if (a.ubm_id != b.ubm_id || a.ubm_id != ubm.id())
        throw std::invalid_argument("kl_upper_bound: supervectors from different UBMs");
    double acc = 0.0;
    for (std::size_t c = 0; c < ubm.components(); ++c) {
        const Vec& va = a.means[c];
        const Vec& vb = b.means[c];
        const Vec& var = ubm.variances()[c];
        double q = 0.0;
        for (std::size_t j = 0; j < va.size(); ++j) {
            double diff = va[j] - vb[j];
            q += diff * diff / var[j];
        }
        acc += ubm.weights()[c] * q;
    }
    return 0.5 * acc;
}

// Symmetric non-negative pairwise distances with named rows.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    DistanceMatrix(std::vector<std::string> ids, std::vector<Vec> values)
        : ids_(std::move(ids)), values_(std::move(values)) {
        validate();
    }

    static DistanceMatrix zeros(std::vector<std::string> ids) {
        std::size_t n = ids.size();
        return DistanceMatrix(std::move(ids), std::vector<Vec>(n, Vec(n, 0.0)));
    }

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    double at(std::size_t i, std::size_t j) const { return values_[i][j]; }
    const std::vector<Vec>& values() const { return values_; }

    void set_symmetric(std::size_t i, std::size_t j, double v) {
        if (v < 0.0) throw std::invalid_argument("DistanceMatrix: negative distance");
        values_[i][j] = v;
        values_[j][i] = v;
    }

    std::string to_csv() const {
        std::string out;
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            if (i) out += ",";
            out += ids_[i];
        }
        out += "\n";
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            for (std::size_t j = 0; j < ids_.size(); ++j) {
                if (j) out += ",";
                out += format_num(values_[i][j]);
            }
            out += "\n";
        }
        return out;
    }

    static DistanceMatrix from_csv(const std::string& text) {
        std::stringstream ss(text);
        std::string line;
        if (!std::getline(ss, line)) throw std::runtime_error("distance CSV: empty file");
        auto ids = split_csv_line(line);
        std::vector<Vec> values;
        while (std::getline(ss, line)) {
            if (line.empty()) continue;
            auto fields = split_csv_line(line);
            if (fields.size() != ids.size())
                throw std::runtime_error("distance CSV: bad row width");
            Vec row(fields.size());
            for (std::size_t j = 0; j < fields.size(); ++j) row[j] = parse_num(fields[j]);
            values.push_back(std::move(row));
        }
        return DistanceMatrix(std::move(ids), std::move(values));
    }

private:
    void validate() const {
        if (values_.size() != ids_.size())
            throw std::invalid_argument("DistanceMatrix: shape/id mismatch");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (values_[i].size() != ids_.size())
                throw std::invalid_argument("DistanceMatrix: not square");
            if (std::abs(values_[i][i]) > 1e-12)
                throw std::invalid_argument("DistanceMatrix: non-zero diagonal");
            for (std::size_t j = 0; j < values_.size(); ++j) {
                if (values_[i][j] < 0.0)
                    throw std::invalid_argument("DistanceMatrix: negative entry");
                if (std::abs(values_[i][j] - values_[j][i]) > 1e-9)
                    throw std::invalid_argument("DistanceMatrix: not symmetric");
            }
        }
    }

    std::vector<std::string> ids_;
    std::vector<Vec> values_;
};

struct SupervectorPipelineResult {
    DiagGmm ubm;
    std::vector<Supervector> supervectors;
    DistanceMatrix distances;
};

// Full pipeline: pool data, fit the UBM, adapt one supervector per dataset,
// fill the pairwise distance matrix.
inline SupervectorPipelineResult supervector_distance_matrix(
    const std::vector<StateDataset>& datasets, std::size_t components, double relevance,
    Rng& rng, const std::vector<std::string>& ids = {}) {
    if (datasets.size() < 2)
        throw std::invalid_argument("supervector_distance_matrix: need at least two datasets");

    SupervectorPipelineResult res;
    StateDataset pooled = pool_datasets(datasets);
    res.ubm = em_fit(pooled, components, rng);
    for (const auto& ds : datasets) res.supervectors.push_back(map_adapt(res.ubm, ds, relevance));

    std::vector<std::string> names = ids;
    if (names.empty())
        for (std::size_t i = 0; i < datasets.size(); ++i) names.push_back("policy" + std::to_string(i));
    res.distances = DistanceMatrix::zeros(names);
    for (std::size_t i = 0; i < datasets.size(); ++i)
        for (std::size_t j = i + 1; j < datasets.size(); ++j)
            res.distances.set_symmetric(i, j,
                kl_upper_bound(res.supervectors[i], res.supervectors[j], res.ubm));
    return res;
}

} // namespace polbc
