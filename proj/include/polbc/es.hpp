#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "polbc/baselines.hpp"
#include "polbc/dataset.hpp"
#include "polbc/gather.hpp"
#include "polbc/learning_curve.hpp"
#include "polbc/point_world.hpp"
#include "polbc/policies.hpp"
#include "polbc/supervector.hpp"

namespace polbc {

enum class EsMode { Es, NsrEs };
enum class BcKind { Terminal, Gaussian, Supervector };

inline BcKind bc_from_string(const std::string& s) {
    if (s == "terminal") return BcKind::Terminal;
    if (s == "gaussian") return BcKind::Gaussian;
    if (s == "supervector") return BcKind::Supervector;
    throw std::invalid_argument("unknown BC kind: " + s);
}

struct EsConfig {
    EsMode mode = EsMode::Es;
    BcKind bc = BcKind::Supervector;
    std::size_t population = 3;
    std::size_t bc_episodes = 5;
    std::size_t pairs_per_update = 50; // mirrored, ~100 episodes per update
    double sigma = 0.1;
    double step_size = 0.1;
    std::size_t novelty_k = 10;
    std::size_t generations = 120;
    double novelty_weight = 0.7; // ES mode forces 0
    std::size_t supervector_components = 4;
    double relevance = 16.0;
    // Per-generation UBM refits dominate the runtime, so the fit data and the
    // per-archive-entry adaptation data are subsampled and EM is truncated.
    std::size_t ubm_sample_cap = 2000;
    std::size_t em_iters = 20;
    std::size_t archive_states_cap = 100;
    std::size_t archive_pool_cap = 64; // archive entries re-adapted per refit

    double effective_novelty_weight() const {
        return mode == EsMode::Es ? 0.0 : novelty_weight;
    }

    void validate() const {
        if (population < 1 || pairs_per_update < 1 || bc_episodes < 1 || generations < 1)
            throw std::invalid_argument("EsConfig: counts must be >= 1");
    }
};

// Mean final-state coordinates over bc_episodes episodes.
inline Vec terminal_state_bc(const AnglePolicy& policy, PointWorld& env, std::size_t episodes,
                             Rng& rng) {
    Vec acc(env.observation_dim(), 0.0);
    for (std::size_t m = 0; m < episodes; ++m) {
        Vec state = env.reset(rng);
        bool done = false;
        while (!done) {
            auto res = env.step(policy.sample(state, rng), rng);
            state = res.state;
            done = res.done;
        }
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += state[j];
    }
    for (double& v : acc) v /= static_cast<double>(episodes);
    return acc;
}

namespace detail {

// Behaviour descriptor: the raw states are kept so supervector novelty can
// re-adapt against each generation's UBM; the Gaussian fit is cached.
struct BcEntry {
    GaussianBc gaussian;
    StateDataset states;
    StateDataset sv_states; // subsampled once, reused by every UBM refit
};

// Ranks mapped to [-0.5, 0.5]; ties broken by index for determinism.
inline Vec centered_ranks(const Vec& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    Vec ranks(n, 0.0);
    if (n < 2) return ranks;
    for (std::size_t r = 0; r < n; ++r)
        ranks[order[r]] = static_cast<double>(r) / static_cast<double>(n - 1) - 0.5;
    return ranks;
}

inline double euclidean(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

// Every stride-th state, as a single synthetic episode.
inline StateDataset strided_subsample(const StateDataset& data, std::size_t cap) {
    if (data.size() <= cap) return data;
    StateDataset sub(data.dim());
    sub.begin_episode();
    double stride = static_cast<double>(data.size()) / static_cast<double>(cap);
    for (std::size_t i = 0; i < cap; ++i)
        sub.add_state(data.states()[static_cast<std::size_t>(i * stride)]);
    return sub;
}

// Mean distance to the k nearest values.
inline double knn_novelty(Vec distances, std::size_t k) {
    if (distances.empty()) return 0.0;
    std::size_t use = std::min(k, distances.size());
    std::partial_sort(distances.begin(), distances.begin() + use, distances.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < use; ++i) acc += distances[i];
    return acc / static_cast<double>(use);
}

} // namespace detail

// OpenAI-style ES with mirrored sampling and rank normalization; NSR-ES
// blends rank-normalized fitness with novelty (mean BC distance to the k
// nearest archive entries) and picks the population member to update
// proportionally to its novelty.
inline LearningCurve train_es(const PointWorld::Geometry& geom, const EsConfig& cfg,
                              std::uint64_t seed) {
    cfg.validate();
    const double novelty_weight = cfg.effective_novelty_weight();
    Rng root(seed);

    PointWorld env(geom);
    Rng eval_rng = root.split(1); // PointWorld itself is deterministic

    auto episode = [&](const AnglePolicy& policy) {
        Vec state = env.reset(eval_rng);
        double ret = 0.0;
        bool done = false;
        while (!done) {
            auto res = env.step(policy.sample(state, eval_rng), eval_rng);
            ret += res.reward;
            state = res.state;
            done = res.done;
        }
        return std::pair<double, Vec>(ret, state);
    };

    // K parameter populations.
    std::vector<Vec> members;
    AnglePolicy proto;
    {
        Rng init_rng = root.split(2);
        for (std::size_t k = 0; k < cfg.population; ++k) {
            AnglePolicy p(env.observation_dim(), init_rng);
            if (k == 0) proto = p;
            members.push_back(p.flat_params());
        }
    }
    auto as_policy = [&](const Vec& params) {
        AnglePolicy p = proto;
        p.set_flat_params(params);
        return p;
    };

    auto collect_bc_data = [&](const AnglePolicy& policy, Rng& rng) {
        return gather_data(env, policy, cfg.bc_episodes, rng);
    };

    auto make_entry = [&](StateDataset data) {
        detail::BcEntry entry;
        entry.states = std::move(data);
        if (cfg.bc == BcKind::Gaussian) entry.gaussian = fit_gaussian_bc(entry.states);
        if (cfg.bc == BcKind::Supervector)
            entry.sv_states = detail::strided_subsample(entry.states, cfg.archive_states_cap);
        return entry;
    };

    std::vector<detail::BcEntry> archive;
    std::vector<std::size_t> member_bc; // archive index of each member's latest BC
    {
        Rng bc_rng = root.split(3);
        for (std::size_t k = 0; k < cfg.population; ++k) {
            archive.push_back(make_entry(collect_bc_data(as_policy(members[k]), bc_rng)));
            member_bc.push_back(archive.size() - 1);
        }
    }

    auto terminal_of = [&](const StateDataset& data) {
        // Mean last-recorded state per episode.
        Vec acc(data.dim(), 0.0);
        std::size_t idx = 0;
        for (std::size_t e = 0; e < data.episode_count(); ++e) {
            idx += data.episode_lengths()[e];
            const Vec& last = data.states()[idx - 1];
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += last[j];
        }
        for (double& v : acc) v /= static_cast<double>(data.episode_count());
        return acc;
    };

    // Pairwise BC distance under the current generation's shared UBM (only
    // used for the supervector kind).
    auto novelty_scores = [&](const std::vector<StateDataset>& queries, Rng& rng) {
        Vec out(queries.size(), 0.0);
        if (cfg.bc == BcKind::Terminal) {
            std::vector<Vec> archive_terms;
            for (const auto& e : archive) archive_terms.push_back(terminal_of(e.states));
            for (std::size_t q = 0; q < queries.size(); ++q) {
                Vec term = terminal_of(queries[q]);
                Vec dists;
                for (const Vec& at : archive_terms) dists.push_back(detail::euclidean(term, at));
                out[q] = detail::knn_novelty(std::move(dists), cfg.novelty_k);
            }
            return out;
        }
        if (cfg.bc == BcKind::Gaussian) {
            for (std::size_t q = 0; q < queries.size(); ++q) {
                GaussianBc g = fit_gaussian_bc(queries[q]);
                Vec dists;
                for (const auto& e : archive)
                    dists.push_back(gaussian_symmetric_kl(g, e.gaussian));
                out[q] = detail::knn_novelty(std::move(dists), cfg.novelty_k);
            }
            return out;
        }
        // Supervector: one UBM per generation on pooled (subsampled) data
        // from the queries and the archive, then cheap adapted-mean
        // distances.
        // Every UBM refit re-adapts the archive, so novelty works against a
        // strided subset once the archive outgrows the pool cap.
        std::vector<const detail::BcEntry*> pool;
        if (archive.size() <= cfg.archive_pool_cap) {
            for (const auto& e : archive) pool.push_back(&e);
        } else {
            double stride = static_cast<double>(archive.size()) /
                            static_cast<double>(cfg.archive_pool_cap);
            for (std::size_t i = 0; i < cfg.archive_pool_cap; ++i)
                pool.push_back(&archive[static_cast<std::size_t>(i * stride)]);
        }

        StateDataset pooled(queries.front().dim());
        for (const auto& q : queries) pooled.append(q);
        for (const auto* e : pool) pooled.append(e->sv_states);
        StateDataset ubm_data = detail::strided_subsample(pooled, cfg.ubm_sample_cap);
        Rng em_rng = rng.split(77);
        DiagGmm ubm = em_fit(ubm_data, cfg.supervector_components, em_rng, kEmTolerance,
                             cfg.em_iters);
        std::vector<Supervector> query_svs;
        for (const auto& q : queries) query_svs.push_back(map_adapt(ubm, q, cfg.relevance));
        std::vector<Supervector> archive_svs;
        for (const auto* e : pool)
            archive_svs.push_back(map_adapt(ubm, e->sv_states, cfg.relevance));
        for (std::size_t q = 0; q < queries.size(); ++q) {
            Vec dists;
            for (const auto& asv : archive_svs)
                dists.push_back(kl_upper_bound(query_svs[q], asv, ubm));
            out[q] = detail::knn_novelty(std::move(dists), cfg.novelty_k);
        }
        return out;
    };

    LearningCurve curve;
    curve.seed = seed;

    double best_so_far = -1e300;

    for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
        Rng gen_rng = root.split(1000 + gen);

        // Pick the member to update.
        std::size_t target;
        if (novelty_weight <= 0.0) {
            target = gen % cfg.population;
        } else {
            std::vector<StateDataset> member_data;
            for (std::size_t k = 0; k < cfg.population; ++k)
                member_data.push_back(archive[member_bc[k]].states);
            Rng sel_nov_rng = gen_rng.split(1);
            Vec nov = novelty_scores(member_data, sel_nov_rng);
            double total = 0.0;
            for (double v : nov) total += v;
            Rng sel_rng = gen_rng.split(2);
            if (total <= 0.0) {
                target = sel_rng.uniform_int(cfg.population);
            } else {
                double u = sel_rng.uniform() * total;
                double acc = 0.0;
                target = cfg.population - 1;
                for (std::size_t k = 0; k < cfg.population; ++k) {
                    acc += nov[k];
                    if (u < acc) {
                        target = k;
                        break;
                    }
                }
            }
        }

        // Mirrored perturbations.
        const std::size_t dim = members[target].size();
        Rng pert_rng = gen_rng.split(3);
        std::vector<Vec> noise(cfg.pairs_per_update, Vec(dim));
        for (auto& eps : noise)
            for (double& v : eps) v = pert_rng.normal();

        const std::size_t candidates = 2 * cfg.pairs_per_update;
        Vec fitness(candidates);
        std::vector<StateDataset> cand_data;
        cand_data.reserve(candidates);
        for (std::size_t p = 0; p < cfg.pairs_per_update; ++p) {
            for (int sign : {+1, -1}) {
                Vec params = members[target];
                for (std::size_t i = 0; i < dim; ++i)
                    params[i] += sign * cfg.sigma * noise[p][i];
                AnglePolicy cand = as_policy(params);
                Rng cand_rng = gen_rng.split(100 + 2 * p + (sign < 0 ? 1 : 0));
                StateDataset data = gather_data(env, cand, 1, cand_rng);
                fitness[2 * p + (sign < 0 ? 1 : 0)] = data.mean_return();
                if (!std::isfinite(fitness[2 * p + (sign < 0 ? 1 : 0)]))
                    throw std::runtime_error("train_es: non-finite fitness");
                cand_data.push_back(std::move(data));
            }
        }

        Vec score = detail::centered_ranks(fitness);
        if (novelty_weight > 0.0) {
            Rng nov_rng = gen_rng.split(4);
            Vec nov_rank = detail::centered_ranks(novelty_scores(cand_data, nov_rng));
            for (std::size_t i = 0; i < candidates; ++i)
                score[i] = (1.0 - novelty_weight) * score[i] + novelty_weight * nov_rank[i];
        }

        // theta += alpha / (n * sigma) * sum_i score_i * eps_i, mirrored.
        Vec grad(dim, 0.0);
        for (std::size_t p = 0; p < cfg.pairs_per_update; ++p) {
            double w = score[2 * p] - score[2 * p + 1];
            for (std::size_t i = 0; i < dim; ++i) grad[i] += w * noise[p][i];
        }
        double scale = cfg.step_size / (static_cast<double>(candidates) * cfg.sigma);
        for (std::size_t i = 0; i < dim; ++i) members[target][i] += scale * grad[i];

        // Archive upkeep: the updated member's BC.
        Rng bc_rng = gen_rng.split(5);
        archive.push_back(make_entry(collect_bc_data(as_policy(members[target]), bc_rng)));
        member_bc[target] = archive.size() - 1;

        // Learning curve: population mean return, plus the best return found
        // so far by any member (novelty search keeps exploring past good
        // solutions, so the best-found policy is what the run delivers).
        double sum = 0.0;
        for (std::size_t k = 0; k < cfg.population; ++k) {
            double r = episode(as_policy(members[k])).first;
            sum += r;
            best_so_far = std::max(best_so_far, r);
        }
        curve.mean_returns.push_back(sum / static_cast<double>(cfg.population));
        curve.aux.push_back(best_so_far);
    }
    return curve;
}

} // namespace polbc
