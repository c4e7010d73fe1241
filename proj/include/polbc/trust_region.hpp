#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "polbc/baselines.hpp"
#include "polbc/dangerous_path.hpp"
#include "polbc/dataset.hpp"
#include "polbc/gather.hpp"
#include "polbc/learning_curve.hpp"
#include "polbc/policies.hpp"
#include "polbc/supervector.hpp"

namespace polbc {

enum class ConstraintKind { None, MaxTv, Gaussian, Supervector };

inline ConstraintKind constraint_from_string(const std::string& s) {
    if (s == "none") return ConstraintKind::None;
    if (s == "max_tv") return ConstraintKind::MaxTv;
    if (s == "gaussian") return ConstraintKind::Gaussian;
    if (s == "supervector") return ConstraintKind::Supervector;
    throw std::invalid_argument("unknown constraint kind: " + s);
}

struct TrustRegionConfig {
    ConstraintKind constraint = ConstraintKind::None;
    double threshold = 0.0;
    std::size_t num_envs = 8;
    std::size_t samples_per_env = 512;
    std::size_t minibatches = 100;
    std::size_t minibatch_size = 64;
    // Large enough that unconstrained clip-free updates destabilize training;
    // the behavioural constraints are what keep it in check.
    double learning_rate = 1e-2;
    std::size_t probe_episodes = 5;
    double probe_noise = 1e-3;
    std::size_t supervector_components = 4;
    double relevance = 16.0;
    std::size_t iterations = 50;

    void validate() const {
        if (constraint != ConstraintKind::None && !(threshold > 0.0))
            throw std::invalid_argument("TrustRegionConfig: threshold must be > 0");
        if (num_envs < 1 || samples_per_env < 1 || minibatches < 1 || minibatch_size < 1 ||
            iterations < 1)
            throw std::invalid_argument("TrustRegionConfig: counts must be >= 1");
    }
};

// max over probed states of half the L1 gap between the two policies'
// action distributions.
inline double max_tv_divergence(const SoftmaxPolicy& old_policy, const SoftmaxPolicy& new_policy,
                                const std::vector<Vec>& states) {
    if (states.empty()) throw std::invalid_argument("max_tv_divergence: empty state set");
    double worst = 0.0;
    for (const Vec& s : states) {
        Vec p = old_policy.action_probs(s);
        Vec q = new_policy.action_probs(s);
        double tv = 0.0;
        for (std::size_t a = 0; a < p.size(); ++a) tv += std::abs(p[a] - q[a]);
        worst = std::max(worst, 0.5 * tv);
    }
    return worst;
}

struct ConstraintResult {
    bool violated = false;
    double value = 0.0;
};

// State-distribution constraints: gather fresh probe trajectories from the
// new policy, add N(0, probe_noise^2) to the states of both sides, then
// measure the Gaussian symmetric KL or the 4-component supervector distance.
inline ConstraintResult behavioural_constraint(ConstraintKind kind,
                                               const StateDataset& old_probe_noised,
                                               const SoftmaxPolicy& new_policy, DangerousPath& env,
                                               double threshold,
                                               const TrustRegionConfig& cfg, Rng& rng) {
    Rng rollout_rng = rng.split(1);
    StateDataset fresh = gather_data(env, new_policy, cfg.probe_episodes, rollout_rng);
    Rng noise_rng = rng.split(2);
    StateDataset fresh_noised = fresh.with_noise(cfg.probe_noise, noise_rng);

    double value = 0.0;
    if (kind == ConstraintKind::Gaussian) {
        value = gaussian_symmetric_kl(fit_gaussian_bc(old_probe_noised),
                                      fit_gaussian_bc(fresh_noised));
    } else if (kind == ConstraintKind::Supervector) {
        StateDataset pooled = old_probe_noised;
        pooled.append(fresh_noised);
        Rng em_rng = rng.split(3);
        DiagGmm ubm = em_fit(pooled, cfg.supervector_components, em_rng);
        Supervector a = map_adapt(ubm, old_probe_noised, cfg.relevance);
        Supervector b = map_adapt(ubm, fresh_noised, cfg.relevance);
        value = kl_upper_bound(a, b, ubm);
    } else {
        throw std::invalid_argument("behavioural_constraint: kind has no probe semantics");
    }
    return {value > threshold, value};
}

// Clip-free PPO-style training on the dangerous-path environment: unclipped
// ratio-weighted policy gradient, discount 0, reward-minus-baseline
// advantage, and a pluggable per-update behavioural constraint. On a
// violation the remaining minibatches of the iteration are skipped.
inline LearningCurve train_trust_region(std::uint64_t env_seed, const TrustRegionConfig& cfg,
                                        std::uint64_t seed) {
    cfg.validate();
    Rng root(seed);
    Rng init_rng = root.split(0);

    DangerousPath proto(env_seed);
    const std::size_t obs_dim = proto.observation_dim();
    const std::size_t actions = proto.action_count();

    SoftmaxPolicy policy(obs_dim, actions, init_rng);
    Mlp value_net = Mlp::make({obs_dim, 16, 16, 1}, Activation::Identity, init_rng);

    Vec policy_params = policy.flat_params();
    Vec value_params = value_net.flat_params();
    AdamState policy_adam(policy_params.size(), cfg.learning_rate);
    AdamState value_adam(value_params.size(), cfg.learning_rate);

    std::vector<DangerousPath> envs(cfg.num_envs, proto);
    DangerousPath probe_env(env_seed);

    LearningCurve curve;
    curve.seed = seed;

    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        Rng iter_rng = root.split(100 + iter);

        // Rollout.
        std::vector<Vec> states;
        std::vector<std::size_t> taken;
        Vec rewards;
        Vec old_log_probs;
        Vec episode_returns;
        for (std::size_t e = 0; e < cfg.num_envs; ++e) {
            Rng env_rng = iter_rng.split(e);
            Vec state = envs[e].reset(env_rng);
            double ep_return = 0.0;
            for (std::size_t t = 0; t < cfg.samples_per_env; ++t) {
                std::size_t action = policy.sample(state, env_rng);
                auto res = envs[e].step(action, env_rng);
                states.push_back(state);
                taken.push_back(action);
                rewards.push_back(res.reward);
                old_log_probs.push_back(policy.action_log_prob(state, action));
                ep_return += res.reward;
                state = res.state;
                if (res.done) {
                    episode_returns.push_back(ep_return);
                    ep_return = 0.0;
                    state = envs[e].reset(env_rng);
                }
            }
        }
        curve.mean_returns.push_back(mean(episode_returns));

        SoftmaxPolicy old_policy = policy;

        // Old-policy probe data, collected once per iteration.
        StateDataset old_probe_noised;
        if (cfg.constraint == ConstraintKind::Gaussian ||
            cfg.constraint == ConstraintKind::Supervector) {
            Rng probe_rng = iter_rng.split(1000);
            StateDataset probe = gather_data(probe_env, old_policy, cfg.probe_episodes, probe_rng);
            Rng noise_rng = iter_rng.split(1001);
            old_probe_noised = probe.with_noise(cfg.probe_noise, noise_rng);
        }

        bool stopped = false;
        Rng batch_rng = iter_rng.split(2000);
        for (std::size_t mb = 0; mb < cfg.minibatches; ++mb) {
            Vec policy_grad(policy_params.size(), 0.0);
            Vec value_grad(value_params.size(), 0.0);
            for (std::size_t b = 0; b < cfg.minibatch_size; ++b) {
                std::size_t idx = batch_rng.uniform_int(states.size());
                const Vec& s = states[idx];

                Mlp::Cache vcache;
                double baseline = value_net.forward(s, vcache)[0];
                double advantage = rewards[idx] - baseline;

                // Ascend E[ratio * A]; accumulate the negative for Adam.
                double ratio = std::exp(policy.action_log_prob(s, taken[idx]) -
                                        old_log_probs[idx]);
                Vec logp_grad = policy.log_prob_gradient(s, taken[idx]);
                double scale = -ratio * advantage / static_cast<double>(cfg.minibatch_size);
                for (std::size_t i = 0; i < policy_grad.size(); ++i)
                    policy_grad[i] += scale * logp_grad[i];

                // Value baseline: squared error to the observed reward.
                double verr = 2.0 * (baseline - rewards[idx]) /
                              static_cast<double>(cfg.minibatch_size);
                Vec vg = Mlp::flatten(value_net.backward(vcache, Vec{verr}));
                for (std::size_t i = 0; i < value_grad.size(); ++i) value_grad[i] += vg[i];
            }
            if (!all_finite(policy_grad))
                throw std::runtime_error("train_trust_region: non-finite loss gradient");
            adam_step(policy_params, policy_grad, policy_adam);
            policy.set_flat_params(policy_params);
            adam_step(value_params, value_grad, value_adam);
            value_net.set_flat_params(value_params);

            // Constraint check after every parameter update.
            if (cfg.constraint == ConstraintKind::MaxTv) {
                if (max_tv_divergence(old_policy, policy, states) > cfg.threshold) {
                    stopped = true;
                    break;
                }
            } else if (cfg.constraint == ConstraintKind::Gaussian ||
                       cfg.constraint == ConstraintKind::Supervector) {
                Rng check_rng = iter_rng.split(3000 + mb);
                auto res = behavioural_constraint(cfg.constraint, old_probe_noised, policy,
                                                  probe_env, cfg.threshold, cfg, check_rng);
                if (res.violated) {
                    stopped = true;
                    break;
                }
            }
        }
        curve.aux.push_back(stopped ? 1.0 : 0.0);
    }
    return curve;
}

} // namespace polbc
