#include "doctest.h"

#include <cmath>

#include "polbc/es.hpp"
#include "polbc/trust_region.hpp"

using namespace polbc;

namespace {

TrustRegionConfig tiny_tr_config() {
    TrustRegionConfig cfg;
    cfg.num_envs = 1;
    cfg.samples_per_env = 64;
    cfg.minibatches = 4;
    cfg.minibatch_size = 8;
    cfg.iterations = 2;
    cfg.probe_episodes = 3;
    return cfg;
}

EsConfig tiny_es_config() {
    EsConfig cfg;
    cfg.population = 2;
    cfg.pairs_per_update = 5;
    cfg.bc_episodes = 2;
    cfg.generations = 3;
    return cfg;
}

} // namespace

TEST_CASE("constraint and BC kinds parse, unknown names throw") {
    CHECK(constraint_from_string("none") == ConstraintKind::None);
    CHECK(constraint_from_string("max_tv") == ConstraintKind::MaxTv);
    CHECK(constraint_from_string("gaussian") == ConstraintKind::Gaussian);
    CHECK(constraint_from_string("supervector") == ConstraintKind::Supervector);
    CHECK_THROWS_AS(constraint_from_string("tv"), std::invalid_argument);

    CHECK(bc_from_string("terminal") == BcKind::Terminal);
    CHECK(bc_from_string("gaussian") == BcKind::Gaussian);
    CHECK(bc_from_string("supervector") == BcKind::Supervector);
    CHECK_THROWS_AS(bc_from_string("final"), std::invalid_argument);
}

TEST_CASE("config validation") {
    TrustRegionConfig tr;
    tr.constraint = ConstraintKind::MaxTv; // no threshold set
    CHECK_THROWS_AS(tr.validate(), std::invalid_argument);
    tr.threshold = 0.4;
    tr.validate();
    tr.iterations = 0;
    CHECK_THROWS_AS(tr.validate(), std::invalid_argument);

    EsConfig es;
    es.validate();
    es.population = 0;
    CHECK_THROWS_AS(es.validate(), std::invalid_argument);

    EsConfig nsr;
    nsr.mode = EsMode::NsrEs;
    nsr.novelty_weight = 0.5;
    CHECK(nsr.effective_novelty_weight() == 0.5);
    nsr.mode = EsMode::Es;
    CHECK(nsr.effective_novelty_weight() == 0.0);
}

TEST_CASE("max_tv_divergence: identity and a hand-built gap") {
    Rng rng(3);
    SoftmaxPolicy a(1, 2, rng);
    std::vector<Vec> states{{0.0}, {1.0}, {-2.0}};
    CHECK(max_tv_divergence(a, a, states) == 0.0);
    CHECK_THROWS_AS(max_tv_divergence(a, a, {}), std::invalid_argument);

    // Zero nets with fixed output biases: probabilities are softmax(bias),
    // identical at every state.
    SoftmaxPolicy p = a, q = a;
    p.set_flat_params(Vec(p.flat_params().size(), 0.0)); // (0.5, 0.5)
    q.set_flat_params(Vec(q.flat_params().size(), 0.0));
    q.net().layers().back().bias = Vec{std::log(3.0), 0.0}; // (0.75, 0.25)
    CHECK(max_tv_divergence(p, q, states) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("behavioural_constraint: self-comparison stays under a loose threshold") {
    DangerousPath env(5);
    Rng rng(1);
    SoftmaxPolicy policy(env.observation_dim(), env.action_count(), rng);
    TrustRegionConfig cfg = tiny_tr_config();

    Rng probe_rng(11);
    StateDataset probe = gather_data(env, policy, cfg.probe_episodes, probe_rng);
    Rng noise_rng(12);
    StateDataset noised = probe.with_noise(cfg.probe_noise, noise_rng);

    for (ConstraintKind kind : {ConstraintKind::Gaussian, ConstraintKind::Supervector}) {
        Rng check_rng(13);
        auto res = behavioural_constraint(kind, noised, policy, env, 100.0, cfg, check_rng);
        CHECK(!res.violated);
        CHECK(res.value >= 0.0);
        CHECK(res.value < 100.0);
        // Same seed, same verdict.
        Rng check_again(13);
        auto res2 = behavioural_constraint(kind, noised, policy, env, 100.0, cfg, check_again);
        CHECK(res2.value == res.value);
    }
    Rng check_rng(13);
    CHECK_THROWS_AS(
        behavioural_constraint(ConstraintKind::MaxTv, noised, policy, env, 1.0, cfg, check_rng),
        std::invalid_argument);
}

TEST_CASE("trust region training is deterministic and shapes its outputs") {
    TrustRegionConfig cfg = tiny_tr_config();
    LearningCurve a = train_trust_region(3, cfg, 42);
    LearningCurve b = train_trust_region(3, cfg, 42);
    CHECK(a.mean_returns == b.mean_returns);
    CHECK(a.aux == b.aux);
    CHECK(a.mean_returns.size() == cfg.iterations);
    CHECK(a.aux.size() == cfg.iterations);
    CHECK(a.seed == 42);
    for (double v : a.aux) CHECK(v == 0.0); // unconstrained never stops
    for (double v : a.mean_returns) CHECK(std::isfinite(v));

    LearningCurve c = train_trust_region(3, cfg, 43);
    CHECK(a.mean_returns != c.mean_returns);
}

TEST_CASE("a tight max_tv threshold trips the constraint stop") {
    TrustRegionConfig cfg = tiny_tr_config();
    cfg.constraint = ConstraintKind::MaxTv;
    cfg.threshold = 1e-9;
    LearningCurve curve = train_trust_region(3, cfg, 7);
    double stops = 0.0;
    for (double v : curve.aux) stops += v;
    CHECK(stops > 0.0);
}

TEST_CASE("a generous max_tv threshold never trips") {
    TrustRegionConfig cfg = tiny_tr_config();
    cfg.constraint = ConstraintKind::MaxTv;
    cfg.threshold = 1.0; // TV can never exceed 1
    LearningCurve constrained = train_trust_region(3, cfg, 42);
    TrustRegionConfig none = tiny_tr_config();
    LearningCurve free_run = train_trust_region(3, none, 42);
    for (double v : constrained.aux) CHECK(v == 0.0);
    // With no stops the trajectory matches the unconstrained run exactly.
    CHECK(constrained.mean_returns == free_run.mean_returns);
}

TEST_CASE("centered ranks: values, ties, shift invariance") {
    CHECK(detail::centered_ranks(Vec{5.0}) == Vec{0.0});
    Vec r = detail::centered_ranks(Vec{10.0, -5.0, 3.0});
    CHECK(r == Vec{0.5, -0.5, 0.0});
    // Stable tie-break by index.
    CHECK(detail::centered_ranks(Vec{1.0, 1.0}) == Vec{-0.5, 0.5});

    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        Vec v(6);
        for (double& x : v) x = rng.uniform(-10.0, 10.0);
        Vec shifted = v;
        double c = rng.uniform(-100.0, 100.0);
        for (double& x : shifted) x += c;
        CHECK(detail::centered_ranks(v) == detail::centered_ranks(shifted));
        double sum = 0.0;
        for (double x : detail::centered_ranks(v)) sum += x;
        CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("knn novelty: mean of the k smallest distances") {
    CHECK(detail::knn_novelty(Vec{3.0, 1.0, 2.0}, 2) == doctest::Approx(1.5));
    CHECK(detail::knn_novelty(Vec{3.0, 1.0, 2.0}, 10) == doctest::Approx(2.0));
    CHECK(detail::knn_novelty(Vec{}, 5) == 0.0);
    CHECK(detail::euclidean(Vec{0.0, 0.0}, Vec{3.0, 4.0}) == doctest::Approx(5.0));
}

TEST_CASE("ES: zero step size freezes the population") {
    EsConfig cfg = tiny_es_config();
    cfg.step_size = 0.0;
    LearningCurve curve = train_es({}, cfg, 5);
    CHECK(curve.mean_returns.size() == cfg.generations);
    for (std::size_t i = 1; i < curve.mean_returns.size(); ++i) {
        CHECK(curve.mean_returns[i] == curve.mean_returns[0]);
        CHECK(curve.aux[i] == curve.aux[0]);
    }
}

TEST_CASE("ES is deterministic per seed") {
    EsConfig cfg = tiny_es_config();
    LearningCurve a = train_es({}, cfg, 21);
    LearningCurve b = train_es({}, cfg, 21);
    CHECK(a.mean_returns == b.mean_returns);
    CHECK(a.aux == b.aux);
    LearningCurve c = train_es({}, cfg, 22);
    CHECK(a.mean_returns != c.mean_returns);
}

TEST_CASE("NSR-ES with zero novelty weight reproduces plain ES bit for bit") {
    EsConfig es = tiny_es_config();
    es.mode = EsMode::Es;

    EsConfig nsr = tiny_es_config();
    nsr.mode = EsMode::NsrEs;
    nsr.novelty_weight = 0.0;

    for (BcKind bc : {BcKind::Terminal, BcKind::Gaussian, BcKind::Supervector}) {
        es.bc = bc;
        nsr.bc = bc;
        LearningCurve a = train_es({}, es, 31);
        LearningCurve b = train_es({}, nsr, 31);
        CHECK(a.mean_returns == b.mean_returns);
        CHECK(a.aux == b.aux);
    }
}

TEST_CASE("NSR-ES runs with every BC kind and keeps finite curves") {
    for (BcKind bc : {BcKind::Terminal, BcKind::Gaussian, BcKind::Supervector}) {
        EsConfig cfg = tiny_es_config();
        cfg.mode = EsMode::NsrEs;
        cfg.bc = bc;
        LearningCurve curve = train_es({}, cfg, 17);
        CHECK(curve.mean_returns.size() == cfg.generations);
        for (std::size_t i = 0; i < curve.mean_returns.size(); ++i) {
            CHECK(std::isfinite(curve.mean_returns[i]));
            // The best member is at least as good as the average.
            CHECK(curve.aux[i] >= curve.mean_returns[i] - 1e-12);
        }
    }
}

TEST_CASE("terminal_state_bc reports the mean final position") {
    PointWorld env;
    Rng rng(1);
    AnglePolicy up(2, rng);
    up.set_flat_params(Vec(up.flat_params().size(), 0.0));
    // Zero net -> angle pi -> straight left into the left side segment.
    Vec bc = terminal_state_bc(up, env, 3, rng);
    CHECK(bc[0] == doctest::Approx(-env.geometry().half_width).epsilon(1e-6));
    CHECK(bc[1] == doctest::Approx(0.0).epsilon(1e-9));
}
