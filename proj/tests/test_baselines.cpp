#include "doctest.h"

#include <cmath>

#include "polbc/baselines.hpp"

using namespace polbc;

namespace {

StateDataset one_episode(const std::vector<Vec>& states) {
    StateDataset ds(states.front().size());
    ds.begin_episode();
    for (const Vec& s : states) ds.add_state(s);
    return ds;
}

StateDataset blob(const Vec& center, double sigma, std::size_t n, Rng& rng) {
    StateDataset ds(center.size());
    ds.begin_episode();
    for (std::size_t i = 0; i < n; ++i) {
        Vec s(center.size());
        for (std::size_t j = 0; j < s.size(); ++j) s[j] = center[j] + sigma * rng.normal();
        ds.add_state(s);
    }
    return ds;
}

} // namespace

TEST_CASE("fit_gaussian_bc matches the closed-form moments") {
    auto ds = one_episode({{0.0, 1.0}, {2.0, 3.0}, {4.0, -1.0}});
    GaussianBc bc = fit_gaussian_bc(ds);
    CHECK(bc.mean[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(bc.mean[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bc.variance[0] == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
    CHECK(bc.variance[1] == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(fit_gaussian_bc(one_episode({{1.0}})), std::invalid_argument);
}

TEST_CASE("fit_gaussian_bc floors the variance on constant data") {
    auto ds = one_episode({{4.0}, {4.0}, {4.0}});
    GaussianBc bc = fit_gaussian_bc(ds);
    CHECK(bc.variance[0] == kVarianceFloor);
}

TEST_CASE("gaussian_symmetric_kl: hand-computed values") {
    GaussianBc a{{0.0}, {1.0}};
    GaussianBc b{{1.0}, {1.0}};
    // Unit variances, mean gap 1: 0 + 0.5 * 1 * (1 + 1) = 1.
    CHECK(gaussian_symmetric_kl(a, b) == doctest::Approx(1.0).epsilon(1e-12));

    GaussianBc c{{0.0}, {2.0}};
    // Same mean, variances 1 and 2: 0.5 * (0.5 + 2 - 2) = 0.25.
    CHECK(gaussian_symmetric_kl(a, c) == doctest::Approx(0.25).epsilon(1e-12));

    CHECK(gaussian_symmetric_kl(a, a) == 0.0);
    GaussianBc d2{{0.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(gaussian_symmetric_kl(a, d2), std::invalid_argument);
}

TEST_CASE("gaussian_symmetric_kl is symmetric and additive over dimensions") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        GaussianBc a{{rng.uniform(-5, 5), rng.uniform(-5, 5)},
                     {rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0)}};
        GaussianBc b{{rng.uniform(-5, 5), rng.uniform(-5, 5)},
                     {rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0)}};
        double dab = gaussian_symmetric_kl(a, b);
        CHECK(dab >= 0.0);
        CHECK(gaussian_symmetric_kl(b, a) == doctest::Approx(dab).epsilon(1e-15));
        double per_dim = gaussian_symmetric_kl(GaussianBc{{a.mean[0]}, {a.variance[0]}},
                                               GaussianBc{{b.mean[0]}, {b.variance[0]}}) +
                         gaussian_symmetric_kl(GaussianBc{{a.mean[1]}, {a.variance[1]}},
                                               GaussianBc{{b.mean[1]}, {b.variance[1]}});
        CHECK(dab == doctest::Approx(per_dim).epsilon(1e-12));
    }
}

TEST_CASE("gaussian_symmetric_kl on sampled unit-gap data is close to 1") {
    Rng rng(17);
    auto da = blob({0.0}, 1.0, 20000, rng);
    auto db = blob({1.0}, 1.0, 20000, rng);
    double d = gaussian_symmetric_kl(fit_gaussian_bc(da), fit_gaussian_bc(db));
    CHECK(d == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("bin edges: min maps to bin 0, max to the last bin") {
    auto pooled = one_episode({{0.0}, {10.0}, {5.0}});
    BinEdges edges = compute_bin_edges(pooled);
    CHECK(edges.lo[0] == 0.0);
    CHECK(edges.hi[0] == 10.0);
    CHECK(edges.bin_of(0, 0.0) == 0);
    CHECK(edges.bin_of(0, 10.0) == BinEdges::kBins - 1);
    CHECK(edges.bin_of(0, 0.999) == 0);
    CHECK(edges.bin_of(0, 1.0) == 1);
    CHECK(edges.bin_of(0, 5.0) == 5);
    // Out-of-range values clamp rather than crash.
    CHECK(edges.bin_of(0, -3.0) == 0);
    CHECK(edges.bin_of(0, 13.0) == BinEdges::kBins - 1);
}

TEST_CASE("bin edges: constant dimension collapses to a single bin") {
    auto pooled = one_episode({{7.0}, {7.0}});
    BinEdges edges = compute_bin_edges(pooled);
    CHECK(edges.bin_of(0, 7.0) == 0);
    CHECK(edges.bin_of(0, 100.0) == 0);
}

TEST_CASE("histogram distance: identical, disjoint and half-overlapping data") {
    auto pooled = one_episode({{0.0}, {9.99}});
    BinEdges edges = compute_bin_edges(pooled);

    auto ha = fit_histogram_bc(one_episode({{0.1}, {0.2}}), edges);
    CHECK(histogram_distance(ha, ha) == 0.0);

    auto hb = fit_histogram_bc(one_episode({{9.0}, {9.5}}), edges);
    CHECK(histogram_distance(ha, hb) == doctest::Approx(1.0).epsilon(1e-12));

    // a: bins {0,1} each 1/2; b: bins {1,9} each 1/2 -> TV = 1/2.
    auto hc = fit_histogram_bc(one_episode({{0.1}, {1.5}}), edges);
    auto hd = fit_histogram_bc(one_episode({{1.5}, {9.0}}), edges);
    CHECK(histogram_distance(hc, hd) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("histogram distance rejects mismatched edges") {
    BinEdges e1 = compute_bin_edges(one_episode({{0.0}, {1.0}}));
    BinEdges e2 = compute_bin_edges(one_episode({{0.0}, {2.0}}));
    auto ha = fit_histogram_bc(one_episode({{0.5}}), e1);
    auto hb = fit_histogram_bc(one_episode({{0.5}}), e2);
    CHECK_THROWS_AS(histogram_distance(ha, hb), std::invalid_argument);
}

TEST_CASE("histogram distance is a bounded symmetric metric on random data") {
    Rng rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t d = 1 + rng.uniform_int(2);
        Vec c0(d), c1(d);
        for (std::size_t j = 0; j < d; ++j) {
            c0[j] = rng.uniform(-2.0, 2.0);
            c1[j] = rng.uniform(-2.0, 2.0);
        }
        auto da = blob(c0, 1.0, 50, rng);
        auto db = blob(c1, 1.0, 50, rng);
        BinEdges edges = compute_bin_edges(pool_datasets({da, db}));
        auto ha = fit_histogram_bc(da, edges);
        auto hb = fit_histogram_bc(db, edges);
        double dist = histogram_distance(ha, hb);
        CHECK(dist >= 0.0);
        CHECK(dist <= 1.0 + 1e-12);
        CHECK(histogram_distance(hb, ha) == doctest::Approx(dist).epsilon(1e-15));
    }
}

TEST_CASE("histogram cells hold a probability distribution") {
    Rng rng(31);
    auto ds = blob({0.0, 0.0}, 1.0, 200, rng);
    BinEdges edges = compute_bin_edges(ds);
    auto h = fit_histogram_bc(ds, edges);
    double total = 0.0;
    for (const auto& [cell, p] : h.cells) {
        CHECK(p > 0.0);
        total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("discriminator penalty is exp(-logit) and respects the clip") {
    DiscriminatorBc disc;
    disc.net = Mlp::zeros({1, 1}, Activation::Identity);
    disc.net.layers()[0].bias = Vec{3.0};
    CHECK(disc.logit(Vec{0.0}) == 3.0);
    CHECK(disc.density_ratio_penalty(Vec{0.0}) == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));

    disc.net.layers()[0].bias = Vec{500.0};
    CHECK(disc.logit(Vec{0.0}) == kDiscriminatorLogitClip);
    CHECK(disc.density_ratio_penalty(Vec{0.0}) ==
          doctest::Approx(std::exp(-kDiscriminatorLogitClip)).epsilon(1e-12));
    disc.net.layers()[0].bias = Vec{-500.0};
    CHECK(disc.density_ratio_penalty(Vec{0.0}) ==
          doctest::Approx(std::exp(kDiscriminatorLogitClip)).epsilon(1e-12));
}

TEST_CASE("discriminator distances: identical data near 2, separated data far larger") {
    DiscriminatorTrainConfig cfg;
    cfg.hidden_units = 16;
    cfg.hidden_layers = 1;

    Rng data_rng(41);
    auto near_a = blob({0.0}, 1.0, 300, data_rng);
    auto near_b = blob({0.0}, 1.0, 300, data_rng);
    auto far_c = blob({50.0}, 1.0, 300, data_rng);

    Rng rng(7);
    auto m = discriminator_distance({near_a, near_b, far_c}, rng, cfg, {"a", "b", "c"});

    // Indistinguishable classes: D ~= 1/2, penalty ~= 1 each way.
    CHECK(m.at(0, 1) == doctest::Approx(2.0).epsilon(0.25));
    // Separable classes blow past that.
    CHECK(m.at(0, 2) > 10.0);
    CHECK(m.at(1, 2) > 10.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(m.at(i, i) == 0.0);
    // The clip caps how large a pairwise distance can get.
    CHECK(m.at(0, 2) <= 2.0 * std::exp(kDiscriminatorLogitClip));
}

TEST_CASE("discriminator distance is deterministic for a fixed seed") {
    DiscriminatorTrainConfig cfg;
    cfg.hidden_units = 8;
    cfg.hidden_layers = 1;
    cfg.epochs = 3;
    Rng data_rng(43);
    auto a = blob({0.0}, 1.0, 60, data_rng);
    auto b = blob({2.0}, 1.0, 60, data_rng);
    Rng r1(9), r2(9);
    auto m1 = discriminator_distance({a, b}, r1, cfg);
    auto m2 = discriminator_distance({a, b}, r2, cfg);
    CHECK(m1.at(0, 1) == m2.at(0, 1));
}

TEST_CASE("GaussianBc JSON round trip") {
    GaussianBc bc{{1.5, -2.5}, {0.25, 4.0}};
    GaussianBc back = GaussianBc::from_json(bc.to_json());
    CHECK(back.mean == bc.mean);
    CHECK(back.variance == bc.variance);
}
