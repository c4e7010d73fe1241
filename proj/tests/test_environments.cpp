#include "doctest.h"

#include <cmath>
#include <set>

#include "polbc/dangerous_path.hpp"
#include "polbc/gridworld.hpp"
#include "polbc/point_world.hpp"

using namespace polbc;

// ---------------------------------------------------------------------------
// Tabular policies.

TEST_CASE("TabularPolicy defaults to uniform and validates cells") {
    TabularPolicy pol;
    CHECK(pol.cell(0, 0) == Vec(4, 0.25));
    CHECK_THROWS_AS(pol.set_cell(0, 0, Vec{0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(pol.set_cell(0, 0, Vec{0.5, 0.5, 0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(pol.set_cell(0, 0, Vec{1.5, -0.5, 0.0, 0.0}), std::invalid_argument);
    pol.set_deterministic(1, 2, kRight);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) CHECK(pol.sample(1, 2, rng) == kRight);
}

TEST_CASE("TabularPolicy grid text and JSON round trips") {
    std::string text =
        "U U U U U\n"
        "D D D D D\n"
        "L L L L L\n"
        "R R R R R\n"
        ". . 0.1:0.2:0.3:0.4 . .\n";
    TabularPolicy pol = TabularPolicy::from_text(text);
    CHECK(pol.cell(0, 3)[kUp] == 1.0);
    CHECK(pol.cell(1, 0)[kDown] == 1.0);
    CHECK(pol.cell(2, 4)[kLeft] == 1.0);
    CHECK(pol.cell(3, 1)[kRight] == 1.0);
    CHECK(pol.cell(4, 0) == Vec(4, 0.25));
    CHECK(pol.cell(4, 2) == Vec{0.1, 0.2, 0.3, 0.4});

    TabularPolicy back = TabularPolicy::from_json(pol.to_json());
    for (std::size_t r = 0; r < kGridSize; ++r)
        for (std::size_t c = 0; c < kGridSize; ++c) CHECK(back.cell(r, c) == pol.cell(r, c));

    CHECK_THROWS_AS(TabularPolicy::from_text("U U"), std::runtime_error);
}

TEST_CASE("grid_action_distance: identical zero, single-cell flip gives 2") {
    TabularPolicy a, b;
    std::vector<bool> walls(25, false);
    CHECK(grid_action_distance(a, b, walls) == 0.0);
    b.set_deterministic(2, 2, kUp); // uniform -> one-hot: L1 = 0.75 + 3*0.25
    CHECK(grid_action_distance(a, b, walls) == doctest::Approx(1.5));
    walls[2 * kGridSize + 2] = true;
    CHECK(grid_action_distance(a, b, walls) == 0.0);
}

// ---------------------------------------------------------------------------
// GridWorld dynamics.

TEST_CASE("GridWorld validates construction") {
    std::vector<bool> walls(25, false);
    CHECK_THROWS_AS(GridWorld(std::vector<bool>(24, false), 0, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(GridWorld(walls, 0, 1, -0.1), std::invalid_argument);
    walls[0] = true;
    CHECK_THROWS_AS(GridWorld(walls, 0, 1, 0.0), std::invalid_argument);
    // Goal sealed off entirely.
    std::vector<bool> sealed(25, false);
    for (std::size_t r = 0; r < 5; ++r) sealed[r * 5 + 3] = true;
    CHECK_THROWS_AS(GridWorld(sealed, 20, 4, 0.0), std::invalid_argument);
}

TEST_CASE("GridWorld: edges and walls block movement") {
    std::vector<bool> walls(25, false);
    walls[1 * 5 + 2] = true;
    GridWorld env(walls, 2 * 5 + 2, 0, 0.0);
    CHECK(env.neighbour(2 * 5 + 2, kUp) == 2 * 5 + 2);   // wall above
    CHECK(env.neighbour(0, kUp) == 0);                   // top edge
    CHECK(env.neighbour(0, kLeft) == 0);                 // left edge
    CHECK(env.neighbour(24, kDown) == 24);               // bottom edge
    CHECK(env.neighbour(24, kRight) == 24);              // right edge
    CHECK(env.neighbour(2 * 5 + 2, kDown) == 3 * 5 + 2);
}

TEST_CASE("GridWorld: shortest path reward is exactly 1") {
    auto sc = make_grid_scenario("doorway", 0.0);
    CHECK(sc.env.shortest_path_length() == 4);
    Rng rng(1);
    auto data = gather_data(sc.env, sc.blue, 1, rng);
    CHECK(data.episode_count() == 1);
    CHECK(data.episode_lengths()[0] == 4);
    CHECK(data.mean_return() == 1.0);
    // States recorded before each action, terminal excluded.
    CHECK(data.states()[0] == Vec{4.0, 2.0});
    CHECK(data.states()[3] == Vec{1.0, 2.0});
}

TEST_CASE("GridWorld: a looping policy truncates with zero return") {
    auto sc = make_grid_scenario("doorway", 0.0);
    Rng rng(1);
    auto data = gather_data(sc.env, sc.green, 1, rng);
    CHECK(data.episode_lengths()[0] == sc.env.max_steps());
    CHECK(data.mean_return() == 0.0);
}

TEST_CASE("GridWorld: one extra step costs 1/max_steps of reward") {
    std::vector<bool> walls(25, false);
    GridWorld env(walls, 2, 0, 0.0); // (0,2) -> (0,0), shortest 2
    TabularPolicy detour;
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c) detour.set_deterministic(r, c, kLeft);
    detour.set_deterministic(0, 2, kDown);
    detour.set_deterministic(1, 2, kLeft);
    detour.set_deterministic(1, 1, kUp);
    detour.set_deterministic(0, 1, kLeft); // 4 steps instead of 2
    Rng rng(1);
    auto data = gather_data(env, detour, 1, rng);
    CHECK(data.mean_return() == doctest::Approx(1.0 - 2.0 / 100.0).epsilon(1e-12));
}

TEST_CASE("exact occupancy equals rollout occupancy for deterministic policies") {
    for (const char* name : {"stochastic", "doorway", "unreachable"}) {
        auto sc = make_grid_scenario(name, 0.0);
        Rng rng(5);
        Vec sim = grid_occupancy(sc.env, sc.blue, 3, rng);
        Vec exact = exact_grid_occupancy(sc.env, sc.blue);
        CHECK(grid_state_distance(sim, exact) < 1e-12);
    }
}

TEST_CASE("exact occupancy tracks simulation under slip") {
    auto sc = make_grid_scenario("doorway", 0.3);
    Rng rng(11);
    Vec sim = grid_occupancy(sc.env, sc.blue, 4000, rng);
    Vec exact = exact_grid_occupancy(sc.env, sc.blue);
    CHECK(grid_state_distance(sim, exact) < 0.05);
}

TEST_CASE("scenario oracles: action and state distances") {
    {
        auto sc = make_grid_scenario("stochastic", 0.0);
        CHECK(grid_action_distance(sc.blue, sc.green, sc.env.walls()) == doctest::Approx(50.0));
        Vec ob = exact_grid_occupancy(sc.env, sc.blue);
        Vec og = exact_grid_occupancy(sc.env, sc.green);
        CHECK(grid_state_distance(ob, og) == doctest::Approx(1.75).epsilon(1e-12));
    }
    {
        auto sc = make_grid_scenario("doorway", 0.0);
        CHECK(grid_action_distance(sc.blue, sc.green, sc.env.walls()) == doctest::Approx(2.0));
        Vec ob = exact_grid_occupancy(sc.env, sc.blue);
        Vec og = exact_grid_occupancy(sc.env, sc.green);
        CHECK(grid_state_distance(ob, og) == doctest::Approx(1.0).epsilon(1e-12));
    }
    {
        auto sc = make_grid_scenario("unreachable", 0.0);
        CHECK(grid_action_distance(sc.blue, sc.green, sc.env.walls()) == doctest::Approx(10.0));
        Vec ob = exact_grid_occupancy(sc.env, sc.blue);
        Vec og = exact_grid_occupancy(sc.env, sc.green);
        CHECK(grid_state_distance(ob, og) == 0.0);
    }
    CHECK_THROWS_AS(make_grid_scenario("nope", 0.0), std::invalid_argument);
}

TEST_CASE("doorway amplifies state distance per unit of action distance") {
    auto open = make_grid_scenario("stochastic", 0.0);
    auto door = make_grid_scenario("doorway", 0.0);
    double open_ratio =
        grid_state_distance(exact_grid_occupancy(open.env, open.blue),
                            exact_grid_occupancy(open.env, open.green)) /
        grid_action_distance(open.blue, open.green, open.env.walls());
    double door_ratio =
        grid_state_distance(exact_grid_occupancy(door.env, door.blue),
                            exact_grid_occupancy(door.env, door.green)) /
        grid_action_distance(door.blue, door.green, door.env.walls());
    CHECK(door_ratio > 5.0 * open_ratio);
}

TEST_CASE("full slip erases the policy difference") {
    auto sc = make_grid_scenario("stochastic", 1.0);
    Vec ob = exact_grid_occupancy(sc.env, sc.blue);
    Vec og = exact_grid_occupancy(sc.env, sc.green);
    CHECK(grid_state_distance(ob, og) == 0.0);
}

// ---------------------------------------------------------------------------
// DangerousPath.

TEST_CASE("dangerous path: every cell has one advance and two mines") {
    DangerousPath env(123);
    Rng rng(0);
    Vec obs = env.reset(rng);
    for (long x = -2; x <= 3; ++x)
        for (long y = -2; y <= 3; ++y) {
            std::vector<long> coords{x, y, 0, 1, -1};
            std::size_t advances = 0, mines = 0, noops = 0;
            for (std::size_t a = 0; a < env.action_count(); ++a) {
                switch (env.outcome_at(coords, a)) {
                    case DangerousPath::Outcome::Advance: ++advances; break;
                    case DangerousPath::Outcome::Mine: ++mines; break;
                    case DangerousPath::Outcome::Noop: ++noops; break;
                }
            }
            CHECK(advances == 1);
            CHECK(mines == 2);
            CHECK(noops == env.action_count() - 3);
            CHECK(env.outcome_at(coords, env.correct_action(coords)) ==
                  DangerousPath::Outcome::Advance);
        }
}

TEST_CASE("dangerous path: layouts differ across seeds but not within one") {
    DangerousPath a(1), b(1), c(2);
    std::vector<long> origin(5, 0);
    CHECK(a.correct_action(origin) == b.correct_action(origin));
    bool any_diff = false;
    for (long i = 0; i < 20 && !any_diff; ++i) {
        std::vector<long> coords{i, 0, 0, 0, 0};
        any_diff = a.correct_action(coords) != c.correct_action(coords);
    }
    CHECK(any_diff);
}

TEST_CASE("dangerous path: greedy policy collects the full 25") {
    DangerousPath env(7);
    EpsilonGreedyPathPolicy greedy(env, 0.0);
    Rng rng(1);
    auto data = gather_data(env, greedy, 2, rng);
    CHECK(data.episode_count() == 2);
    CHECK(data.episode_lengths()[0] == env.step_limit());
    CHECK(data.episode_returns()[0] == 25.0);
    CHECK(data.episode_returns()[1] == 25.0);
}

TEST_CASE("dangerous path: mines reset to the origin, noops stay put") {
    DangerousPath env(7);
    Rng rng(1);
    Vec obs = env.reset(rng);
    std::vector<long> origin(5, 0);
    std::size_t mine = 0, noop = 0;
    for (std::size_t a = 0; a < env.action_count(); ++a) {
        if (env.outcome_at(origin, a) == DangerousPath::Outcome::Mine) mine = a;
        if (env.outcome_at(origin, a) == DangerousPath::Outcome::Noop) noop = a;
    }
    // Advance first so the mine actually has somewhere to throw us back from.
    auto r1 = env.step(env.correct_action(obs), rng);
    CHECK(r1.reward == 1.0);
    std::size_t mine_from_here = 0;
    for (std::size_t a = 0; a < env.action_count(); ++a)
        if (env.outcome_at(DangerousPath::to_coords(r1.state), a) ==
            DangerousPath::Outcome::Mine)
            mine_from_here = a;
    auto r2 = env.step(mine_from_here, rng);
    CHECK(r2.state == Vec(5, 0.0));
    CHECK(r2.reward == 0.0);

    env.reset(rng);
    auto r3 = env.step(noop, rng);
    CHECK(r3.state == Vec(5, 0.0));
    CHECK(r3.reward == 0.0);
    (void)mine;
}

TEST_CASE("dangerous path: revisiting a cell pays nothing") {
    DangerousPath env(7);
    Rng rng(1);
    Vec obs = env.reset(rng);
    std::vector<long> origin(5, 0);
    std::size_t fwd = env.correct_action(origin);
    auto r1 = env.step(fwd, rng);
    CHECK(r1.reward == 1.0);
    // Mine back to the origin, then advance into the same cell again.
    std::size_t mine_back = 0;
    for (std::size_t a = 0; a < env.action_count(); ++a)
        if (env.outcome_at(DangerousPath::to_coords(r1.state), a) ==
            DangerousPath::Outcome::Mine)
            mine_back = a;
    env.step(mine_back, rng);
    auto r3 = env.step(fwd, rng);
    CHECK(r3.reward == 0.0); // already visited this episode

    // A fresh episode forgets the visit set.
    env.reset(rng);
    CHECK(env.step(fwd, rng).reward == 1.0);
}

TEST_CASE("dangerous path: mean return degrades with epsilon") {
    DangerousPath env(11);
    Rng rng(3);
    Vec means;
    for (double eps : {0.0, 0.5, 1.0}) {
        EpsilonGreedyPathPolicy pol(env, eps);
        auto data = gather_data(env, pol, 40, rng);
        means.push_back(data.mean_return());
    }
    CHECK(means[0] == 25.0);
    CHECK(means[0] > means[1]);
    CHECK(means[1] > means[2]);
}

// ---------------------------------------------------------------------------
// PointWorld.

TEST_CASE("point world: straight up stalls at the top wall") {
    PointWorld env;
    Rng rng(1);
    Vec state = env.reset(rng);
    double ret = 0.0;
    bool done = false;
    while (!done) {
        auto res = env.step(M_PI / 2.0, rng);
        ret += res.reward;
        state = res.state;
        done = res.done;
    }
    CHECK(ret == doctest::Approx(env.geometry().y_wall).epsilon(1e-3));
    CHECK(state[0] == doctest::Approx(0.0));
    CHECK(state[1] < env.geometry().y_wall);
}

TEST_CASE("point world: straight down is unobstructed") {
    PointWorld env;
    Rng rng(1);
    env.reset(rng);
    double ret = 0.0;
    for (int i = 0; i < 100; ++i) ret += env.step(3.0 * M_PI / 2.0, rng).reward;
    CHECK(ret == doctest::Approx(-5.0).epsilon(1e-9));
}

TEST_CASE("point world: the side wall blocks horizontal escape at spawn height") {
    PointWorld env;
    Rng rng(1);
    Vec state = env.reset(rng);
    for (int i = 0; i < 40; ++i) state = env.step(0.0, rng).state;
    CHECK(state[0] < env.geometry().half_width);
    CHECK(state[0] == doctest::Approx(env.geometry().half_width).epsilon(1e-6));
    CHECK(state[1] == 0.0);
}

TEST_CASE("point world: going around the wall beats going up") {
    PointWorld env;
    Rng rng(1);
    env.reset(rng);
    double ret = 0.0;
    bool done = false;
    // Down-right to a point clearly past the corner, then straight up.
    double tx = env.geometry().half_width + 0.1;
    double ty = env.geometry().y_side - 0.1;
    std::size_t diag_steps =
        static_cast<std::size_t>(std::ceil(std::hypot(tx, ty) / env.geometry().speed)) + 1;
    double diag_angle = std::atan2(ty, tx) + 2.0 * M_PI;
    std::size_t t = 0;
    while (!done) {
        auto res = env.step(t < diag_steps ? diag_angle : M_PI / 2.0, rng);
        ret += res.reward;
        done = res.done;
        ++t;
    }
    CHECK(ret > 3.3);
    CHECK(ret <= env.best_known_return() + 1e-9);
    CHECK(env.best_known_return() == doctest::Approx(3.78).epsilon(0.01));
}

TEST_CASE("point world: rejects angles outside [0, 2pi]") {
    PointWorld env;
    Rng rng(1);
    env.reset(rng);
    CHECK_THROWS_AS(env.step(-0.1, rng), std::invalid_argument);
    CHECK_THROWS_AS(env.step(7.0, rng), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Network policies.

TEST_CASE("softmax policy: probabilities, log-probs and sampling agree") {
    Rng rng(5);
    SoftmaxPolicy pol(2, 3, rng);
    Vec state{0.4, -0.9};
    Vec p = pol.action_probs(state);
    double sum = 0.0;
    for (double v : p) {
        CHECK(v > 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t a = 0; a < 3; ++a)
        CHECK(pol.action_log_prob(state, a) == doctest::Approx(std::log(p[a])).epsilon(1e-12));
    CHECK_THROWS_AS(pol.action_log_prob(state, 3), std::invalid_argument);

    // Empirical frequencies track the probabilities.
    Vec counts(3, 0.0);
    const int n = 20000;
    Rng srng(9);
    for (int i = 0; i < n; ++i) counts[pol.sample(state, srng)] += 1.0;
    for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(counts[a] / n - p[a]) < 0.02);
}

TEST_CASE("softmax policy: log-prob gradient matches finite differences") {
    Rng rng(7);
    SoftmaxPolicy pol(2, 3, rng);
    Vec state{0.2, 0.7};
    for (std::size_t action = 0; action < 3; ++action) {
        Vec analytic = pol.log_prob_gradient(state, action);
        Vec params = pol.flat_params();
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size(); i += 37) { // spot-check
            Vec p = params;
            p[i] += h;
            pol.set_flat_params(p);
            double up = pol.action_log_prob(state, action);
            p[i] -= 2 * h;
            pol.set_flat_params(p);
            double down = pol.action_log_prob(state, action);
            pol.set_flat_params(params);
            double numeric = (up - down) / (2 * h);
            CHECK(std::abs(numeric - analytic[i]) < 1e-5);
        }
    }
}

TEST_CASE("softmax policy JSON round trip preserves behaviour") {
    Rng rng(13);
    SoftmaxPolicy pol(2, 4, rng);
    SoftmaxPolicy back = SoftmaxPolicy::from_json(pol.to_json());
    Vec state{-0.3, 1.1};
    CHECK(back.action_probs(state) == pol.action_probs(state));
    CHECK_THROWS_AS(SoftmaxPolicy::from_json(AnglePolicy(2, rng).to_json()), std::runtime_error);
}

TEST_CASE("angle policy maps the network output into [0, 2pi]") {
    Rng rng(17);
    AnglePolicy pol(2, rng);
    Rng dummy(0);
    for (double x : {-3.0, -0.5, 0.0, 0.5, 3.0}) {
        double phi = pol.sample(Vec{x, -x}, dummy);
        CHECK(phi >= 0.0);
        CHECK(phi <= 2.0 * M_PI);
    }
    AnglePolicy zero;
    zero = AnglePolicy::from_json(pol.to_json());
    CHECK(zero.angle(Vec{0.1, 0.2}) == pol.angle(Vec{0.1, 0.2}));

    // All-zero parameters sit exactly at pi.
    AnglePolicy mid(2, rng);
    mid.set_flat_params(Vec(mid.flat_params().size(), 0.0));
    CHECK(mid.angle(Vec{5.0, -5.0}) == doctest::Approx(M_PI).epsilon(1e-12));
}

TEST_CASE("gather_data and return_distance") {
    auto sc = make_grid_scenario("doorway", 0.0);
    Rng rng(1);
    auto blue = gather_data(sc.env, sc.blue, 3, rng);
    auto green = gather_data(sc.env, sc.green, 3, rng);
    CHECK(return_distance(blue, green) == doctest::Approx(1.0));
    CHECK(return_distance(blue, blue) == 0.0);
    CHECK_THROWS_AS(gather_data(sc.env, sc.blue, 0, rng), std::invalid_argument);
}
