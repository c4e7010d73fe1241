#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "polbc/gather.hpp"
#include "polbc/policies.hpp"
#include "polbc/rng.hpp"

namespace polbc {

// 5x5 gridworld with a slip probability: with probability epsilon the chosen
// move is replaced by a uniformly random direction. Reaching the goal ends
// the episode with reward 1 - (steps_used - shortest) / max_steps.
class GridWorld {
public:
    struct StepResult {
        Vec state;
        double reward;
        bool done;
    };

    GridWorld(std::vector<bool> walls, std::size_t start, std::size_t goal, double epsilon,
              std::size_t max_steps = 100)
        : walls_(std::move(walls)), start_(start), goal_(goal), epsilon_(epsilon),
          max_steps_(max_steps) {
        if (walls_.size() != kGridSize * kGridSize)
            throw std::invalid_argument("GridWorld: wall mask must cover the grid");
        if (walls_[start_] || walls_[goal_])
            throw std::invalid_argument("GridWorld: start/goal inside a wall");
        if (epsilon_ < 0.0 || epsilon_ > 1.0)
            throw std::invalid_argument("GridWorld: epsilon must be a probability");
        shortest_ = bfs_shortest_path();
    }

    std::size_t observation_dim() const { return 2; }
    const std::vector<bool>& walls() const { return walls_; }
    std::size_t start_cell() const { return start_; }
    std::size_t goal_cell() const { return goal_; }
    double epsilon() const { return epsilon_; }
    void set_epsilon(double e) { epsilon_ = e; }
    std::size_t max_steps() const { return max_steps_; }
    std::size_t shortest_path_length() const { return shortest_; }

    Vec reset(Rng&) {
        pos_ = start_;
        steps_ = 0;
        return observation();
    }

    StepResult step(std::size_t action, Rng& rng) {
        if (action >= 4) throw std::invalid_argument("GridWorld: invalid action");
        if (epsilon_ > 0.0 && rng.uniform() < epsilon_) action = rng.uniform_int(4);
        std::size_t next = neighbour(pos_, static_cast<GridAction>(action));
        pos_ = next;
        steps_ += 1;
        if (pos_ == goal_) {
            double reward = 1.0 - static_cast<double>(steps_ - shortest_) /
                                      static_cast<double>(max_steps_);
            return {observation(), reward, true};
        }
        if (steps_ >= max_steps_) return {observation(), 0.0, true};
        return {observation(), 0.0, false};
    }

    // Target cell of a move, staying put on walls and edges.
    std::size_t neighbour(std::size_t cell, GridAction a) const {
        std::size_t r = cell / kGridSize;
        std::size_t c = cell % kGridSize;
        switch (a) {
            case kUp: if (r == 0) return cell; r -= 1; break;
            case kDown: if (r + 1 == kGridSize) return cell; r += 1; break;
            case kLeft: if (c == 0) return cell; c -= 1; break;
            case kRight: if (c + 1 == kGridSize) return cell; c += 1; break;
        }
        std::size_t next = r * kGridSize + c;
        return walls_[next] ? cell : next;
    }

private:
    Vec observation() const {
        return Vec{static_cast<double>(pos_ / kGridSize), static_cast<double>(pos_ % kGridSize)};
    }

    std::size_t bfs_shortest_path() const {
        std::vector<std::size_t> dist(walls_.size(), SIZE_MAX);
        std::deque<std::size_t> queue{start_};
        dist[start_] = 0;
        while (!queue.empty()) {
            std::size_t cell = queue.front();
            queue.pop_front();
            for (std::size_t a = 0; a < 4; ++a) {
                std::size_t next = neighbour(cell, static_cast<GridAction>(a));
                if (dist[next] == SIZE_MAX) {
                    dist[next] = dist[cell] + 1;
                    queue.push_back(next);
                }
            }
        }
        if (dist[goal_] == SIZE_MAX)
            throw std::invalid_argument("GridWorld: goal unreachable from start");
        return dist[goal_];
    }

    std::vector<bool> walls_;
    std::size_t start_;
    std::size_t goal_;
    double epsilon_;
    std::size_t max_steps_;
    std::size_t shortest_;
    std::size_t pos_ = 0;
    std::size_t steps_ = 0;
};

// Occupancy over cells estimated by rollout, states counted before each
// action, normalized by total steps.
inline Vec grid_occupancy(GridWorld& env, const TabularPolicy& policy, std::size_t episodes,
                          Rng& rng) {
    if (episodes == 0) throw std::invalid_argument("grid_occupancy: need at least one episode");
    Vec visits(kGridSize * kGridSize, 0.0);
    double total = 0.0;
    for (std::size_t m = 0; m < episodes; ++m) {
        Vec state = env.reset(rng);
        bool done = false;
        while (!done) {
            std::size_t cell = static_cast<std::size_t>(state[0]) * kGridSize +
                               static_cast<std::size_t>(state[1]);
            visits[cell] += 1.0;
            total += 1.0;
            auto res = env.step(policy.sample(state, rng), rng);
            state = res.state;
            done = res.done;
        }
    }
    for (double& v : visits) v /= total;
    return visits;
}

// Exact occupancy by evolving the state distribution of the induced Markov
// chain. The goal is absorbing; episodes truncate at max_steps.
inline Vec exact_grid_occupancy(const GridWorld& env, const TabularPolicy& policy) {
    const std::size_t n = kGridSize * kGridSize;
    Vec dist(n, 0.0);
    dist[env.start_cell()] = 1.0;
    Vec visits(n, 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < env.max_steps(); ++t) {
        for (std::size_t cell = 0; cell < n; ++cell) {
            visits[cell] += dist[cell];
            total += dist[cell];
        }
        Vec next(n, 0.0);
        for (std::size_t cell = 0; cell < n; ++cell) {
            if (dist[cell] <= 0.0) continue;
            const Vec& p = policy.cell(cell / kGridSize, cell % kGridSize);
            for (std::size_t a = 0; a < 4; ++a) {
                double pa = (1.0 - env.epsilon()) * p[a] + env.epsilon() * 0.25;
                if (pa <= 0.0) continue;
                std::size_t tgt = env.neighbour(cell, static_cast<GridAction>(a));
                if (tgt != env.goal_cell()) next[tgt] += dist[cell] * pa;
            }
        }
        dist = std::move(next);
    }
    for (double& v : visits) v /= total;
    return visits;
}

// Sum of absolute differences between two cell distributions.
inline double grid_state_distance(const Vec& p, const Vec& q) {
    if (p.size() != q.size()) throw std::invalid_argument("grid_state_distance: layout mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return acc;
}

// ---------------------------------------------------------------------------
// Built-in demonstration scenarios: two fixed policies per layout.

struct GridScenario {
    GridWorld env;
    TabularPolicy blue;
    TabularPolicy green;
};

inline GridScenario make_grid_scenario(const std::string& name, double epsilon) {
    auto cell = [](std::size_t r, std::size_t c) { return r * kGridSize + c; };
    std::vector<bool> walls(kGridSize * kGridSize, false);

    if (name == "stochastic") {
        // Open world, two disjoint corner-to-corner paths; the policies
        // disagree in every cell.
        GridWorld env(walls, cell(4, 0), cell(0, 4), epsilon);
        TabularPolicy blue, green;
        for (std::size_t r = 0; r < kGridSize; ++r)
            for (std::size_t c = 0; c < kGridSize; ++c) {
                blue.set_deterministic(r, c, kDown);
                green.set_deterministic(r, c, kLeft);
            }
        for (std::size_t c = 0; c < 4; ++c) blue.set_deterministic(4, c, kRight);
        for (std::size_t r = 1; r < kGridSize; ++r) blue.set_deterministic(r, 4, kUp);
        for (std::size_t r = 1; r < kGridSize; ++r) green.set_deterministic(r, 0, kUp);
        for (std::size_t c = 0; c < 4; ++c) green.set_deterministic(0, c, kRight);
        return {env, blue, green};
    }
    if (name == "doorway") {
        // Wall across the middle with a single gap; the policies differ only
        // in the cell below the gap.
        for (std::size_t c = 0; c < kGridSize; ++c)
            if (c != 2) walls[cell(2, c)] = true;
        GridWorld env(walls, cell(4, 2), cell(0, 2), epsilon);
        TabularPolicy blue;
        for (std::size_t r = 0; r < kGridSize; ++r)
            for (std::size_t c = 0; c < kGridSize; ++c) blue.set_deterministic(r, c, kUp);
        blue.set_deterministic(3, 1, kDown);
        blue.set_deterministic(4, 1, kRight);
        TabularPolicy green = blue;
        green.set_deterministic(3, 2, kLeft);
        return {env, blue, green};
    }
    if (name == "unreachable") {
        // Full wall column: the policies agree on the reachable side and
        // disagree only in the sealed-off region.
        for (std::size_t r = 0; r < kGridSize; ++r) walls[cell(r, 3)] = true;
        GridWorld env(walls, cell(4, 0), cell(0, 0), epsilon);
        TabularPolicy blue;
        for (std::size_t r = 0; r < kGridSize; ++r)
            for (std::size_t c = 0; c < kGridSize; ++c) blue.set_deterministic(r, c, kLeft);
        for (std::size_t r = 0; r < kGridSize; ++r) blue.set_deterministic(r, 0, kUp);
        blue.set_deterministic(0, 0, kLeft); // goal cell, action irrelevant
        TabularPolicy green = blue;
        for (std::size_t r = 0; r < kGridSize; ++r) green.set_deterministic(r, 4, kDown);
        return {env, blue, green};
    }
    throw std::invalid_argument("unknown gridworld scenario: " + name);
}

} // namespace polbc
