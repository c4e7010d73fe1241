#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "polbc/math.hpp"
#include "polbc/rng.hpp"

namespace polbc {

// N-dimensional grid where each cell has exactly one advancing action, two
// mines that reset the player to the origin, and the rest do nothing.
// Advancing into a cell not yet visited this episode pays +1. Episodes run a
// fixed number of steps. Cell labels are drawn lazily from a hash of
// (layout seed, coordinates), so the unbounded grid needs no storage.
class DangerousPath {
public:
    struct StepResult {
        Vec state;
        double reward;
        bool done;
    };

    enum class Outcome { Advance, Mine, Noop };

    explicit DangerousPath(std::uint64_t layout_seed, std::size_t dims = 5,
                           std::size_t step_limit = 25)
        : dims_(dims), step_limit_(step_limit), layout_(layout_seed) {
        if (dims_ < 3) throw std::invalid_argument("DangerousPath: need at least 3 actions");
    }

    std::size_t observation_dim() const { return dims_; }
    std::size_t action_count() const { return dims_; }
    std::size_t step_limit() const { return step_limit_; }

    Vec reset(Rng&) {
        pos_.assign(dims_, 0);
        steps_ = 0;
        visited_.clear();
        visited_.insert(pos_);
        return observation();
    }

    StepResult step(std::size_t action, Rng&) {
        if (action >= dims_) throw std::invalid_argument("DangerousPath: invalid action");
        double reward = 0.0;
        switch (outcome_at(pos_, action)) {
            case Outcome::Advance: {
                pos_[action] += 1;
                auto [it, fresh] = visited_.insert(pos_);
                (void)it;
                if (fresh) reward = 1.0;
                break;
            }
            case Outcome::Mine:
                pos_.assign(dims_, 0);
                break;
            case Outcome::Noop:
                break;
        }
        steps_ += 1;
        return {observation(), reward, steps_ >= step_limit_};
    }

    // Deterministic per-cell action labeling.
    Outcome outcome_at(const std::vector<long>& coords, std::size_t action) const {
        std::vector<std::size_t> labels = cell_labels(coords);
        if (labels[action] == 0) return Outcome::Advance;
        if (labels[action] == 1 || labels[action] == 2) return Outcome::Mine;
        return Outcome::Noop;
    }

    std::size_t correct_action(const std::vector<long>& coords) const {
        std::vector<std::size_t> labels = cell_labels(coords);
        for (std::size_t a = 0; a < dims_; ++a)
            if (labels[a] == 0) return a;
        return 0; // unreachable
    }

    std::size_t correct_action(const Vec& obs) const { return correct_action(to_coords(obs)); }

    static std::vector<long> to_coords(const Vec& obs) {
        std::vector<long> c(obs.size());
        for (std::size_t i = 0; i < obs.size(); ++i) c[i] = static_cast<long>(obs[i]);
        return c;
    }

private:
    Vec observation() const {
        Vec obs(dims_);
        for (std::size_t i = 0; i < dims_; ++i) obs[i] = static_cast<double>(pos_[i]);
        return obs;
    }

    // Ranks 0..dims-1 assigned per cell: 0 advances, 1-2 are mines, the rest
    // are no-ops.
    std::vector<std::size_t> cell_labels(const std::vector<long>& coords) const {
        std::uint64_t h = layout_;
        for (long c : coords) h = h * 0x100000001B3ULL + static_cast<std::uint64_t>(c + 1);
        Rng cell_rng = Rng(layout_).split(h);
        std::vector<std::size_t> perm(dims_);
        for (std::size_t i = 0; i < dims_; ++i) perm[i] = i;
        for (std::size_t i = dims_; i > 1; --i)
            std::swap(perm[i - 1], perm[cell_rng.uniform_int(i)]);
        // perm[a] is the rank of action a.
        return perm;
    }

    std::size_t dims_;
    std::size_t step_limit_;
    std::uint64_t layout_;
    std::vector<long> pos_;
    std::size_t steps_ = 0;
    std::set<std::vector<long>> visited_;
};

// Takes the advancing action with probability 1 - epsilon, otherwise a
// uniformly random one. Used to build graded-quality policy families.
class EpsilonGreedyPathPolicy {
public:
    EpsilonGreedyPathPolicy(const DangerousPath& env, double epsilon)
        : env_(&env), epsilon_(epsilon) {}

    std::size_t sample(const Vec& state, Rng& rng) const {
        if (epsilon_ > 0.0 && rng.uniform() < epsilon_)
            return rng.uniform_int(env_->action_count());
        return env_->correct_action(state);
    }

private:
    const DangerousPath* env_;
    double epsilon_;
};

} // namespace polbc
