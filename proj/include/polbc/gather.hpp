#pragma once

#include <cstddef>
#include <stdexcept>

#include "polbc/dataset.hpp"
#include "polbc/rng.hpp"

namespace polbc {

// Rollout loop: record the state, sample an action, step. The reward of the
// taken action is attached to the state it was taken from; terminal states
// are not recorded.
template <class Env, class Policy>
StateDataset gather_data(Env& env, const Policy& policy, std::size_t episodes, Rng& rng) {
    if (episodes == 0) throw std::invalid_argument("gather_data: need at least one episode");
    StateDataset data(env.observation_dim());
    for (std::size_t m = 0; m < episodes; ++m) {
        auto state = env.reset(rng);
        data.begin_episode();
        bool done = false;
        while (!done) {
            auto action = policy.sample(state, rng);
            auto result = env.step(action, rng);
            data.add_state(state, result.reward);
            state = result.state;
            done = result.done;
        }
    }
    return data;
}

inline double return_distance(const StateDataset& a, const StateDataset& b) {
    return std::abs(a.mean_return() - b.mean_return());
}

} // namespace polbc
