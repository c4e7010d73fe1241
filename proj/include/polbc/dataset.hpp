#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "polbc/io.hpp"
#include "polbc/math.hpp"
#include "polbc/rng.hpp"

namespace polbc {

// States visited by one policy, with episode boundaries and per-episode
// returns.
class StateDataset {
public:
    StateDataset() = default;
    explicit StateDataset(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return states_.size(); }
    std::size_t episode_count() const { return episode_lengths_.size(); }
    const std::vector<Vec>& states() const { return states_; }
    const std::vector<std::size_t>& episode_lengths() const { return episode_lengths_; }
    const Vec& episode_returns() const { return returns_; }

    void begin_episode() {
        episode_lengths_.push_back(0);
        returns_.push_back(0.0);
    }

    void add_state(const Vec& s, double reward = 0.0) {
        if (episode_lengths_.empty()) throw std::logic_error("add_state before begin_episode");
        if (s.size() != dim_) throw std::invalid_argument("StateDataset: state dimension mismatch");
        if (!all_finite(s)) throw std::invalid_argument("StateDataset: non-finite state");
        states_.push_back(s);
        episode_lengths_.back() += 1;
        returns_.back() += reward;
        rewards_.push_back(reward);
    }

    const Vec& step_rewards() const { return rewards_; }

    double mean_return() const {
        if (returns_.empty()) throw std::invalid_argument("StateDataset: no episodes");
        return mean(returns_);
    }

    void append(const StateDataset& other) {
        if (other.dim_ != dim_) throw std::invalid_argument("StateDataset::append: dimension mismatch");
        states_.insert(states_.end(), other.states_.begin(), other.states_.end());
        episode_lengths_.insert(episode_lengths_.end(), other.episode_lengths_.begin(),
                                other.episode_lengths_.end());
        returns_.insert(returns_.end(), other.returns_.begin(), other.returns_.end());
        rewards_.insert(rewards_.end(), other.rewards_.begin(), other.rewards_.end());
    }

    // New dataset containing the given episodes, in the given order.
    StateDataset select_episodes(const std::vector<std::size_t>& episode_ids) const {
        StateDataset out(dim_);
        std::vector<std::size_t> offsets(episode_lengths_.size() + 1, 0);
        for (std::size_t e = 0; e < episode_lengths_.size(); ++e)
            offsets[e + 1] = offsets[e] + episode_lengths_[e];
        for (std::size_t e : episode_ids) {
            if (e >= episode_lengths_.size())
                throw std::out_of_range("select_episodes: bad episode id");
            out.begin_episode();
            for (std::size_t i = offsets[e]; i < offsets[e + 1]; ++i)
                out.add_state(states_[i], rewards_[i]);
        }
        return out;
    }

    StateDataset sample_episodes(std::size_t count, Rng& rng) const {
        if (episode_count() == 0) throw std::invalid_argument("sample_episodes: empty dataset");
        std::vector<std::size_t> ids(count);
        for (std::size_t i = 0; i < count; ++i) ids[i] = rng.uniform_int(episode_count());
        return select_episodes(ids);
    }

    StateDataset with_noise(double sigma, Rng& rng) const {
        StateDataset out(dim_);
        std::size_t idx = 0;
        for (std::size_t e = 0; e < episode_lengths_.size(); ++e) {
            out.begin_episode();
            for (std::size_t i = 0; i < episode_lengths_[e]; ++i, ++idx) {
                Vec s = states_[idx];
                for (double& v : s) v += sigma * rng.normal();
                out.add_state(s, rewards_[idx]);
            }
        }
        return out;
    }

    // CSV format: header `episode,step,reward,s0,...,s{d-1}`, rows sorted by
    // (episode, step), one row per recorded state.
    std::string to_csv() const {
        std::string out = "episode,step,reward";
        for (std::size_t j = 0; j < dim_; ++j) out += ",s" + std::to_string(j);
        out += "\n";
        std::size_t idx = 0;
        for (std::size_t e = 0; e < episode_lengths_.size(); ++e) {
            for (std::size_t t = 0; t < episode_lengths_[e]; ++t, ++idx) {
                out += std::to_string(e) + "," + std::to_string(t) + "," + format_num(rewards_[idx]);
                for (std::size_t j = 0; j < dim_; ++j) out += "," + format_num(states_[idx][j]);
                out += "\n";
            }
        }
        return out;
    }

    static StateDataset from_csv(const std::string& text) {
        std::stringstream ss(text);
        std::string line;
        if (!std::getline(ss, line)) throw std::runtime_error("trajectory CSV: empty file");
        auto header = split_csv_line(line);
        if (header.size() < 4 || header[0] != "episode" || header[1] != "step" ||
            header[2] != "reward")
            throw std::runtime_error("trajectory CSV: bad header");
        std::size_t d = header.size() - 3;
        StateDataset ds(d);
        long last_episode = -1;
        while (std::getline(ss, line)) {
            if (line.empty()) continue;
            auto fields = split_csv_line(line);
            if (fields.size() != d + 3) throw std::runtime_error("trajectory CSV: bad row width");
            long episode = std::stol(fields[0]);
            if (episode != last_episode) {
                if (episode != last_episode + 1)
                    throw std::runtime_error("trajectory CSV: episodes out of order");
                ds.begin_episode();
                last_episode = episode;
            }
            double reward = parse_num(fields[2]);
            Vec s(d);
            for (std::size_t j = 0; j < d; ++j) s[j] = parse_num(fields[3 + j]);
            ds.add_state(s, reward);
        }
        return ds;
    }

    static StateDataset load(const std::filesystem::path& path) {
        return from_csv(read_file(path));
    }

    void save(const std::filesystem::path& path) const { atomic_write(path, to_csv()); }

private:
    std::size_t dim_ = 0;
    std::vector<Vec> states_;
    std::vector<std::size_t> episode_lengths_;
    Vec returns_; // per episode
    Vec rewards_; // per recorded state
};

inline StateDataset pool_datasets(const std::vector<StateDataset>& datasets) {
    if (datasets.empty()) throw std::invalid_argument("pool_datasets: empty list");
    StateDataset out(datasets.front().dim());
    for (const auto& d : datasets) out.append(d);
    return out;
}

} // namespace polbc
