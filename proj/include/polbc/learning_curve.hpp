#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polbc/io.hpp"
#include "polbc/math.hpp"

namespace polbc {

// Per-iteration training trace. `aux` holds the constraint-stop flag for the
// trust-region trainer and the best population return for ES.
struct LearningCurve {
    Vec mean_returns;
    Vec aux;
    std::uint64_t seed = 0;

    std::string to_csv() const {
        std::string out = "iteration,mean_return,aux\n";
        for (std::size_t i = 0; i < mean_returns.size(); ++i)
            out += std::to_string(i) + "," + format_num(mean_returns[i]) + "," +
                   format_num(i < aux.size() ? aux[i] : 0.0) + "\n";
        return out;
    }

    double auc() const {
        double s = 0.0;
        for (double v : mean_returns) s += v;
        return s;
    }
};

} // namespace polbc
