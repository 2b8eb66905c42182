#pragma once

// Compute accounting: per-stage GFLOPs averaged with NFE weights, and total
// training PFLOPs with the half-up 2-decimal rounding the comparison tables use.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace stagecut {

struct StageBudget {
    double gflops_per_eval = 0.0;
    std::size_t nfe_steps = 0;
};

struct TrainingBudget {
    double iterations = 0.0;
    double gflops_per_eval = 0.0;
};

inline double weighted_gflops(const std::vector<StageBudget>& stages) {
    if (stages.empty()) throw std::invalid_argument("weighted_gflops: no stages");
    double num = 0.0;
    std::size_t den = 0;
    for (const auto& st : stages) {
        if (!(st.gflops_per_eval > 0.0))
            throw std::invalid_argument("weighted_gflops: gflops_per_eval must be > 0");
        num += st.gflops_per_eval * static_cast<double>(st.nfe_steps);
        den += st.nfe_steps;
    }
    if (den == 0) throw std::invalid_argument("weighted_gflops: total NFE steps is zero");
    return num / static_cast<double>(den);
}

inline double training_pflops(const TrainingBudget& b) {
    if (!(b.iterations > 0.0 && b.gflops_per_eval > 0.0))
        throw std::invalid_argument("training_pflops: iterations and gflops must be > 0");
    return b.iterations * b.gflops_per_eval * 1e-6;
}

// Half-up rounding to 2 decimals, the convention of the comparison tables.
inline double round2(double v) { return std::floor(v * 100.0 + 0.5) / 100.0; }

} // namespace stagecut
