#pragma once

// Closed-form optimal denoiser over an empirical dataset: softmax-weighted
// posterior mean with log-sum-exp weighting, the derived noise prediction
// eps*, the score, and the exact mixture log-density.
//
// All public entry points funnel into one block evaluator that processes R
// queries at once via two GEMMs (X*Y^T and W*Y). Evaluation is pure and the
// dataset immutable, so concurrent calls need no synchronization; results for
// a given block shape are bitwise reproducible.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "stagecut/dataset.hpp"
#include "stagecut/error.hpp"
#include "stagecut/schedule.hpp"

namespace stagecut {

struct DenoiserOptions {
    // Return the argmax dataset point as y_hat when its softmax weight exceeds
    // 1 - 1e-12. Must agree with the exact path within 1e-9.
    bool nn_shortcut = false;
};

struct PosteriorMean {
    std::vector<double> y_hat;
    double log_partition = 0.0;   // log sum of unnormalized weights
    double max_log_weight = 0.0;  // largest logit
};

struct DenoiserEval {
    std::vector<double> eps_star;
    std::vector<double> y_hat;
    double log_partition = 0.0;
    double max_log_weight = 0.0;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatMap = Eigen::Map<const RowMat>;

// Evaluates R denoiser queries against the whole dataset. Inputs are row-major
// R x n queries with per-row kernel parameters; outputs are written per row.
// Any output pointer may be null to skip it.
inline void eval_block(const Dataset& d, const double* x, const double* s_row,
                       const double* sigma_row, std::size_t rows, const DenoiserOptions& opt,
                       double* eps_out, double* y_hat_out, double* log_partition_out,
                       double* max_log_weight_out) {
    const auto N = static_cast<Eigen::Index>(d.size());
    const auto n = static_cast<Eigen::Index>(d.dim());
    const auto R = static_cast<Eigen::Index>(rows);
    for (std::size_t b = 0; b < rows; ++b)
        if (!(sigma_row[b] > 0.0))
            throw std::domain_error("denoiser: degenerate kernel (sigma must be > 0)");

    RowMatMap Y(d.data(), N, n);
    RowMatMap X(x, R, n);

    // Logits L(b,i) = -(|x_b|^2 - 2 s_b <x_b, y_i> + s_b^2 |y_i|^2) / (2 s_b^2 sigma_b^2),
    // built from one GEMM; the buffer is then reused for the softmax weights.
    RowMat L = X * Y.transpose();
    Eigen::Map<const Eigen::VectorXd> q(d.sq_norms().data(), N);

    RowMat W(R, n); // weighted posterior means, one row per query
    std::vector<double> inv_norm(rows);
    for (Eigen::Index b = 0; b < R; ++b) {
        const double s = s_row[b];
        const double sig = sigma_row[b];
        const double inv2 = 1.0 / (2.0 * s * s * sig * sig);
        double xx = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) xx += X(b, j) * X(b, j);

        double m = -std::numeric_limits<double>::infinity();
        Eigen::Index argmax = 0;
        for (Eigen::Index i = 0; i < N; ++i) {
            const double logit = -(xx - 2.0 * s * L(b, i) + s * s * q(i)) * inv2;
            L(b, i) = logit;
            if (logit > m) {
                m = logit;
                argmax = i;
            }
        }
        double total = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) {
            const double e = L(b, i) - m;
            const double w = e < -745.0 ? 0.0 : std::exp(e);
            L(b, i) = w;
            total += w;
        }
        if (log_partition_out) log_partition_out[b] = m + std::log(total);
        if (max_log_weight_out) max_log_weight_out[b] = m;
        inv_norm[b] = 1.0 / total;
        if (opt.nn_shortcut && 1.0 >= (1.0 - 1e-12) * total) {
            // Argmax weight exceeds 1 - 1e-12 of the mass: short-circuit.
            W.row(b) = Y.row(argmax);
            L.row(b).setZero();
            inv_norm[b] = 0.0; // row already final; skip the GEMM contribution
        }
    }

    RowMat G = L * Y; // R x n unnormalized weighted sums
    for (Eigen::Index b = 0; b < R; ++b) {
        if (inv_norm[b] != 0.0) W.row(b) = G.row(b) * inv_norm[b];
        const double s = s_row[b];
        const double inv_ssig = 1.0 / (s * sigma_row[b]);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (y_hat_out) y_hat_out[b * n + j] = W(b, j);
            if (eps_out) eps_out[b * n + j] = (X(b, j) - s * W(b, j)) * inv_ssig;
        }
    }
}

inline void check_query(const Dataset& d, const std::vector<double>& x) {
    if (x.size() != d.dim())
        throw std::invalid_argument("denoiser: query dimension " + std::to_string(x.size()) +
                                    " != dataset dimension " + std::to_string(d.dim()));
}

} // namespace detail

inline PosteriorMean posterior_mean(const Dataset& d, const KernelParams& k,
                                    const std::vector<double>& x,
                                    const DenoiserOptions& opt = {}) {
    detail::check_query(d, x);
    PosteriorMean out;
    out.y_hat.resize(d.dim());
    detail::eval_block(d, x.data(), &k.s, &k.sigma, 1, opt, nullptr, out.y_hat.data(),
                       &out.log_partition, &out.max_log_weight);
    return out;
}

inline DenoiserEval optimal_eps(const Dataset& d, const KernelParams& k,
                                const std::vector<double>& x, const DenoiserOptions& opt = {}) {
    detail::check_query(d, x);
    DenoiserEval out;
    out.eps_star.resize(d.dim());
    out.y_hat.resize(d.dim());
    detail::eval_block(d, x.data(), &k.s, &k.sigma, 1, opt, out.eps_star.data(),
                       out.y_hat.data(), &out.log_partition, &out.max_log_weight);
    return out;
}

// score(x) = -eps*/(s*sigma) = grad_x log p_t for the Gaussian-mixture marginal.
inline std::vector<double> score(const Dataset& d, const KernelParams& k,
                                 const std::vector<double>& x, const DenoiserOptions& opt = {}) {
    auto eval = optimal_eps(d, k, x, opt);
    const double c = -1.0 / (k.s * k.sigma);
    for (auto& v : eval.eps_star) v *= c;
    return std::move(eval.eps_star);
}

// Exact mixture log-density: log-sum-exp of the component logits plus the
// shared Gaussian normalizer and the 1/N mixture weight.
inline double log_density(const Dataset& d, const KernelParams& k, const std::vector<double>& x) {
    const auto pm = posterior_mean(d, k, x);
    const double n = static_cast<double>(d.dim());
    return pm.log_partition - 0.5 * n * std::log(2.0 * std::numbers::pi * k.s * k.s * k.sigma * k.sigma) -
           std::log(static_cast<double>(d.size()));
}

} // namespace stagecut
