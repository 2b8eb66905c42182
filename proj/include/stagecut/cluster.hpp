#pragma once

// Interval-partition solvers over a sample store: the three-interval threshold
// search, the exact n-interval dynamic program over a candidate grid, and the
// uniform-t / uniform-logSNR baselines.
//
// Order independence: before any floating-point accumulation the samples are
// brought into a canonical sort order, so permuting the store cannot change a
// single bit of any result.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "stagecut/error.hpp"
#include "stagecut/schedule.hpp"
#include "stagecut/similarity.hpp"

namespace stagecut {

enum class PartitionMethod {
    optimal_denoiser_3,
    optimal_denoiser_n,
    uniform_t,
    uniform_logsnr,
};

inline const char* to_string(PartitionMethod m) {
    switch (m) {
        case PartitionMethod::optimal_denoiser_3: return "optimal-denoiser-3";
        case PartitionMethod::optimal_denoiser_n: return "optimal-denoiser-n";
        case PartitionMethod::uniform_t: return "uniform-t";
        case PartitionMethod::uniform_logsnr: return "uniform-logsnr";
    }
    return "?";
}

struct Partition {
    std::vector<double> cuts; // interior boundaries, strictly increasing, in (0,1)
    std::size_t n_intervals = 0;
    PartitionMethod method = PartitionMethod::optimal_denoiser_3;
    std::map<std::string, std::string> config_echo;
};

struct GridSpec {
    std::vector<double> points; // strictly increasing candidate times in (0,1]

    static GridSpec uniform(std::size_t count, double lo = 1e-3, double hi = 1.0) {
        if (count < 1) throw std::invalid_argument("GridSpec: count must be >= 1");
        GridSpec g;
        g.points.reserve(count);
        for (std::size_t i = 1; i <= count; ++i)
            g.points.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count));
        g.validate();
        return g;
    }

    // start, start+step, ... (count points), optionally with 1.0 appended.
    static GridSpec stepped(double start, double step, std::size_t count, bool append_one) {
        GridSpec g;
        g.points.reserve(count + 1);
        for (std::size_t j = 0; j < count; ++j)
            g.points.push_back(start + step * static_cast<double>(j));
        if (append_one) g.points.push_back(1.0);
        g.validate();
        return g;
    }

    void validate() const {
        if (points.empty()) throw std::invalid_argument("GridSpec: empty grid");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!(points[i] > 0.0 && points[i] <= 1.0))
                throw std::invalid_argument("GridSpec: points must lie in (0,1]");
            if (i > 0 && !(points[i] > points[i - 1]))
                throw std::invalid_argument("GridSpec: points must be strictly increasing");
        }
    }
};

struct ThreeIntervalResult {
    Partition partition;
    double t1 = 0.0;
    double t2 = 0.0;
    double mean_s0 = 0.0; // achieved mean of s0 over {t_k <= t1}
    double mean_s1 = 0.0; // achieved mean of s1 over {t_k >= t2}
};

enum class NIntervalObjective { within_dissimilarity, within_similarity_literal };

struct NIntervalResult {
    Partition partition;
    double objective = 0.0;
};

// t1 = largest grid tau (< 1) with mean{s0 : t_k <= tau} >= alpha, t2 = smallest
// grid tau (< 1) with mean{s1 : t_k >= tau} >= alpha; both require at least
// min_support qualifying samples.
inline ThreeIntervalResult solve_three_interval(std::vector<EndpointSample> store, double alpha,
                                                const GridSpec& grid,
                                                std::size_t min_support = 10) {
    if (store.empty()) throw std::invalid_argument("solve_three_interval: empty store");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("solve_three_interval: alpha must lie in (0,1]");
    grid.validate();

    // Canonical order: FP prefix/suffix sums become permutation-independent.
    std::sort(store.begin(), store.end(), [](const EndpointSample& a, const EndpointSample& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.s0 != b.s0) return a.s0 < b.s0;
        return a.s1 < b.s1;
    });
    const std::size_t K = store.size();
    std::vector<double> t(K);
    for (std::size_t i = 0; i < K; ++i) t[i] = store[i].t;
    std::vector<double> pre_s0(K + 1, 0.0), suf_s1(K + 1, 0.0);
    for (std::size_t i = 0; i < K; ++i) pre_s0[i + 1] = pre_s0[i] + store[i].s0;
    for (std::size_t i = K; i-- > 0;) suf_s1[i] = suf_s1[i + 1] + store[i].s1;

    double t1 = -1.0, t2 = -1.0, mean0 = 0.0, mean1 = 0.0;
    double best0 = -1.0, best1 = -1.0;
    for (const double tau : grid.points) {
        if (!(tau < 1.0)) continue; // cuts must stay strictly inside (0,1)
        const auto le = static_cast<std::size_t>(
            std::upper_bound(t.begin(), t.end(), tau) - t.begin());
        if (le >= min_support) {
            const double m = pre_s0[le] / static_cast<double>(le);
            best0 = std::max(best0, m);
            if (m >= alpha) {
                t1 = tau; // ascending scan: ends at the largest feasible tau
                mean0 = m;
            }
        }
        const auto ge_from = static_cast<std::size_t>(
            std::lower_bound(t.begin(), t.end(), tau) - t.begin());
        const std::size_t ge = K - ge_from;
        if (ge >= min_support) {
            const double m = suf_s1[ge_from] / static_cast<double>(ge);
            best1 = std::max(best1, m);
            if (m >= alpha && t2 < 0.0) t2 = tau, mean1 = m; // smallest feasible tau
        }
    }
    if (t1 < 0.0)
        throw InfeasibleError("solve_three_interval: no feasible t1 (best mean s0 = " +
                              std::to_string(best0) + " < alpha = " + std::to_string(alpha) + ")");
    if (t2 < 0.0)
        throw InfeasibleError("solve_three_interval: no feasible t2 (best mean s1 = " +
                              std::to_string(best1) + " < alpha = " + std::to_string(alpha) + ")");
    if (!(t1 < t2))
        throw DegeneratePartitionError("solve_three_interval: t1 = " + std::to_string(t1) +
                                       " >= t2 = " + std::to_string(t2));

    ThreeIntervalResult res;
    res.t1 = t1;
    res.t2 = t2;
    res.mean_s0 = mean0;
    res.mean_s1 = mean1;
    res.partition.cuts = {t1, t2};
    res.partition.n_intervals = 3;
    res.partition.method = PartitionMethod::optimal_denoiser_3;
    res.partition.config_echo = {{"alpha", std::to_string(alpha)},
                                 {"min_support", std::to_string(min_support)},
                                 {"grid_points", std::to_string(grid.points.size())},
                                 {"k_samples", std::to_string(K)}};
    return res;
}

// Exact n-interval DP. Boundaries are {0} + {grid points < 1} + {1}; a choice
// of n-1 interior boundaries splits [0,1] into half-open intervals (the last
// one closed). Cost of a partition: sum of d_k over samples whose two times
// land in one interval, d_k = 1 - s_k by default, d_k = s_k under the literal
// objective. Ties break toward the lexicographically smallest cut vector.
inline NIntervalResult solve_n_interval(
    const std::vector<PairSample>& store, std::size_t n, const GridSpec& grid,
    NIntervalObjective objective = NIntervalObjective::within_dissimilarity) {
    if (store.empty()) throw std::invalid_argument("solve_n_interval: empty store");
    if (n < 2) throw std::invalid_argument("solve_n_interval: n must be >= 2");
    grid.validate();

    std::vector<double> bounds;
    bounds.push_back(0.0);
    for (const double g : grid.points)
        if (g < 1.0) bounds.push_back(g);
    bounds.push_back(1.0);
    const std::size_t m = bounds.size() - 1; // highest boundary index; m intervals available
    if (n > m)
        throw std::invalid_argument("solve_n_interval: n = " + std::to_string(n) +
                                    " exceeds the " + std::to_string(m) +
                                    " intervals the grid can host");
    if (m + 1 > 4096)
        throw std::invalid_argument("solve_n_interval: grid too large for the dense cost table "
                                    "(cap 4096 boundaries)");

    // Sample (lo,hi) lies in segment [b_u, b_v) iff u <= a and e <= v, with
    // a = last boundary <= lo and e = first boundary > hi (e = m when hi = 1,
    // matching the closed last interval).
    struct Cell { std::size_t a, e; double d; };
    std::vector<Cell> cells;
    cells.reserve(store.size());
    for (const auto& p : store) {
        const double lo = std::min(p.t_a, p.t_b);
        const double hi = std::max(p.t_a, p.t_b);
        if (!(lo >= 0.0 && hi <= 1.0))
            throw std::invalid_argument("solve_n_interval: sample times outside [0,1]");
        const auto a = static_cast<std::size_t>(
            std::upper_bound(bounds.begin(), bounds.end(), lo) - bounds.begin() - 1);
        auto e = static_cast<std::size_t>(
            std::upper_bound(bounds.begin(), bounds.end(), hi) - bounds.begin());
        if (e > m) e = m; // hi == 1
        const double d =
            objective == NIntervalObjective::within_dissimilarity ? 1.0 - p.s : p.s;
        cells.push_back({a, e, d});
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) {
        if (x.a != y.a) return x.a < y.a;
        if (x.e != y.e) return x.e < y.e;
        return x.d < y.d;
    });

    // C[a][e] = sum of d over cells with a' >= a, e' <= e  =>  W(u,v) = C[u][v].
    const std::size_t B = m + 1;
    std::vector<double> C(B * B, 0.0);
    for (const auto& c : cells) C[c.a * B + c.e] += c.d;
    for (std::size_t a = B; a-- > 0;) {
        for (std::size_t e = 0; e < B; ++e) {
            double v = C[a * B + e];
            if (a + 1 < B) v += C[(a + 1) * B + e];
            if (e > 0) v += C[a * B + e - 1];
            if (a + 1 < B && e > 0) v -= C[(a + 1) * B + e - 1];
            C[a * B + e] = v;
        }
    }
    const auto W = [&](std::size_t u, std::size_t v) { return C[u * B + v]; };

    // f[j][v]: best cost covering [0, b_v] with j intervals, plus the explicit
    // boundary-index path so ties resolve on the full cut vector.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> f(n + 1, std::vector<double>(B, inf));
    std::vector<std::vector<std::vector<std::size_t>>> path(
        n + 1, std::vector<std::vector<std::size_t>>(B));
    for (std::size_t v = 1; v <= m; ++v) f[1][v] = W(0, v);
    for (std::size_t j = 2; j <= n; ++j) {
        for (std::size_t v = j; v <= m; ++v) {
            double best = inf;
            std::vector<std::size_t> best_path;
            for (std::size_t u = j - 1; u < v; ++u) {
                if (f[j - 1][u] == inf) continue;
                const double cand = f[j - 1][u] + W(u, v);
                if (cand > best) continue;
                std::vector<std::size_t> cand_path = path[j - 1][u];
                cand_path.push_back(u);
                if (cand < best || cand_path < best_path) {
                    best = cand;
                    best_path = std::move(cand_path);
                }
            }
            f[j][v] = best;
            path[j][v] = std::move(best_path);
        }
    }

    NIntervalResult res;
    res.objective = f[n][m];
    res.partition.n_intervals = n;
    res.partition.method = PartitionMethod::optimal_denoiser_n;
    for (const std::size_t u : path[n][m]) res.partition.cuts.push_back(bounds[u]);
    res.partition.config_echo = {
        {"n", std::to_string(n)},
        {"objective", objective == NIntervalObjective::within_dissimilarity
                          ? "within-dissimilarity"
                          : "within-similarity-literal"},
        {"grid_points", std::to_string(grid.points.size())},
        {"k_samples", std::to_string(store.size())}};
    return res;
}

namespace detail {

// Nearest grid point strictly below 1, ties toward the smaller point.
inline double snap_to_grid(const GridSpec& grid, double target) {
    double best = -1.0, best_dist = std::numeric_limits<double>::infinity();
    for (const double g : grid.points) {
        if (!(g < 1.0)) continue;
        const double dist = std::abs(g - target);
        if (dist < best_dist) best = g, best_dist = dist;
    }
    if (best < 0.0)
        throw std::invalid_argument("snap_to_grid: grid has no points below 1");
    return best;
}

inline void check_increasing_cuts(const std::vector<double>& cuts) {
    for (std::size_t i = 1; i < cuts.size(); ++i)
        if (!(cuts[i] > cuts[i - 1]))
            throw DegeneratePartitionError(
                "baseline: cuts collapse onto the same grid point (grid too coarse)");
}

} // namespace detail

inline Partition baseline_uniform_t(std::size_t n, const GridSpec& grid) {
    if (n < 2) throw std::invalid_argument("baseline_uniform_t: n must be >= 2");
    grid.validate();
    Partition p;
    p.n_intervals = n;
    p.method = PartitionMethod::uniform_t;
    for (std::size_t i = 1; i < n; ++i)
        p.cuts.push_back(detail::snap_to_grid(
            grid, static_cast<double>(i) / static_cast<double>(n)));
    detail::check_increasing_cuts(p.cuts);
    p.config_echo = {{"n", std::to_string(n)},
                     {"grid_points", std::to_string(grid.points.size())}};
    return p;
}

// Equal division of the log-SNR range; cuts at grid points nearest the t of
// each interior boundary.
inline Partition baseline_uniform_logsnr(std::size_t n, const VpSchedule& sched,
                                         const GridSpec& grid) {
    if (n < 2) throw std::invalid_argument("baseline_uniform_logsnr: n must be >= 2");
    grid.validate();
    const double log_hi = std::log(snr(sched, sched.t_min()));
    const double log_lo = std::log(snr(sched, 1.0));
    Partition p;
    p.n_intervals = n;
    p.method = PartitionMethod::uniform_logsnr;
    for (std::size_t i = 1; i < n; ++i) {
        const double target_log =
            log_hi + (log_lo - log_hi) * static_cast<double>(i) / static_cast<double>(n);
        const double t = t_of_snr(sched, std::exp(target_log));
        p.cuts.push_back(detail::snap_to_grid(grid, t));
    }
    detail::check_increasing_cuts(p.cuts);
    p.config_echo = {{"n", std::to_string(n)},
                     {"grid_points", std::to_string(grid.points.size())}};
    return p;
}

} // namespace stagecut
