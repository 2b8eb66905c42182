#pragma once

// Per-sample functional similarity of the optimal denoiser across times, and
// the Monte-Carlo studies behind the interval solvers: endpoint comparisons
// (threshold search) and random pair comparisons (n-interval optimization).
//
// Reproducibility contract: every random quantity of sample k comes from the
// counter-based substream (seed, k, slot), and samples are evaluated in fixed
// blocks of kBlockSamples regardless of thread count, so stores are byte-
// identical across runs and parallelism levels.

#include <array>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "stagecut/dataset.hpp"
#include "stagecut/denoiser.hpp"
#include "stagecut/error.hpp"
#include "stagecut/rng.hpp"
#include "stagecut/schedule.hpp"

namespace stagecut {

struct SimilarityConfig {
    double eta = 2.0 / 256.0;
    std::size_t k_samples = 50000;
    std::uint64_t seed = 0;
    double t_lo = 1e-3;
    double t_hi = 1.0;
};

struct EndpointSample {
    std::size_t k = 0;
    double t = 0.0;
    double s0 = 0.0; // agreement with the t_lo endpoint
    double s1 = 0.0; // agreement with the t_hi endpoint
};

struct PairSample {
    std::size_t k = 0;
    double t_a = 0.0;
    double t_b = 0.0;
    double s = 0.0;
};

// Fraction of coordinates on which a and b agree within eta (inclusive).
inline double coord_agreement(const double* a, const double* b, std::size_t n, double eta) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(a[i] - b[i]) <= eta) ++hits;
    return static_cast<double>(hits) / static_cast<double>(n);
}

inline double coord_agreement(const std::vector<double>& a, const std::vector<double>& b,
                              double eta) {
    if (a.size() != b.size())
        throw std::invalid_argument("coord_agreement: dimension mismatch");
    if (!(eta > 0.0)) throw std::invalid_argument("coord_agreement: eta must be > 0");
    return coord_agreement(a.data(), b.data(), a.size(), eta);
}

namespace detail {

inline constexpr std::size_t kBlockSamples = 64;

inline void check_similarity_args(const Dataset&, double t_min, const SimilarityConfig& cfg) {
    if (!(cfg.eta > 0.0)) throw std::invalid_argument("similarity: eta must be > 0");
    if (cfg.k_samples < 1) throw std::invalid_argument("similarity: k_samples must be >= 1");
    if (!(cfg.t_lo >= t_min && cfg.t_lo < cfg.t_hi && cfg.t_hi <= 1.0))
        throw std::invalid_argument("similarity: need t_min <= t_lo < t_hi <= 1");
}

// Evaluates samples [k0, k1) of the endpoint study: each sample contributes
// three denoiser queries (t_k, t_lo, t_hi) sharing one (y, eps) draw.
template <class Schedule>
void endpoint_block(const Dataset& d, const Schedule& sched, const SimilarityConfig& cfg,
                    std::size_t k0, std::size_t k1, EndpointSample* out) {
    const std::size_t n = d.dim();
    const std::size_t cnt = k1 - k0;
    RowMat X(3 * cnt, n);
    std::vector<double> s_row(3 * cnt), sig_row(3 * cnt), t_of(cnt), eps(n);
    const KernelParams klo = kernel_at(sched, cfg.t_lo);
    const KernelParams khi = kernel_at(sched, cfg.t_hi);
    for (std::size_t i = 0; i < cnt; ++i) {
        const std::size_t k = k0 + i;
        const std::size_t idx =
            rng::uniform_index({cfg.seed, k, rng::Slot::data_index}, 0, d.size());
        const rng::StreamKey noise{cfg.seed, k, rng::Slot::noise_vector};
        for (std::size_t j = 0; j < n; ++j) eps[j] = rng::standard_normal_at(noise, j);
        const double u = rng::uniform_at({cfg.seed, k, rng::Slot::time_a}, 0);
        const double t = cfg.t_lo + (cfg.t_hi - cfg.t_lo) * u;
        t_of[i] = t;
        const KernelParams kt = kernel_at(sched, t);
        const double* y = d.point(idx);
        const KernelParams ks[3] = {kt, klo, khi};
        for (int r = 0; r < 3; ++r) {
            const auto row = static_cast<Eigen::Index>(3 * i + r);
            s_row[3 * i + r] = ks[r].s;
            sig_row[3 * i + r] = ks[r].sigma;
            for (std::size_t j = 0; j < n; ++j)
                X(row, static_cast<Eigen::Index>(j)) = ks[r].s * y[j] + ks[r].s * ks[r].sigma * eps[j];
        }
    }
    RowMat E(3 * cnt, n);
    eval_block(d, X.data(), s_row.data(), sig_row.data(), 3 * cnt, {}, E.data(), nullptr,
               nullptr, nullptr);
    for (std::size_t i = 0; i < cnt; ++i) {
        const double* et = E.data() + (3 * i + 0) * n;
        const double* elo = E.data() + (3 * i + 1) * n;
        const double* ehi = E.data() + (3 * i + 2) * n;
        out[i] = {k0 + i, t_of[i], coord_agreement(et, elo, n, cfg.eta),
                  coord_agreement(et, ehi, n, cfg.eta)};
    }
}

// Pair-study analog: two queries per sample at independently drawn times.
template <class Schedule>
void pair_block(const Dataset& d, const Schedule& sched, const SimilarityConfig& cfg,
                std::size_t k0, std::size_t k1, PairSample* out) {
    const std::size_t n = d.dim();
    const std::size_t cnt = k1 - k0;
    RowMat X(2 * cnt, n);
    std::vector<double> s_row(2 * cnt), sig_row(2 * cnt), ta(cnt), tb(cnt), eps(n);
    for (std::size_t i = 0; i < cnt; ++i) {
        const std::size_t k = k0 + i;
        const std::size_t idx =
            rng::uniform_index({cfg.seed, k, rng::Slot::data_index}, 0, d.size());
        const rng::StreamKey noise{cfg.seed, k, rng::Slot::noise_vector};
        for (std::size_t j = 0; j < n; ++j) eps[j] = rng::standard_normal_at(noise, j);
        const double span = cfg.t_hi - cfg.t_lo;
        ta[i] = cfg.t_lo + span * rng::uniform_at({cfg.seed, k, rng::Slot::time_a}, 0);
        tb[i] = cfg.t_lo + span * rng::uniform_at({cfg.seed, k, rng::Slot::time_b}, 0);
        const double* y = d.point(idx);
        const KernelParams ks[2] = {kernel_at(sched, ta[i]), kernel_at(sched, tb[i])};
        for (int r = 0; r < 2; ++r) {
            const auto row = static_cast<Eigen::Index>(2 * i + r);
            s_row[2 * i + r] = ks[r].s;
            sig_row[2 * i + r] = ks[r].sigma;
            for (std::size_t j = 0; j < n; ++j)
                X(row, static_cast<Eigen::Index>(j)) = ks[r].s * y[j] + ks[r].s * ks[r].sigma * eps[j];
        }
    }
    RowMat E(2 * cnt, n);
    eval_block(d, X.data(), s_row.data(), sig_row.data(), 2 * cnt, {}, E.data(), nullptr,
               nullptr, nullptr);
    for (std::size_t i = 0; i < cnt; ++i)
        out[i] = {k0 + i, ta[i], tb[i],
                  coord_agreement(E.data() + (2 * i) * n, E.data() + (2 * i + 1) * n, n, cfg.eta)};
}

// Runs fn(block_index) over [0, n_blocks) from `threads` workers pulling block
// indices off a shared counter; block-to-result mapping is index-based, so the
// assembled output cannot depend on scheduling.
template <class Fn>
void parallel_blocks(std::size_t n_blocks, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_blocks));
    if (threads <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1))
                    fn(b);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace detail

template <class Schedule>
EndpointSample endpoint_sample(const Dataset& d, const Schedule& sched,
                               const SimilarityConfig& cfg, std::size_t k) {
    detail::check_similarity_args(d, sched.t_min(), cfg);
    if (k >= cfg.k_samples)
        throw std::invalid_argument("endpoint_sample: index k out of range");
    EndpointSample out;
    detail::endpoint_block(d, sched, cfg, k, k + 1, &out);
    return out;
}

template <class Schedule>
std::vector<EndpointSample> run_endpoint_study(const Dataset& d, const Schedule& sched,
                                               const SimilarityConfig& cfg,
                                               unsigned threads = 0) {
    detail::check_similarity_args(d, sched.t_min(), cfg);
    std::vector<EndpointSample> store(cfg.k_samples);
    const std::size_t nb =
        (cfg.k_samples + detail::kBlockSamples - 1) / detail::kBlockSamples;
    detail::parallel_blocks(nb, threads, [&](std::size_t b) {
        const std::size_t k0 = b * detail::kBlockSamples;
        const std::size_t k1 = std::min(cfg.k_samples, k0 + detail::kBlockSamples);
        detail::endpoint_block(d, sched, cfg, k0, k1, store.data() + k0);
    });
    return store;
}

template <class Schedule>
PairSample pair_sample(const Dataset& d, const Schedule& sched, const SimilarityConfig& cfg,
                       std::size_t k) {
    detail::check_similarity_args(d, sched.t_min(), cfg);
    if (k >= cfg.k_samples) throw std::invalid_argument("pair_sample: index k out of range");
    PairSample out;
    detail::pair_block(d, sched, cfg, k, k + 1, &out);
    return out;
}

template <class Schedule>
std::vector<PairSample> run_pair_study(const Dataset& d, const Schedule& sched,
                                       const SimilarityConfig& cfg, unsigned threads = 0) {
    detail::check_similarity_args(d, sched.t_min(), cfg);
    std::vector<PairSample> store(cfg.k_samples);
    const std::size_t nb =
        (cfg.k_samples + detail::kBlockSamples - 1) / detail::kBlockSamples;
    detail::parallel_blocks(nb, threads, [&](std::size_t b) {
        const std::size_t k0 = b * detail::kBlockSamples;
        const std::size_t k1 = std::min(cfg.k_samples, k0 + detail::kBlockSamples);
        detail::pair_block(d, sched, cfg, k0, k1, store.data() + k0);
    });
    return store;
}

// --- store persistence -------------------------------------------------------
// CSV with fixed headers; doubles at 17 significant digits so values round-trip
// bit-exactly through the file.

inline void write_endpoint_store(const std::vector<EndpointSample>& store,
                                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("write_endpoint_store: cannot open " + path);
    out << "k,t,s0,s1\n";
    char buf[128];
    for (const auto& s : store) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", s.k, s.t, s.s0, s.s1);
        out << buf;
    }
}

inline void write_pair_store(const std::vector<PairSample>& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("write_pair_store: cannot open " + path);
    out << "k,t_a,t_b,s\n";
    char buf[128];
    for (const auto& s : store) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", s.k, s.t_a, s.t_b, s.s);
        out << buf;
    }
}

namespace detail {

inline std::vector<std::array<double, 4>> read_store_rows(const std::string& path,
                                                          const std::string& header) {
    std::ifstream in(path);
    if (!in) throw FormatError("read store: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("read store: " + path + " is empty");
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header)
        throw FormatError("read store: " + path + ": expected header '" + header + "', got '" +
                          line + "'");
    std::vector<std::array<double, 4>> rows;
    std::size_t rno = 0;
    while (std::getline(in, line)) {
        while (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++rno;
        std::array<double, 4> vals{};
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int c = 0; c < 4; ++c) {
            const auto res = std::from_chars(p, end, vals[c]);
            if (res.ec != std::errc())
                throw FormatError("read store: " + path + ": bad value at row " +
                                  std::to_string(rno) + ", column " + std::to_string(c));
            p = res.ptr;
            if (c < 3) {
                if (p == end || *p != ',')
                    throw FormatError("read store: " + path + ": expected ',' at row " +
                                      std::to_string(rno));
                ++p;
            }
        }
        if (p != end)
            throw FormatError("read store: " + path + ": trailing characters at row " +
                              std::to_string(rno));
        rows.push_back(vals);
    }
    if (rows.empty()) throw FormatError("read store: " + path + " has no data rows");
    return rows;
}

} // namespace detail

inline std::vector<EndpointSample> read_endpoint_store(const std::string& path) {
    const auto rows = detail::read_store_rows(path, "k,t,s0,s1");
    std::vector<EndpointSample> store;
    store.reserve(rows.size());
    for (const auto& r : rows)
        store.push_back({static_cast<std::size_t>(r[0]), r[1], r[2], r[3]});
    return store;
}

inline std::vector<PairSample> read_pair_store(const std::string& path) {
    const auto rows = detail::read_store_rows(path, "k,t_a,t_b,s");
    std::vector<PairSample> store;
    store.reserve(rows.size());
    for (const auto& r : rows)
        store.push_back({static_cast<std::size_t>(r[0]), r[1], r[2], r[3]});
    return store;
}

} // namespace stagecut
