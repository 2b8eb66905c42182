#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "stagecut/dataset.hpp"
#include "stagecut/denoiser.hpp"
#include "stagecut/schedule.hpp"

using namespace stagecut;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Independent oracle: direct squared-distance logits accumulated in long
// double, linear-domain weights. No shared code with the library evaluator.
struct NaiveEval {
    std::vector<double> y_hat, eps;
    double log_partition = 0.0;
    double log_density = 0.0;
};

NaiveEval naive_eval(const Dataset& d, double s, double sig, const std::vector<double>& x) {
    const std::size_t N = d.size(), n = d.dim();
    std::vector<long double> logit(N);
    long double mx = -std::numeric_limits<long double>::infinity();
    for (std::size_t i = 0; i < N; ++i) {
        const double* y = d.point(i);
        long double dist2 = 0.0L;
        for (std::size_t j = 0; j < n; ++j) {
            const long double r = static_cast<long double>(x[j]) - static_cast<long double>(s) * y[j];
            dist2 += r * r;
        }
        logit[i] = -dist2 / (2.0L * s * s * sig * sig);
        mx = std::max(mx, logit[i]);
    }
    long double total = 0.0L;
    std::vector<long double> acc(n, 0.0L);
    for (std::size_t i = 0; i < N; ++i) {
        const long double w = std::exp(logit[i] - mx);
        total += w;
        const double* y = d.point(i);
        for (std::size_t j = 0; j < n; ++j) acc[j] += w * y[j];
    }
    NaiveEval out;
    out.y_hat.resize(n);
    out.eps.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.y_hat[j] = static_cast<double>(acc[j] / total);
        out.eps[j] = static_cast<double>((x[j] - static_cast<long double>(s) * out.y_hat[j]) /
                                         (static_cast<long double>(s) * sig));
    }
    out.log_partition = static_cast<double>(mx + std::log(total));
    out.log_density = static_cast<double>(
        mx + std::log(total) -
        0.5L * static_cast<long double>(n) * std::log(2.0L * 3.14159265358979323846264338327950288L * s * s * sig * sig) -
        std::log(static_cast<long double>(N)));
    return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (const double v : a) m = std::max(m, std::abs(v));
    return m;
}

Dataset random_dataset(std::mt19937& gen, std::size_t N, std::size_t n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> flat(N * n);
    for (auto& v : flat) v = normal(gen);
    return Dataset(std::move(flat), n, detail::value_range(flat), "synth");
}

} // namespace

TEST_CASE("two-point posterior matches the logistic closed form", "[denoiser]") {
    const Dataset d({-1.0, 1.0}, 1, {-1.0, 1.0}, "synth");
    const KernelParams k{1.0, 1.0, 0.5};

    const auto at_half = optimal_eps(d, k, {0.5});
    // Softmax weight of +1 is 1/(1+exp(-1)).
    CHECK_THAT(at_half.y_hat[0], WithinRel(0.4621171572600098, 1e-12));
    CHECK_THAT(at_half.eps_star[0], WithinRel(0.03788284273999021, 1e-10));
    CHECK_THAT(at_half.max_log_weight, WithinAbs(-0.125, 1e-12));

    const auto at_zero = optimal_eps(d, k, {0.0});
    CHECK_THAT(at_zero.y_hat[0], WithinAbs(0.0, 1e-15));
    CHECK_THAT(at_zero.eps_star[0], WithinAbs(0.0, 1e-15));
}

TEST_CASE("single-point dataset collapses to identities", "[denoiser]") {
    const Dataset d({0.3, -0.7, 2.0}, 3, {-0.7, 2.0}, "synth");
    const VpSchedule vp;
    std::mt19937 gen(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const double t : {0.001, 0.1, 0.5, 1.0}) {
        const auto k = kernel_at(vp, t);
        std::vector<double> eps(3), x(3);
        for (int j = 0; j < 3; ++j) {
            eps[j] = normal(gen);
            x[j] = k.s * d.point(0)[j] + k.s * k.sigma * eps[j];
        }
        const auto eval = optimal_eps(d, k, x);
        for (int j = 0; j < 3; ++j) {
            CHECK(eval.y_hat[j] == d.point(0)[j]);
            CHECK_THAT(eval.eps_star[j], WithinAbs(eps[j], 1e-9));
        }
        // Only one component: the partition is exactly its own logit.
        CHECK(eval.log_partition == eval.max_log_weight);
    }
}

TEST_CASE("matches the naive linear-domain oracle", "[denoiser]") {
    std::mt19937 gen(2024);
    std::uniform_int_distribution<std::size_t> pick_n(1, 16);
    std::uniform_int_distribution<std::size_t> pick_N(2, 100);
    std::uniform_real_distribution<double> logsig(std::log(0.2), std::log(5.0));
    std::normal_distribution<double> normal(0.0, 1.0);

    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t N = pick_N(gen), n = pick_n(gen);
        const auto d = random_dataset(gen, N, n);
        const double sig = std::exp(logsig(gen));
        const double s = rep % 2 ? 1.0 : 1.0 / std::sqrt(1.0 + sig * sig);
        // Forward perturbation of a random dataset point keeps weights sane.
        const std::size_t j = gen() % N;
        std::vector<double> x(n);
        for (std::size_t c = 0; c < n; ++c) x[c] = s * d.point(j)[c] + s * sig * normal(gen);

        const KernelParams k{s, sig, 0.5};
        const auto eval = optimal_eps(d, k, x);
        const auto ref = naive_eval(d, s, sig, x);

        const double scale_eps = std::max(1.0, max_abs(ref.eps));
        const double scale_y = std::max(1.0, max_abs(ref.y_hat));
        worst = std::max(worst, max_abs_diff(eval.eps_star, ref.eps) / scale_eps);
        CHECK(max_abs_diff(eval.eps_star, ref.eps) <= 1e-10 * scale_eps);
        CHECK(max_abs_diff(eval.y_hat, ref.y_hat) <= 1e-10 * scale_y);
        CHECK(std::abs(eval.log_partition - ref.log_partition) <=
              1e-10 * std::max(1.0, std::abs(ref.log_partition)));
        CHECK(std::abs(log_density(d, k, x) - ref.log_density) <=
              1e-10 * std::max(1.0, std::abs(ref.log_density)));
    }
    INFO("worst relative eps deviation " << worst);
    CHECK(worst <= 1e-10);
}

TEST_CASE("posterior mean is a convex combination of the data", "[denoiser]") {
    std::mt19937 gen(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto d = random_dataset(gen, 20, 4);
    std::vector<double> lo(4, std::numeric_limits<double>::infinity()), hi(4, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            lo[j] = std::min(lo[j], d.point(i)[j]);
            hi[j] = std::max(hi[j], d.point(i)[j]);
        }
    for (int rep = 0; rep < 500; ++rep) {
        const KernelParams k{1.0, 0.05 + 0.2 * (rep % 25), 0.5};
        std::vector<double> x(4);
        for (auto& v : x) v = 3.0 * normal(gen);
        const auto pm = posterior_mean(d, k, x);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(pm.y_hat[j] >= lo[j] - 1e-12);
            CHECK(pm.y_hat[j] <= hi[j] + 1e-12);
        }
    }
}

TEST_CASE("translation equivariance", "[denoiser]") {
    std::mt19937 gen(31);
    const auto d = random_dataset(gen, 30, 5);
    const double c = 2.75;
    std::vector<double> shifted(d.data(), d.data() + 30 * 5);
    for (auto& v : shifted) v += c;
    const Dataset ds(std::move(shifted), 5, {0.0, 1.0}, "synth");

    const KernelParams k{0.8, 1.3, 0.5};
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x(5), xs(5);
        for (std::size_t j = 0; j < 5; ++j) {
            x[j] = normal(gen);
            xs[j] = x[j] + k.s * c;
        }
        const auto a = optimal_eps(d, k, x);
        const auto b = optimal_eps(ds, k, xs);
        CHECK(max_abs_diff(a.eps_star, b.eps_star) <= 1e-9);
    }
}

TEST_CASE("score equals the gradient of log density", "[denoiser]") {
    std::mt19937 gen(919);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = random_dataset(gen, 10, 4);
        const KernelParams k{0.9, 0.4 + 0.3 * (rep % 5), 0.5};
        std::vector<double> x(4);
        for (std::size_t c = 0; c < 4; ++c) x[c] = k.s * d.point(0)[c] + k.s * k.sigma * normal(gen);

        const auto sc = score(d, k, x);
        const double h = 1e-5;
        double fd_scale = 1.0;
        std::vector<double> fd(4);
        for (std::size_t j = 0; j < 4; ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            fd[j] = (log_density(d, k, xp) - log_density(d, k, xm)) / (2.0 * h);
            fd_scale = std::max(fd_scale, std::abs(fd[j]));
        }
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(sc[j] - fd[j]) <= 1e-5 * fd_scale);
    }
}

TEST_CASE("log density normalizer", "[denoiser]") {
    // Single point at its mode: density is the Gaussian peak.
    const Dataset d({1.0, 2.0}, 2, {1.0, 2.0}, "synth");
    const KernelParams k{0.5, 2.0, 0.5};
    const std::vector<double> mode = {0.5, 1.0};
    CHECK_THAT(log_density(d, k, mode),
               WithinRel(-std::log(2.0 * 3.14159265358979323846 * 0.25 * 4.0), 1e-12));

    // Duplicating the point leaves the mixture density unchanged.
    const Dataset d2({1.0, 2.0, 1.0, 2.0}, 2, {1.0, 2.0}, "synth");
    for (const auto& x : {std::vector<double>{0.5, 1.0}, std::vector<double>{3.0, -1.0}})
        CHECK_THAT(log_density(d2, k, x), WithinAbs(log_density(d, k, x), 1e-13));
}

TEST_CASE("small noise recovers the forward perturbation", "[denoiser]") {
    // Well-separated points, sigma far below the separation.
    const Dataset d({0.0, 0.0, 10.0, 10.0, -10.0, 10.0}, 2, {-10.0, 10.0}, "synth");
    std::mt19937 gen(4242);
    std::normal_distribution<double> normal(0.0, 1.0);
    const KernelParams k{1.0, 1e-3, 0.01};
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t j = gen() % 3;
        std::vector<double> eps(2), x(2);
        for (int c = 0; c < 2; ++c) {
            eps[c] = normal(gen);
            x[c] = d.point(j)[c] + k.sigma * eps[c];
        }
        const auto eval = optimal_eps(d, k, x);
        CHECK(max_abs_diff(eval.eps_star, eps) <= 1e-3);
        for (int c = 0; c < 2; ++c) CHECK(eval.y_hat[c] == d.point(j)[c]);
    }
}

TEST_CASE("extreme logit gaps stay finite", "[denoiser]") {
    const Dataset d({0.0, 1000.0}, 1, {0.0, 1000.0}, "synth");
    const KernelParams k{1.0, 0.05, 0.01};
    const auto eval = optimal_eps(d, k, {1.0});
    CHECK(std::isfinite(eval.eps_star[0]));
    CHECK(std::isfinite(eval.log_partition));
    CHECK(eval.y_hat[0] == 0.0);
    CHECK(std::isfinite(log_density(d, k, {1.0})));
}

TEST_CASE("nearest-neighbor short circuit agrees with the exact path", "[denoiser]") {
    const Dataset d({0.0, 0.0, 5.0, 5.0}, 2, {0.0, 5.0}, "synth");
    DenoiserOptions shortcut;
    shortcut.nn_shortcut = true;

    // Tiny sigma: the shortcut fires and must stay within 1e-9 of exact.
    const KernelParams tight{1.0, 1e-4, 0.01};
    const std::vector<double> xq = {4.9, 5.05};
    const auto exact = optimal_eps(d, tight, xq);
    const auto fast = optimal_eps(d, tight, xq, shortcut);
    CHECK(max_abs_diff(fast.y_hat, exact.y_hat) <= 1e-9);
    CHECK(max_abs_diff(fast.eps_star, exact.eps_star) <= 1e-9);
    for (int c = 0; c < 2; ++c) CHECK(fast.y_hat[c] == d.point(1)[c]);

    // Broad sigma: weights are mixed, the flag must not change the result.
    const KernelParams broad{1.0, 4.0, 0.5};
    const auto a = optimal_eps(d, broad, xq);
    const auto b = optimal_eps(d, broad, xq, shortcut);
    CHECK(a.eps_star == b.eps_star);
    CHECK(a.y_hat == b.y_hat);
}

TEST_CASE("denoiser argument validation", "[denoiser]") {
    const Dataset d({1.0, 2.0}, 2, {1.0, 2.0}, "synth");
    CHECK_THROWS_AS(optimal_eps(d, {1.0, 0.0, 0.5}, {0.0, 0.0}), std::domain_error);
    CHECK_THROWS_AS(optimal_eps(d, {1.0, -1.0, 0.5}, {0.0, 0.0}), std::domain_error);
    CHECK_THROWS_AS(optimal_eps(d, {1.0, 1.0, 0.5}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(posterior_mean(d, {1.0, 1.0, 0.5}, {0.0, 0.0, 0.0}), std::invalid_argument);
}
