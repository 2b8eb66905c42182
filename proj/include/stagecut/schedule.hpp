#pragma once

// VP / VE perturbation-kernel parameterizations, their SNR maps and inverses,
// and the drift/diffusion coefficients used by the probability-flow sampler.
//
// VP closed forms, with B(t) = 1/2*beta_d*t^2 + beta_min*t:
//   s(t) = exp(-B(t)/2),  sigma(t) = sqrt(expm1(B(t)))
// so s(t)^2 * (1 + sigma(t)^2) == 1 holds exactly in exact arithmetic.

#include <cmath>
#include <stdexcept>
#include <string>

#include "stagecut/error.hpp"

namespace stagecut {

struct KernelParams {
    double s = 1.0;     // scale factor
    double sigma = 0.0; // relative noise stdev
    double t = 0.0;
};

struct DriftDiffusion {
    double f = 0.0;  // drift coefficient f(t)
    double g2 = 0.0; // squared diffusion coefficient g^2(t)
};

class VpSchedule {
public:
    VpSchedule() = default;
    VpSchedule(double beta_d, double beta_min, double t_min)
        : beta_d_(beta_d), beta_min_(beta_min), t_min_(t_min) {
        if (!(beta_d_ > 0.0)) throw std::invalid_argument("VpSchedule: beta_d must be > 0");
        if (!(beta_min_ >= 0.0)) throw std::invalid_argument("VpSchedule: beta_min must be >= 0");
        if (!(t_min_ > 0.0 && t_min_ < 1.0))
            throw std::invalid_argument("VpSchedule: t_min must lie in (0,1)");
    }

    double beta_d() const { return beta_d_; }
    double beta_min() const { return beta_min_; }
    double t_min() const { return t_min_; }

    // Closed forms, valid for any t >= 0; domain gating happens in the ops below.
    double b_of_t(double t) const { return 0.5 * beta_d_ * t * t + beta_min_ * t; }
    double scale(double t) const { return std::exp(-0.5 * b_of_t(t)); }
    double sigma(double t) const { return std::sqrt(std::expm1(b_of_t(t))); }
    double drift(double t) const { return -0.5 * (beta_d_ * t + beta_min_); }
    double diffusion2(double t) const { return beta_d_ * t + beta_min_; }

    void check_domain(double t) const {
        if (!(t >= t_min_ && t <= 1.0))
            throw std::domain_error("VpSchedule: t = " + std::to_string(t) +
                                    " outside [t_min, 1] = [" + std::to_string(t_min_) + ", 1]");
    }

private:
    double beta_d_ = 19.9;
    double beta_min_ = 0.1;
    double t_min_ = 1e-3;
};

class VeSchedule {
public:
    VeSchedule() = default;
    VeSchedule(double sigma_min, double sigma_max)
        : sigma_min_(sigma_min), sigma_max_(sigma_max) {
        if (!(sigma_min_ > 0.0)) throw std::invalid_argument("VeSchedule: sigma_min must be > 0");
        if (!(sigma_max_ > sigma_min_))
            throw std::invalid_argument("VeSchedule: sigma_max must exceed sigma_min");
    }

    double sigma_min() const { return sigma_min_; }
    double sigma_max() const { return sigma_max_; }
    double t_min() const { return 0.0; }

    double sigma(double t) const {
        return sigma_min_ * std::pow(sigma_max_ / sigma_min_, t);
    }

    void check_domain(double t) const {
        if (!(t >= 0.0 && t <= 1.0))
            throw std::domain_error("VeSchedule: t = " + std::to_string(t) + " outside [0, 1]");
    }

private:
    double sigma_min_ = 0.01;
    double sigma_max_ = 100.0;
};

inline KernelParams kernel_at(const VpSchedule& sched, double t) {
    sched.check_domain(t);
    return {sched.scale(t), sched.sigma(t), t};
}

inline KernelParams kernel_at(const VeSchedule& sched, double t) {
    sched.check_domain(t);
    return {1.0, sched.sigma(t), t};
}

template <class Schedule>
double snr(const Schedule& sched, double t) {
    sched.check_domain(t);
    const double sig = sched.sigma(t);
    if (!(sig > 0.0)) throw std::domain_error("snr: sigma(t) = 0 at t = " + std::to_string(t));
    return 1.0 / (sig * sig);
}

// Inverse of the strictly decreasing snr map, by bisection to 1e-12 interval width.
inline double t_of_snr(const VpSchedule& sched, double target) {
    const double hi_snr = snr(sched, sched.t_min());
    const double lo_snr = snr(sched, 1.0);
    if (!(target >= lo_snr && target <= hi_snr))
        throw std::domain_error("t_of_snr: target " + std::to_string(target) +
                                " outside [snr(1), snr(t_min)]");
    double lo = sched.t_min(), hi = 1.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (snr(sched, mid) >= target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline double t_of_snr(const VeSchedule& sched, double target) {
    const double hi_snr = snr(sched, 0.0);
    const double lo_snr = snr(sched, 1.0);
    if (!(target >= lo_snr && target <= hi_snr))
        throw std::domain_error("t_of_snr: target " + std::to_string(target) +
                                " outside [snr(1), snr(0)]");
    const double sig = 1.0 / std::sqrt(target);
    return std::log(sig / sched.sigma_min()) / std::log(sched.sigma_max() / sched.sigma_min());
}

// The VE sigma whose SNR equals the VP SNR at time t.
inline double ve_sigma_equivalent(const VpSchedule& sched, double t) {
    sched.check_domain(t);
    return sched.sigma(t);
}

inline DriftDiffusion drift_diffusion(const VpSchedule& sched, double t) {
    sched.check_domain(t);
    return {sched.drift(t), sched.diffusion2(t)};
}

} // namespace stagecut
