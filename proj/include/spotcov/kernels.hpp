#pragma once

// Smoothing kernels K, their scaled forms K_h(z) = K(z/h)/h, and the
// closed-form constants the asymptotic variance needs.
//
//   gaussian   K(u) = exp(-u^2/2)/sqrt(2 pi)            int K^2 = 1/(2 sqrt(pi))
//   onesided   K(u) = exp(u) for u <= 0, else 0         int K^2 = 1/2
//   beta       K(u) = 15/16 (1-u^2)^2 for |u| <= 1      int K^2 = 5/7
//   uniform    K(u) = 1/2 for -1 <= u < 1                int K^2 = 1/2
//
// The uniform kernel's half-open support makes a window of width 2h cover
// exactly 2h/delta increments; it reduces KCV to a scaled realized covariance.
//
// The one-sided kernel weights only increments that start at or before the
// evaluation time, so the estimate at tau uses no later data.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>

#include "spotcov/errors.hpp"

namespace spotcov {

enum class KernelKind { gaussian, one_sided_exp, beta, uniform };

class KernelSpec {
public:
    /// Looks up a kernel by its CLI name: "gaussian", "onesided", "beta" or "uniform".
    static const KernelSpec& from_name(std::string_view name);
    static const KernelSpec& get(KernelKind kind);

    [[nodiscard]] KernelKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    // Interval outside which K is exactly zero (infinite for gaussian).
    [[nodiscard]] double support_lo() const noexcept { return lo_; }
    [[nodiscard]] double support_hi() const noexcept { return hi_; }
    // Interval outside which K(u) < 1e-16 * sup K. Estimator loops stop here.
    [[nodiscard]] double reach_lo() const noexcept { return reach_lo_; }
    [[nodiscard]] double reach_hi() const noexcept { return reach_hi_; }
    [[nodiscard]] double l2norm() const noexcept { return l2_; }

    [[nodiscard]] double operator()(double u) const noexcept {
        switch (kind_) {
            case KernelKind::gaussian:
                return std::exp(-0.5 * u * u) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
            case KernelKind::one_sided_exp:
                return u <= 0.0 ? std::exp(u) : 0.0;
            case KernelKind::beta: {
                if (std::abs(u) > 1.0) return 0.0;
                const double a = 1.0 - u * u;
                return 0.9375 * a * a;
            }
            case KernelKind::uniform:
                return (u >= -1.0 && u < 1.0) ? 0.5 : 0.0;
        }
        return 0.0;
    }

private:
    KernelSpec(KernelKind kind, std::string name, double lo, double hi, double reach_lo, double reach_hi, double l2)
        : kind_(kind), name_(std::move(name)), lo_(lo), hi_(hi), reach_lo_(reach_lo), reach_hi_(reach_hi), l2_(l2) {
        validate();
    }

    // Composite midpoint check that the kernel integrates to one over its
    // reach. Midpoints avoid sampling the support endpoints, where the
    // one-sided and uniform kernels jump.
    void validate() const {
        const double lo = reach_lo_ < -40.0 ? -40.0 : reach_lo_;
        const double hi = reach_hi_ > 40.0 ? 40.0 : reach_hi_;
        const long steps = 400000;
        const double step = (hi - lo) / static_cast<double>(steps);
        double sum = 0.0;
        for (long i = 0; i < steps; ++i) sum += (*this)(lo + step * (static_cast<double>(i) + 0.5));
        if (std::abs(sum * step - 1.0) > 1e-8)
            throw invalid_state("KernelSpec: kernel '" + name_ + "' does not integrate to one");
    }

    KernelKind kind_;
    std::string name_;
    double lo_, hi_, reach_lo_, reach_hi_, l2_;
};

inline const KernelSpec& KernelSpec::get(KernelKind kind) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (kind) {
        case KernelKind::gaussian: {
            static const KernelSpec k(kind, "gaussian", -inf, inf, -8.6, 8.6, 0.5 * std::numbers::inv_sqrtpi);
            return k;
        }
        case KernelKind::one_sided_exp: {
            static const KernelSpec k(kind, "onesided", -inf, 0.0, -36.9, 0.0, 0.5);
            return k;
        }
        case KernelKind::beta: {
            static const KernelSpec k(kind, "beta", -1.0, 1.0, -1.0, 1.0, 5.0 / 7.0);
            return k;
        }
        case KernelKind::uniform: {
            static const KernelSpec k(kind, "uniform", -1.0, 1.0, -1.0, 1.0, 0.5);
            return k;
        }
    }
    throw invalid_argument("KernelSpec: unknown kernel kind");
}

inline const KernelSpec& KernelSpec::from_name(std::string_view name) {
    if (name == "gaussian") return get(KernelKind::gaussian);
    if (name == "onesided" || name == "one-sided-exp") return get(KernelKind::one_sided_exp);
    if (name == "beta") return get(KernelKind::beta);
    if (name == "uniform") return get(KernelKind::uniform);
    throw invalid_argument("unknown kernel '" + std::string(name) + "' (expected gaussian, onesided, beta or uniform)");
}

[[nodiscard]] inline double eval_kernel(const KernelSpec& spec, double u) noexcept { return spec(u); }

[[nodiscard]] inline double eval_scaled(const KernelSpec& spec, double h, double z) {
    if (!(h > 0.0)) throw invalid_argument("eval_scaled: bandwidth h must be positive");
    return spec(z / h) / h;
}

[[nodiscard]] inline double kernel_l2_norm(const KernelSpec& spec) noexcept { return spec.l2norm(); }

}  // namespace spotcov
