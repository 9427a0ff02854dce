#pragma once

// Kernel covariance (KCV) and threshold kernel covariance (TKCV) estimators,
// the asymptotic variance array Omega, and the normal-approximation bands and
// standardized errors built on it.
//
//   KCV(tau)  = sum_i K_h(t_{i-1} - tau) dX_i dX_i'
//   TKCV(tau) = sum_i K_h(t_{i-1} - tau) dX_i dX_i' 1{test(dX_i)}
//   Omega_{kl,k'l'} = S_kk' S_ll' + S_kl' S_lk'
//
// With shrinking h, sqrt(h/delta) (KCV(t) - S(t)) is asymptotically
// N(0, Omega(t) int K^2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spotcov/errors.hpp"
#include "spotcov/kernels.hpp"
#include "spotcov/normal.hpp"
#include "spotcov/timeseries.hpp"

namespace spotcov {

enum class ThresholdMode { squared_norm, norm };

/// Jump threshold r(delta) = c * delta^beta. An increment is kept when
/// |dX|^2 <= d r(delta) (squared_norm) or |dX| <= d r(delta) (norm).
struct ThresholdSpec {
    double c = 1.0;
    double beta = 0.49;
    ThresholdMode mode = ThresholdMode::squared_norm;

    ThresholdSpec() = default;
    ThresholdSpec(double c_, double beta_, ThresholdMode mode_ = ThresholdMode::squared_norm)
        : c(c_), beta(beta_), mode(mode_) {
        validate();
    }

    void validate() const {
        if (!(c > 0.0)) throw invalid_argument("ThresholdSpec: c must be positive");
        if (!(beta > 0.0 && beta < 1.0)) throw invalid_argument("ThresholdSpec: beta must lie in (0, 1)");
    }

    [[nodiscard]] double rate(double delta) const { return c * std::pow(delta, beta); }

    /// Bound compared against the squared or plain norm, i.e. d * r(delta).
    [[nodiscard]] double cutoff(std::size_t d, double delta) const {
        return static_cast<double>(d) * rate(delta);
    }

    template <class Row>
    [[nodiscard]] bool keeps(const Row& dx, double cut) const {
        const double sq = dx.squaredNorm();
        return mode == ThresholdMode::squared_norm ? sq <= cut : std::sqrt(sq) <= cut;
    }
};

inline const char* to_string(ThresholdMode m) { return m == ThresholdMode::squared_norm ? "squared-norm" : "norm"; }

inline ThresholdMode threshold_mode_from_name(const std::string& s) {
    if (s == "squared-norm") return ThresholdMode::squared_norm;
    if (s == "norm") return ThresholdMode::norm;
    throw invalid_argument("threshold mode must be 'squared-norm' or 'norm', got '" + s + "'");
}

namespace detail {

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) noexcept {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    [[nodiscard]] double value() const noexcept { return sum + comp; }
};

inline void check_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw invalid_argument("bandwidth h must be positive and finite");
}

inline void check_tau(const TimeGrid& grid, double tau) {
    if (!(tau >= 0.0 && tau <= grid.horizon()))
        throw invalid_argument("evaluation time tau=" + std::to_string(tau) + " lies outside [0, T]");
}

/// Index range [first, last) of increments whose kernel weight at tau can
/// exceed 1e-16 of the kernel peak.
inline std::pair<std::size_t, std::size_t> reach(const TimeGrid& grid, const KernelSpec& spec, double h, double tau) {
    const double delta = grid.delta();
    const auto n = static_cast<double>(grid.increments());
    const double lo = std::floor((tau + h * spec.reach_lo()) / delta) - 1.0;
    const double hi = std::ceil((tau + h * spec.reach_hi()) / delta) + 2.0;
    const double first = std::clamp(lo, 0.0, n);
    const double last = std::clamp(hi, 0.0, n);
    return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

/// sum_i w_i dX_i dX_i' over increments with keep(i) true, in time order,
/// one compensated accumulator per unique element.
template <class Keep>
CovMatrix weighted_outer_sum(const IncrementSeries& inc, const KernelSpec& spec, double h, double tau, Keep&& keep) {
    const std::size_t d = inc.assets();
    const auto& x = inc.values();
    std::vector<CompensatedSum> acc(vech_length(d));
    const auto [first, last] = reach(inc.grid(), spec, h, tau);
    for (std::size_t i = first; i < last; ++i) {
        const double w = spec((inc.start_time(i) - tau) / h) / h;
        if (w == 0.0 || !keep(i)) continue;
        const double* row = x.data() + i * d;
        std::size_t p = 0;
        for (std::size_t c = 0; c < d; ++c) {
            const double wc = w * row[c];
            for (std::size_t r = c; r < d; ++r) acc[p++].add(wc * row[r]);
        }
    }
    const auto dd = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd m(dd, dd);
    std::size_t p = 0;
    for (Eigen::Index c = 0; c < dd; ++c)
        for (Eigen::Index r = c; r < dd; ++r) {
            m(r, c) = acc[p].value();
            m(c, r) = m(r, c);
            ++p;
        }
    return CovMatrix(std::move(m));
}

}  // namespace detail

/// Kernel-weighted realized covariance at tau.
[[nodiscard]] inline CovMatrix kcv(const IncrementSeries& inc, const KernelSpec& spec, double h, double tau) {
    detail::check_bandwidth(h);
    detail::check_tau(inc.grid(), tau);
    if (inc.size() == 0) throw invalid_argument("kcv: empty increment series");
    return detail::weighted_outer_sum(inc, spec, h, tau, [](std::size_t) { return true; });
}

/// kcv evaluated at each tau.
[[nodiscard]] inline CovPath spot_covariance_path(const IncrementSeries& inc, const KernelSpec& spec, double h,
                                                  const std::vector<double>& taus) {
    detail::check_bandwidth(h);
    for (double t : taus) detail::check_tau(inc.grid(), t);
    std::vector<CovMatrix> out;
    out.reserve(taus.size());
    for (double t : taus) out.push_back(kcv(inc, spec, h, t));
    return {taus, std::move(out)};
}

/// kcv restricted to increments passing the jump threshold.
[[nodiscard]] inline CovMatrix tkcv(const IncrementSeries& inc, const KernelSpec& spec, double h, double tau,
                                   const ThresholdSpec& thr) {
    detail::check_bandwidth(h);
    detail::check_tau(inc.grid(), tau);
    thr.validate();
    if (inc.size() == 0) throw invalid_argument("tkcv: empty increment series");
    const double cut = thr.cutoff(inc.assets(), inc.grid().delta());
    return detail::weighted_outer_sum(inc, spec, h, tau, [&](std::size_t i) { return thr.keeps(inc.row(i), cut); });
}

[[nodiscard]] inline CovPath threshold_covariance_path(const IncrementSeries& inc, const KernelSpec& spec, double h,
                                                       const std::vector<double>& taus, const ThresholdSpec& thr) {
    std::vector<CovMatrix> out;
    out.reserve(taus.size());
    for (double t : taus) out.push_back(tkcv(inc, spec, h, t, thr));
    return {taus, std::move(out)};
}

/// Data-driven threshold: the squared-norm cutoff d r(delta) at the observed
/// step equals `multiplier` times the median squared increment norm, and c
/// is then held fixed so r(delta) = c delta^beta keeps its rate in delta.
/// In norm mode the cutoff is sqrt(multiplier) times the median norm.
[[nodiscard]] inline ThresholdSpec calibrate_threshold(const IncrementSeries& inc, double multiplier = 25.0,
                                                       double beta = 0.49,
                                                       ThresholdMode mode = ThresholdMode::squared_norm) {
    if (!(multiplier > 0.0)) throw invalid_argument("calibrate_threshold: multiplier must be positive");
    std::vector<double> sq(inc.size());
    for (std::size_t i = 0; i < inc.size(); ++i) sq[i] = inc.row(i).squaredNorm();
    if (sq.empty()) throw invalid_argument("calibrate_threshold: empty increment series");
    auto mid = sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2);
    std::nth_element(sq.begin(), mid, sq.end());
    const double med = *mid;
    if (!(med > 0.0)) throw invalid_state("calibrate_threshold: median squared increment is zero");
    const double d = static_cast<double>(inc.assets());
    const double delta_beta = std::pow(inc.grid().delta(), beta);
    const double cut = mode == ThresholdMode::squared_norm ? multiplier * med : std::sqrt(multiplier * med);
    return {cut / (d * delta_beta), beta, mode};
}

struct ThresholdRateReport {
    std::vector<double> deltas;
    std::vector<double> rate;       // r(delta)
    std::vector<double> modulus;    // delta log(1/delta) / r(delta)
    bool rate_decreasing = false;   // over the tail
    bool modulus_decreasing = false;
    bool slow_decay = false;        // modulus not monotone somewhere in the sequence
    [[nodiscard]] bool passes() const noexcept { return rate_decreasing && modulus_decreasing; }
};

/// Tabulates r(delta) and delta log(1/delta) / r(delta) along a decreasing
/// step sequence. Passes when both are strictly decreasing over the tail
/// (the last half of the sequence, at least two points).
[[nodiscard]] inline ThresholdRateReport validate_threshold_rate(const ThresholdSpec& thr,
                                                                 const std::vector<double>& deltas) {
    thr.validate();
    if (deltas.size() < 2) throw invalid_argument("validate_threshold_rate: need at least two step sizes");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0 && deltas[i] < 1.0))
            throw invalid_argument("validate_threshold_rate: step sizes must lie in (0, 1)");
        if (i > 0 && !(deltas[i] < deltas[i - 1]))
            throw invalid_argument("validate_threshold_rate: step sizes must be strictly decreasing");
    }
    ThresholdRateReport rep;
    rep.deltas = deltas;
    for (double dl : deltas) {
        const double r = thr.rate(dl);
        rep.rate.push_back(r);
        rep.modulus.push_back(dl * std::log(1.0 / dl) / r);
    }
    const std::size_t m = deltas.size();
    const std::size_t tail = std::max<std::size_t>(2, (m + 1) / 2);
    auto decreasing = [&](const std::vector<double>& v, std::size_t from) {
        for (std::size_t i = from + 1; i < m; ++i)
            if (!(v[i] < v[i - 1])) return false;
        return true;
    };
    rep.rate_decreasing = decreasing(rep.rate, m - tail);
    rep.modulus_decreasing = decreasing(rep.modulus, m - tail);
    rep.slow_decay = !decreasing(rep.modulus, 0);
    return rep;
}

/// d^2 x d^2 array, entry (k*d + l, k2*d + l2).
class OmegaArray {
public:
    OmegaArray() = default;
    explicit OmegaArray(Eigen::MatrixXd a) : a_(std::move(a)) {
        d_ = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(a_.rows()))));
        if (a_.rows() != a_.cols() || d_ * d_ != static_cast<std::size_t>(a_.rows()))
            throw invalid_argument("OmegaArray: expected a d^2 x d^2 array");
    }

    [[nodiscard]] std::size_t dim() const noexcept { return d_; }
    [[nodiscard]] double operator()(std::size_t k, std::size_t l, std::size_t k2, std::size_t l2) const {
        return a_(static_cast<Eigen::Index>(k * d_ + l), static_cast<Eigen::Index>(k2 * d_ + l2));
    }
    [[nodiscard]] const Eigen::MatrixXd& array() const noexcept { return a_; }

private:
    Eigen::MatrixXd a_;
    std::size_t d_ = 0;
};

[[nodiscard]] inline OmegaArray omega(const CovMatrix& sigma) {
    const std::size_t d = sigma.dim();
    const auto dd = static_cast<Eigen::Index>(d * d);
    Eigen::MatrixXd a(dd, dd);
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l)
            for (std::size_t k2 = 0; k2 < d; ++k2)
                for (std::size_t l2 = 0; l2 < d; ++l2)
                    a(static_cast<Eigen::Index>(k * d + l), static_cast<Eigen::Index>(k2 * d + l2)) =
                        sigma(k, k2) * sigma(l, l2) + sigma(k, l2) * sigma(l, k2);
    return OmegaArray(std::move(a));
}

/// Per-element confidence interval [lower, upper].
struct CovBand {
    Eigen::MatrixXd lower;
    Eigen::MatrixXd upper;

    [[nodiscard]] bool covers(std::size_t k, std::size_t l, double value) const {
        const auto r = static_cast<Eigen::Index>(k);
        const auto c = static_cast<Eigen::Index>(l);
        return lower(r, c) <= value && value <= upper(r, c);
    }
};

/// estimate_kl +- z_{(1+level)/2} sqrt(Omega_{kl,kl} int K^2 delta/h).
[[nodiscard]] inline CovBand asymptotic_band(const CovMatrix& estimate, const OmegaArray& omega_hat, double delta,
                                             double h, const KernelSpec& spec, double level) {
    if (!(level > 0.0 && level < 1.0)) throw invalid_argument("asymptotic_band: level must lie in (0, 1)");
    detail::check_bandwidth(h);
    if (!(delta > 0.0)) throw invalid_argument("asymptotic_band: delta must be positive");
    const std::size_t d = estimate.dim();
    if (omega_hat.dim() != d) throw invalid_argument("asymptotic_band: Omega dimension mismatch");
    const double z = normal_quantile(0.5 * (1.0 + level));
    const double scale = spec.l2norm() * delta / h;
    CovBand band{estimate.matrix(), estimate.matrix()};
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
            const double w = omega_hat(k, l, k, l);
            if (!(w > 0.0)) throw invalid_state("asymptotic_band: non-positive diagonal Omega entry");
            const double half = z * std::sqrt(w * scale);
            band.lower(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) -= half;
            band.upper(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) += half;
        }
    return band;
}

/// z_kl = sqrt(h/delta) (est_kl - truth_kl) / sqrt(Omega_{kl,kl} int K^2),
/// one d x d matrix per replication.
[[nodiscard]] inline std::vector<Eigen::MatrixXd> standardized_errors(const std::vector<CovMatrix>& estimates,
                                                                     const CovMatrix& truth,
                                                                     const OmegaArray& omega_true, double delta,
                                                                     double h, const KernelSpec& spec) {
    detail::check_bandwidth(h);
    if (!(delta > 0.0)) throw invalid_argument("standardized_errors: delta must be positive");
    const std::size_t d = truth.dim();
    if (omega_true.dim() != d) throw invalid_argument("standardized_errors: Omega dimension mismatch");
    const auto dd = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd denom(dd, dd);
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
            const double v = omega_true(k, l, k, l) * spec.l2norm();
            if (!(v > 0.0)) throw invalid_state("standardized_errors: zero variance denominator");
            denom(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = std::sqrt(v);
        }
    const double root = std::sqrt(h / delta);
    std::vector<Eigen::MatrixXd> out;
    out.reserve(estimates.size());
    for (const auto& e : estimates) {
        if (e.dim() != d) throw invalid_argument("standardized_errors: estimate dimension mismatch");
        out.push_back(root * (e.matrix() - truth.matrix()).cwiseQuotient(denom));
    }
    return out;
}

}  // namespace spotcov
