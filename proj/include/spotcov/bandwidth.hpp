#pragma once

// Integrated squared error and leave-one-out cross-validation for the
// kernel bandwidth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "spotcov/errors.hpp"
#include "spotcov/estimators.hpp"
#include "spotcov/kernels.hpp"
#include "spotcov/parallel.hpp"
#include "spotcov/timeseries.hpp"

namespace spotcov {

struct Window {
    double lo;
    double hi;
};

/// Default interior window: trims 10% of the horizon on each side.
[[nodiscard]] inline Window default_window(double horizon) { return {0.1 * horizon, 0.9 * horizon}; }

struct BandwidthGrid {
    std::vector<double> candidates;
    Window window;

    void validate(double horizon) const {
        if (candidates.empty()) throw invalid_argument("BandwidthGrid: no candidate bandwidths");
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (!(candidates[i] > 0.0)) throw invalid_argument("BandwidthGrid: candidates must be positive");
            if (i > 0 && !(candidates[i] > candidates[i - 1]))
                throw invalid_argument("BandwidthGrid: candidates must be strictly increasing");
        }
        if (!(0.0 < window.lo && window.lo < window.hi && window.hi < horizon))
            throw invalid_argument("BandwidthGrid: window must satisfy 0 < t_l < t_u < T");
    }

    /// start, start+step, ..., up to stop (inclusive, within rounding).
    static std::vector<double> linspace_step(double start, double step, double stop) {
        std::vector<double> out;
        for (std::size_t i = 0;; ++i) {
            const double v = start + step * static_cast<double>(i);
            if (v > stop + 1e-9 * step) break;
            out.push_back(v);
        }
        return out;
    }
};

/// Integral over [lo, hi] of the square of the piecewise-linear function
/// through (times[j], values[j]). Each segment is integrated exactly, so a
/// constant error e over a window of length L gives e^2 L.
[[nodiscard]] inline double integrated_square(const std::vector<double>& times, const std::vector<double>& values,
                                              Window w) {
    if (times.size() != values.size() || times.size() < 2)
        throw invalid_argument("integrated_square: need matching times and values, at least two points");
    if (!(w.lo < w.hi)) throw invalid_argument("integrated_square: empty window");
    if (times.front() > w.lo || times.back() < w.hi)
        throw invalid_argument("integrated_square: evaluation times do not cover the window");
    auto at = [&](std::size_t j, double t) {
        const double s = (t - times[j]) / (times[j + 1] - times[j]);
        return values[j] + s * (values[j + 1] - values[j]);
    };
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
        const double a = std::max(times[j], w.lo);
        const double b = std::min(times[j + 1], w.hi);
        if (!(b > a)) continue;
        const double ea = at(j, a);
        const double eb = at(j, b);
        total += (b - a) * (ea * ea + ea * eb + eb * eb) / 3.0;
    }
    return total;
}

namespace detail {
inline void check_same_times(const CovPath& a, const CovPath& b) {
    if (a.times() != b.times()) throw invalid_argument("evaluation times of the two paths differ");
    if (a.dim() != b.dim()) throw invalid_argument("covariance paths differ in dimension");
}
}  // namespace detail

/// Sum over unique elements k <= l of the integrated squared difference.
[[nodiscard]] inline double ise(const CovPath& est, const CovPath& truth, Window w) {
    detail::check_same_times(est, truth);
    const std::size_t d = est.dim();
    double total = 0.0;
    std::vector<double> err(est.size());
    for (std::size_t l = 0; l < d; ++l)
        for (std::size_t k = l; k < d; ++k) {
            for (std::size_t j = 0; j < est.size(); ++j) err[j] = truth[j](k, l) - est[j](k, l);
            total += integrated_square(est.times(), err, w);
        }
    return total;
}

/// Spot covariance at every increment start t_j, j in [first, last), using
/// one table of kernel weights K_h(m delta). Matches kcv up to rounding in
/// the weight arguments.
[[nodiscard]] inline std::vector<Eigen::VectorXd> spot_vech_on_grid(const IncrementSeries& inc,
                                                                    const KernelSpec& spec, double h,
                                                                    std::size_t first, std::size_t last) {
    detail::check_bandwidth(h);
    const std::size_t n = inc.size();
    const std::size_t d = inc.assets();
    const std::size_t m = vech_length(d);
    const double delta = inc.grid().delta();
    const auto lo = static_cast<long>(std::floor(h * spec.reach_lo() / delta)) - 1;
    const auto hi = static_cast<long>(std::ceil(h * spec.reach_hi() / delta)) + 1;
    std::vector<double> weight(static_cast<std::size_t>(hi - lo + 1));
    for (long s = lo; s <= hi; ++s) weight[static_cast<std::size_t>(s - lo)] = spec(static_cast<double>(s) * delta / h) / h;

    // Outer products in vech order, one row per increment.
    std::vector<double> outer(n * m);
    const double* x = inc.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t p = 0;
        for (std::size_t c = 0; c < d; ++c)
            for (std::size_t r = c; r < d; ++r) outer[i * m + p++] = x[i * d + c] * x[i * d + r];
    }

    std::vector<Eigen::VectorXd> out;
    out.reserve(last - first);
    for (std::size_t j = first; j < last; ++j) {
        std::vector<detail::CompensatedSum> acc(m);
        const long i0 = std::max<long>(0, static_cast<long>(j) + lo);
        const long i1 = std::min<long>(static_cast<long>(n) - 1, static_cast<long>(j) + hi);
        for (long i = i0; i <= i1; ++i) {
            const double w = weight[static_cast<std::size_t>(i - static_cast<long>(j) - lo)];
            if (w == 0.0) continue;
            const double* o = outer.data() + static_cast<std::size_t>(i) * m;
            for (std::size_t p = 0; p < m; ++p) acc[p].add(w * o[p]);
        }
        Eigen::VectorXd v(static_cast<Eigen::Index>(m));
        for (std::size_t p = 0; p < m; ++p) v(static_cast<Eigen::Index>(p)) = acc[p].value();
        out.push_back(std::move(v));
    }
    return out;
}

struct CvResult {
    double h = 0.0;
    std::vector<std::pair<double, double>> curve;  // (h, CV(h)); +inf marks a degenerate candidate
};

/// Leave-one-out CV over increments starting inside the window:
///   CV(h) = delta * sum_i |dX_i dX_i'/delta - S_{-i}(t_{i-1})|_F^2
/// where S_{-i} omits increment i. Ties go to the smaller h.
[[nodiscard]] inline CvResult cv_bandwidth(const IncrementSeries& inc, const KernelSpec& spec,
                                           const BandwidthGrid& grid) {
    const TimeGrid& tg = inc.grid();
    grid.validate(tg.horizon());
    const double delta = tg.delta();
    const auto first = static_cast<std::size_t>(std::ceil(grid.window.lo / delta - 1e-9));
    const auto last = std::min(inc.size(), static_cast<std::size_t>(std::floor(grid.window.hi / delta + 1e-9)) + 1);
    if (first >= last) throw invalid_argument("cv_bandwidth: no increments inside the window");

    const std::size_t d = inc.assets();
    std::vector<double> scores(grid.candidates.size());
    parallel_for(grid.candidates.size(), [&](std::size_t c) {
        const double h = grid.candidates[c];
        const auto spot = spot_vech_on_grid(inc, spec, h, first, last);
        const double own = spec(0.0) / h;
        bool any_weight = false;
        detail::CompensatedSum total;
        for (std::size_t j = first; j < last; ++j) {
            const auto x = inc.row(j);
            const Eigen::VectorXd& s = spot[j - first];
            // Remaining weight after dropping increment j.
            double others = 0.0;
            const double t = inc.start_time(j);
            const auto [a, b] = detail::reach(tg, spec, h, t);
            for (std::size_t i = a; i < b && others == 0.0; ++i)
                if (i != j) others += spec((inc.start_time(i) - t) / h);
            if (others > 0.0) any_weight = true;
            double fro = 0.0;
            std::size_t p = 0;
            for (std::size_t col = 0; col < d; ++col)
                for (std::size_t r = col; r < d; ++r) {
                    const double o = x(static_cast<Eigen::Index>(col)) * x(static_cast<Eigen::Index>(r));
                    const double loo = s(static_cast<Eigen::Index>(p)) - own * o;
                    const double e = o / delta - loo;
                    fro += (r == col ? 1.0 : 2.0) * e * e;
                    ++p;
                }
            total.add(fro * delta);
        }
        scores[c] = any_weight ? total.value() : std::numeric_limits<double>::infinity();
    });

    CvResult res;
    std::size_t best = grid.candidates.size();
    for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
        res.curve.emplace_back(grid.candidates[c], scores[c]);
        if (std::isfinite(scores[c]) && (best == grid.candidates.size() || scores[c] < scores[best])) best = c;
    }
    if (best == grid.candidates.size())
        throw invalid_state("cv_bandwidth: every candidate bandwidth leaves no positive leave-one-out weight");
    res.h = grid.candidates[best];
    return res;
}

}  // namespace spotcov
