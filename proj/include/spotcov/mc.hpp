#pragma once

// Monte Carlo evaluation: IMSE / ISB of a covariance element over an
// interior window, standardized errors for QQ checks, and the replication
// harness that holds the variance (and jump) trajectories fixed while
// redrawing price shocks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spotcov/bandwidth.hpp"
#include "spotcov/errors.hpp"
#include "spotcov/estimators.hpp"
#include "spotcov/kernels.hpp"
#include "spotcov/normal.hpp"
#include "spotcov/parallel.hpp"
#include "spotcov/rng.hpp"
#include "spotcov/simulator.hpp"
#include "spotcov/timeseries.hpp"

namespace spotcov {

struct Element {
    std::size_t k = 0;
    std::size_t l = 1;
};

namespace detail {
inline std::vector<double> element_error(const CovPath& est, const CovPath& truth, Element e) {
    check_same_times(est, truth);
    std::vector<double> err(est.size());
    for (std::size_t j = 0; j < est.size(); ++j) err[j] = truth[j](e.k, e.l) - est[j](e.k, e.l);
    return err;
}
}  // namespace detail

/// Mean over replications of the integrated squared error of one element.
[[nodiscard]] inline double imse(const std::vector<CovPath>& estimates, const CovPath& truth, Window w,
                                 Element e = {}) {
    if (estimates.empty()) throw invalid_argument("imse: need at least one replication");
    double total = 0.0;
    for (const auto& est : estimates) total += integrated_square(truth.times(), detail::element_error(est, truth, e), w);
    return total / static_cast<double>(estimates.size());
}

/// Integrated square of the replication-mean error of one element.
[[nodiscard]] inline double isb(const std::vector<CovPath>& estimates, const CovPath& truth, Window w,
                                Element e = {}) {
    if (estimates.empty()) throw invalid_argument("isb: need at least one replication");
    std::vector<double> mean(truth.size(), 0.0);
    for (const auto& est : estimates) {
        const auto err = detail::element_error(est, truth, e);
        for (std::size_t j = 0; j < err.size(); ++j) mean[j] += err[j];
    }
    for (double& m : mean) m /= static_cast<double>(estimates.size());
    return integrated_square(truth.times(), mean, w);
}

struct QqResult {
    std::vector<double> theoretical;  // standard normal quantiles at (i - 0.5)/N
    std::vector<double> empirical;    // sorted samples
    double slope = 0.0;
    double intercept = 0.0;
};

/// Pairs sorted samples with normal quantiles and fits empirical = a + b * theoretical.
[[nodiscard]] inline QqResult qq_data(std::vector<double> z) {
    if (z.size() < 20) throw invalid_argument("qq_data: need at least 20 samples");
    std::sort(z.begin(), z.end());
    const auto n = static_cast<double>(z.size());
    QqResult q;
    q.empirical = std::move(z);
    q.theoretical.resize(q.empirical.size());
    for (std::size_t i = 0; i < q.theoretical.size(); ++i)
        q.theoretical[i] = normal_quantile((static_cast<double>(i) + 0.5) / n);
    const double mx = std::accumulate(q.theoretical.begin(), q.theoretical.end(), 0.0) / n;
    const double my = std::accumulate(q.empirical.begin(), q.empirical.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < q.theoretical.size(); ++i) {
        sxy += (q.theoretical[i] - mx) * (q.empirical[i] - my);
        sxx += (q.theoretical[i] - mx) * (q.theoretical[i] - mx);
    }
    q.slope = sxy / sxx;
    q.intercept = my - q.slope * mx;
    return q;
}

/// Kolmogorov-Smirnov distance between the empirical CDF and N(0, 1).
[[nodiscard]] inline double ks_statistic_normal(std::vector<double> z) {
    if (z.empty()) throw invalid_argument("ks_statistic_normal: no samples");
    std::sort(z.begin(), z.end());
    const auto n = static_cast<double>(z.size());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double f = normal_cdf(z[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

/// Percentile bootstrap interval for the mean.
[[nodiscard]] inline std::pair<double, double> bootstrap_mean_interval(const std::vector<double>& x,
                                                                       std::size_t resamples, double level,
                                                                       std::uint64_t seed) {
    if (x.empty()) throw invalid_argument("bootstrap_mean_interval: no samples");
    Engine eng = make_engine(seed);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> means(resamples);
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += x[pick(eng)];
        m = s / static_cast<double>(x.size());
    }
    std::sort(means.begin(), means.end());
    const double a = 0.5 * (1.0 - level);
    auto q = [&](double p) {
        const auto idx = static_cast<std::size_t>(std::clamp(std::floor(p * static_cast<double>(resamples)), 0.0,
                                                             static_cast<double>(resamples - 1)));
        return means[idx];
    };
    return {q(a), q(1.0 - a)};
}

enum class Model { heston, bates };
enum class Estimator { kcv, tkcv };

inline const char* to_string(Model m) { return m == Model::heston ? "heston" : "bates"; }
inline const char* to_string(Estimator e) { return e == Estimator::kcv ? "kcv" : "tkcv"; }

struct BandwidthChoice {
    bool cross_validate = false;
    double h = 0.05;
    std::vector<double> cv_grid;
};

struct ThresholdChoice {
    bool automatic = true;
    double multiplier = 25.0;  // automatic: cutoff = multiplier * median |dX|^2
    double c = 1.0;            // fixed c when not automatic
    double beta = 0.49;
    ThresholdMode mode = ThresholdMode::squared_norm;

    [[nodiscard]] ThresholdSpec resolve(const IncrementSeries& inc) const {
        if (automatic) return calibrate_threshold(inc, multiplier, beta, mode);
        return {c, beta, mode};
    }
};

struct McConfig {
    Model model = Model::heston;
    HestonConfig heston = HestonConfig::defaults();
    JumpConfig jumps{};
    double horizon = 2.0;
    std::size_t reps = 500;
    std::vector<std::size_t> frequencies{2880};
    std::vector<std::string> kernels{"gaussian"};
    Estimator estimator = Estimator::kcv;
    std::optional<Window> window;  // default: 10% trimmed each side
    BandwidthChoice bandwidth{};
    ThresholdChoice threshold{};
    std::uint64_t master_seed = 1;
    Element element{};
    std::size_t eval_points = 161;
    std::optional<double> qq_tau;  // default: T/2
    double band_level = 0.95;

    [[nodiscard]] Window resolved_window() const { return window.value_or(default_window(horizon)); }
    [[nodiscard]] double resolved_qq_tau() const { return qq_tau.value_or(0.5 * horizon); }
    [[nodiscard]] std::size_t fine_n() const {
        return *std::max_element(frequencies.begin(), frequencies.end());
    }

    void validate() const {
        if (reps < 2) throw invalid_argument("reps must be at least 2");
        if (frequencies.empty()) throw invalid_argument("frequencies must be nonempty");
        if (kernels.empty()) throw invalid_argument("kernels must be nonempty");
        for (const auto& k : kernels) (void)KernelSpec::from_name(k);
        if (!(horizon > 0.0)) throw invalid_argument("horizon must be positive");
        const std::size_t fine = fine_n();
        for (std::size_t n : frequencies) {
            if (n < 2) throw invalid_argument("frequencies: each n must be at least 2");
            if (fine % n != 0) throw invalid_argument("frequencies: each n must divide the largest n");
        }
        const Window w = resolved_window();
        if (!(0.0 < w.lo && w.lo < w.hi && w.hi < horizon))
            throw invalid_argument("window must satisfy 0 < t_l < t_u < T");
        if (eval_points < 2) throw invalid_argument("eval_points must be at least 2");
        const double q = resolved_qq_tau();
        if (!(q >= 0.0 && q <= horizon)) throw invalid_argument("qq_tau must lie in [0, T]");
        if (!(band_level > 0.0 && band_level < 1.0)) throw invalid_argument("band_level must lie in (0, 1)");
        if (element.k > 1 || element.l > 1) throw invalid_argument("element indices must be 1 or 2");
        if (bandwidth.cross_validate) {
            BandwidthGrid{bandwidth.cv_grid, w}.validate(horizon);
        } else if (!(bandwidth.h > 0.0)) {
            throw invalid_argument("bandwidth.h must be positive");
        }
        if (estimator == Estimator::tkcv) {
            if (!(threshold.beta > 0.0 && threshold.beta < 1.0)) throw invalid_argument("threshold.beta must lie in (0, 1)");
            if (threshold.automatic ? !(threshold.multiplier > 0.0) : !(threshold.c > 0.0))
                throw invalid_argument("threshold scale must be positive");
        }
        heston.validate();
        if (model == Model::bates) jumps.validate();
    }
};

struct McCell {
    std::string kernel;
    std::size_t n = 0;
    double delta = 0.0;
    double imse = 0.0;
    double isb = 0.0;
    std::size_t reps = 0;  // successful replications
    std::size_t failed = 0;
    std::vector<double> bandwidths;   // per successful replication
    std::vector<double> ise_per_rep;  // element ISE per successful replication
    std::vector<double> z;            // standardized error at qq_tau
    double coverage = 0.0;            // band coverage of the truth at qq_tau
};

struct McReport {
    std::vector<double> eval_times;
    CovPath truth;  // true spot covariance at eval_times
    CovMatrix truth_at_qq;
    double qq_tau = 0.0;
    std::size_t jump_count = 0;
    std::vector<McCell> cells;  // kernel-major, then frequency in config order

    [[nodiscard]] const McCell& cell(const std::string& kernel, std::size_t n) const {
        for (const auto& c : cells)
            if (c.kernel == kernel && c.n == n) return c;
        throw invalid_argument("McReport: no cell for kernel " + kernel + " and n " + std::to_string(n));
    }
};

namespace detail {

inline std::size_t truth_index(double t, double delta, std::size_t n) {
    return std::min(n, static_cast<std::size_t>(std::floor(t / delta + 1e-9)));
}

struct RepCellResult {
    bool ok = false;
    std::string error;
    double h = 0.0;
    std::vector<double> err;
    double z = 0.0;
    bool covered = false;
};

inline PricePath subsample(const PricePath& fine, std::size_t n) {
    const std::size_t stride = fine.grid().increments() / n;
    if (stride == 1) return fine;
    RowMatrix x(static_cast<Eigen::Index>(n + 1), fine.values().cols());
    for (std::size_t i = 0; i <= n; ++i)
        x.row(static_cast<Eigen::Index>(i)) = fine.values().row(static_cast<Eigen::Index>(i * stride));
    return {TimeGrid(fine.grid().horizon(), n), std::move(x)};
}

}  // namespace detail

[[nodiscard]] inline McReport run_mc_study(const McConfig& cfg) {
    cfg.validate();
    const Window window = cfg.resolved_window();
    const TimeGrid fine(cfg.horizon, cfg.fine_n());
    const StreamSeeds master = StreamSeeds::derive(cfg.master_seed);

    // Trajectories held fixed across replications.
    const auto v1 = simulate_cir(cfg.heston.cir[0], fine, master.vol1);
    const auto v2 = simulate_cir(cfg.heston.cir[1], fine, master.vol2);
    std::optional<JumpPath> jumps;
    if (cfg.model == Model::bates) jumps = simulate_compound_poisson(cfg.jumps, fine, master.jumps);
    const CovPath fine_truth = heston_true_cov(fine, v1, v2, cfg.heston.rho);

    McReport report;
    report.qq_tau = cfg.resolved_qq_tau();
    report.jump_count = jumps ? jumps->events.size() : 0;
    const double step = (window.hi - window.lo) / static_cast<double>(cfg.eval_points - 1);
    std::vector<CovMatrix> truth_series;
    for (std::size_t j = 0; j < cfg.eval_points; ++j) {
        const double t = j + 1 == cfg.eval_points ? window.hi : window.lo + step * static_cast<double>(j);
        report.eval_times.push_back(t);
        truth_series.push_back(fine_truth[detail::truth_index(t, fine.delta(), fine.increments())]);
    }
    report.truth = CovPath(report.eval_times, std::move(truth_series));
    report.truth_at_qq = fine_truth[detail::truth_index(report.qq_tau, fine.delta(), fine.increments())];
    const OmegaArray omega_true = omega(report.truth_at_qq);
    const double truth_qq = report.truth_at_qq(cfg.element.k, cfg.element.l);

    const std::size_t n_cells = cfg.kernels.size() * cfg.frequencies.size();
    std::vector<std::vector<detail::RepCellResult>> results(cfg.reps, std::vector<detail::RepCellResult>(n_cells));

    parallel_for(cfg.reps, [&](std::size_t r) {
        const std::uint64_t rs = replication_seed(cfg.master_seed, r);
        const PricePath fine_path =
            simulate_log_prices(cfg.heston, fine, v1, v2, stream_seed(rs, "diffusion-1"), stream_seed(rs, "diffusion-2"),
                                jumps ? &jumps->increments : nullptr);
        for (std::size_t f = 0; f < cfg.frequencies.size(); ++f) {
            const std::size_t n = cfg.frequencies[f];
            const IncrementSeries inc = log_returns(detail::subsample(fine_path, n));
            std::optional<ThresholdSpec> thr;
            for (std::size_t kk = 0; kk < cfg.kernels.size(); ++kk) {
                auto& out = results[r][kk * cfg.frequencies.size() + f];
                try {
                    const KernelSpec& spec = KernelSpec::from_name(cfg.kernels[kk]);
                    if (cfg.estimator == Estimator::tkcv && !thr) thr = cfg.threshold.resolve(inc);
                    out.h = cfg.bandwidth.cross_validate
                                ? cv_bandwidth(inc, spec, BandwidthGrid{cfg.bandwidth.cv_grid, window}).h
                                : cfg.bandwidth.h;
                    auto estimate = [&](double t) {
                        return cfg.estimator == Estimator::kcv ? kcv(inc, spec, out.h, t) : tkcv(inc, spec, out.h, t, *thr);
                    };
                    std::vector<CovMatrix> path;
                    path.reserve(report.eval_times.size());
                    for (double t : report.eval_times) path.push_back(estimate(t));
                    out.err = detail::element_error(CovPath(report.eval_times, std::move(path)), report.truth, cfg.element);
                    const CovMatrix at_qq = estimate(report.qq_tau);
                    const double delta = inc.grid().delta();
                    out.z = standardized_errors({at_qq}, report.truth_at_qq, omega_true, delta, out.h, spec)[0](
                        static_cast<Eigen::Index>(cfg.element.k), static_cast<Eigen::Index>(cfg.element.l));
                    const CovBand band = asymptotic_band(at_qq, omega(at_qq), delta, out.h, spec, cfg.band_level);
                    out.covered = band.covers(cfg.element.k, cfg.element.l, truth_qq);
                    out.ok = true;
                } catch (const std::exception& ex) {
                    out.error = ex.what();
                }
            }
        }
    });

    for (std::size_t kk = 0; kk < cfg.kernels.size(); ++kk)
        for (std::size_t f = 0; f < cfg.frequencies.size(); ++f) {
            const std::size_t c = kk * cfg.frequencies.size() + f;
            McCell cell;
            cell.kernel = KernelSpec::from_name(cfg.kernels[kk]).name();
            cell.n = cfg.frequencies[f];
            cell.delta = cfg.horizon / static_cast<double>(cell.n);
            std::vector<double> mean_err(report.eval_times.size(), 0.0);
            std::size_t covered = 0;
            std::string first_error;
            for (std::size_t r = 0; r < cfg.reps; ++r) {
                const auto& res = results[r][c];
                if (!res.ok) {
                    ++cell.failed;
                    if (first_error.empty()) first_error = res.error;
                    continue;
                }
                ++cell.reps;
                cell.bandwidths.push_back(res.h);
                cell.ise_per_rep.push_back(integrated_square(report.eval_times, res.err, window));
                cell.z.push_back(res.z);
                covered += res.covered ? 1 : 0;
                for (std::size_t j = 0; j < mean_err.size(); ++j) mean_err[j] += res.err[j];
            }
            if (static_cast<double>(cell.failed) > 0.01 * static_cast<double>(cfg.reps) || cell.reps == 0)
                throw invalid_state("run_mc_study: " + std::to_string(cell.failed) + " of " + std::to_string(cfg.reps) +
                                    " replications failed for kernel " + cell.kernel + ", n=" + std::to_string(cell.n) +
                                    ": " + first_error);
            const auto reps = static_cast<double>(cell.reps);
            cell.imse = std::accumulate(cell.ise_per_rep.begin(), cell.ise_per_rep.end(), 0.0) / reps;
            for (double& m : mean_err) m /= reps;
            cell.isb = integrated_square(report.eval_times, mean_err, window);
            cell.coverage = static_cast<double>(covered) / reps;
            report.cells.push_back(std::move(cell));
        }
    return report;
}

}  // namespace spotcov
