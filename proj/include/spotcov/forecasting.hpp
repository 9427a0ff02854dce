#pragma once

// Covariance forecasting with a pooled vector HAR model on Cholesky factors.
//
// Daily covariance measures H_t are factorized H_t = C_t C_t' and modelled
// through f_t = vech(C_t):
//
//   y_{t+1} = alpha + b_d f_t + b_w f_{t-5:t} + b_m f_{t-22:t} + e_{t+1}
//
// with f_{t-k:t} the mean of the last k daily factors and scalar b's shared
// by all factor components. y is either f itself or the factor series of a
// target measure (true integrated covariance in simulation studies).
// Multi-step forecasts iterate the one-step rule, feeding predictions back
// in as regressor observations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spotcov/errors.hpp"
#include "spotcov/estimators.hpp"
#include "spotcov/kernels.hpp"
#include "spotcov/simulator.hpp"
#include "spotcov/timeseries.hpp"

namespace spotcov {

enum class FactorSource { realized_cov, kernel_cov, integrated_cov };

inline const char* to_string(FactorSource s) {
    switch (s) {
        case FactorSource::realized_cov: return "realized-cov";
        case FactorSource::kernel_cov: return "kernel-cov";
        case FactorSource::integrated_cov: return "integrated-cov";
    }
    return "";
}

struct FactorSeries {
    std::vector<int> dates;
    std::vector<Eigen::VectorXd> factors;
    FactorSource source = FactorSource::realized_cov;

    [[nodiscard]] std::size_t size() const noexcept { return factors.size(); }
};

/// How a day's covariance is measured.
struct DailyMethod {
    enum class Kind { realized, kernel } kind = Kind::realized;
    const KernelSpec* kernel = nullptr;
    double h = 0.5;

    static DailyMethod realized() { return {}; }
    static DailyMethod kernel_cov(const KernelSpec& spec, double h) { return {Kind::kernel, &spec, h}; }
};

namespace detail {
inline std::size_t steps_per_day(const TimeGrid& grid, std::size_t days) {
    if (days == 0) throw invalid_argument("daily_cov_series: days must be positive");
    if (grid.increments() % days != 0)
        throw invalid_argument("daily_cov_series: day boundaries are not aligned with the observation grid");
    return grid.increments() / days;
}
}  // namespace detail

/// One covariance matrix per day. Realized: sum of dX dX' over the day.
/// Kernel: KCV at the day's midpoint (weights over the whole sample) times
/// the day length, so both target the day's integrated covariance.
[[nodiscard]] inline std::vector<CovMatrix> daily_cov_series(const PricePath& prices, const DailyMethod& method,
                                                             std::size_t days) {
    const TimeGrid& grid = prices.grid();
    const std::size_t per_day = detail::steps_per_day(grid, days);
    const double day_length = grid.horizon() / static_cast<double>(days);
    const IncrementSeries inc = log_returns(prices);
    const std::size_t d = inc.assets();
    std::vector<CovMatrix> out;
    out.reserve(days);
    for (std::size_t day = 0; day < days; ++day) {
        if (method.kind == DailyMethod::Kind::realized) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
            for (std::size_t i = day * per_day; i < (day + 1) * per_day; ++i) {
                const Eigen::RowVectorXd x = inc.row(i);
                m.noalias() += x.transpose() * x;
            }
            out.emplace_back(std::move(m));
        } else {
            if (!method.kernel) throw invalid_argument("daily_cov_series: kernel method without a kernel");
            const double mid = (static_cast<double>(day) + 0.5) * day_length;
            out.emplace_back(day_length * kcv(inc, *method.kernel, method.h, mid).matrix());
        }
    }
    return out;
}

/// Trapezoid integral of a spot covariance path (one matrix per grid point)
/// over each day.
[[nodiscard]] inline std::vector<CovMatrix> daily_integrated_cov(const TimeGrid& grid, const CovPath& spot,
                                                                 std::size_t days) {
    if (spot.size() != grid.size()) throw invalid_argument("daily_integrated_cov: need one matrix per grid point");
    const std::size_t per_day = detail::steps_per_day(grid, days);
    const double delta = grid.delta();
    std::vector<CovMatrix> out;
    out.reserve(days);
    for (std::size_t day = 0; day < days; ++day) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spot.dim()), static_cast<Eigen::Index>(spot.dim()));
        for (std::size_t i = day * per_day; i < (day + 1) * per_day; ++i)
            m += 0.5 * delta * (spot[i].matrix() + spot[i + 1].matrix());
        out.emplace_back(std::move(m));
    }
    return out;
}

struct CholFactor {
    Eigen::VectorXd factor;  // vech of the lower-triangular factor
    double jitter = 0.0;     // diagonal loading applied before factorizing
};

/// vech(C) with C lower triangular, nonnegative diagonal, C C' = m. Matrices
/// that are PSD but numerically singular get a diagonal load of
/// 1e-12 * trace (or just enough to clear the smallest eigenvalue).
[[nodiscard]] inline CholFactor chol_vech(const CovMatrix& m) {
    const Eigen::MatrixXd& a = m.matrix();
    const double tr = std::abs(a.trace());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -kPsdSlack * tr) throw invalid_argument("chol_vech: matrix is not positive semidefinite");
    CholFactor out;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    const double floor = 1e-12 * tr;
    if (llt.info() != Eigen::Success || min_eig <= floor) {
        out.jitter = min_eig < 0.0 ? floor - min_eig : floor;
        if (out.jitter <= 0.0) out.jitter = 1e-300;
        llt.compute(a + out.jitter * Eigen::MatrixXd::Identity(a.rows(), a.cols()));
        if (llt.info() != Eigen::Success) throw invalid_argument("chol_vech: factorization failed after diagonal loading");
    }
    out.factor = vech_lower(llt.matrixL());
    return out;
}

/// C C' from vech(C).
[[nodiscard]] inline CovMatrix factor_to_cov(const Eigen::VectorXd& factor) {
    const Eigen::MatrixXd c = unvech_lower(factor);
    Eigen::MatrixXd m = c * c.transpose();
    m = 0.5 * (m + m.transpose()).eval();
    return CovMatrix(std::move(m));
}

[[nodiscard]] inline FactorSeries to_factor_series(const std::vector<CovMatrix>& daily, FactorSource source) {
    FactorSeries s;
    s.source = source;
    for (std::size_t t = 0; t < daily.size(); ++t) {
        s.dates.push_back(static_cast<int>(t));
        s.factors.push_back(chol_vech(daily[t]).factor);
    }
    return s;
}

/// Mean of the k daily factors ending at position t.
[[nodiscard]] inline Eigen::VectorXd horizon_average(const std::vector<Eigen::VectorXd>& f, std::size_t k,
                                                     std::size_t t) {
    if (k == 0) throw invalid_argument("horizon_average: k must be positive");
    if (t >= f.size() || t + 1 < k) throw invalid_argument("horizon_average: insufficient history");
    Eigen::VectorXd s = Eigen::VectorXd::Zero(f[t].size());
    for (std::size_t i = 0; i < k; ++i) s += f[t - i];
    return s / static_cast<double>(k);
}

[[nodiscard]] inline Eigen::VectorXd horizon_average(const FactorSeries& series, std::size_t k, std::size_t t) {
    return horizon_average(series.factors, k, t);
}

inline constexpr std::size_t kWeekDays = 5;
inline constexpr std::size_t kMonthDays = 22;

struct VharModel {
    Eigen::VectorXd alpha;
    double beta_d = 0.0;
    double beta_w = 0.0;
    double beta_m = 0.0;
    double rss = 0.0;
    std::size_t observations = 0;
    double condition = 0.0;

    /// One-step prediction from the regressor history ending at its last entry.
    [[nodiscard]] Eigen::VectorXd predict_next(const std::vector<Eigen::VectorXd>& history) const {
        const std::size_t t = history.size() - 1;
        return alpha + beta_d * history[t] + beta_w * horizon_average(history, kWeekDays, t) +
               beta_m * horizon_average(history, kMonthDays, t);
    }
};

/// Pooled least squares of target_{t+1} on [1_j, f_t, f_{t-5:t}, f_{t-22:t}]
/// across all factor components j. Throws invalid_state when the design is
/// numerically rank deficient.
[[nodiscard]] inline VharModel fit_vhar(const FactorSeries& regressors, const FactorSeries& target) {
    const std::size_t n = regressors.size();
    if (target.size() != n) throw invalid_argument("fit_vhar: regressor and target series differ in length");
    if (n < kMonthDays + 1) throw invalid_argument("fit_vhar: insufficient history (need at least 23 days)");
    const auto m = regressors.factors.front().size();
    const std::size_t rows = (n - kMonthDays) * static_cast<std::size_t>(m);
    const Eigen::Index p = m + 3;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), p);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    Eigen::Index row = 0;
    for (std::size_t t = kMonthDays - 1; t + 1 < n; ++t) {
        const Eigen::VectorXd& fd = regressors.factors[t];
        const Eigen::VectorXd fw = horizon_average(regressors.factors, kWeekDays, t);
        const Eigen::VectorXd fm = horizon_average(regressors.factors, kMonthDays, t);
        for (Eigen::Index j = 0; j < m; ++j, ++row) {
            x(row, j) = 1.0;
            x(row, m) = fd(j);
            x(row, m + 1) = fw(j);
            x(row, m + 2) = fm(j);
            y(row) = target.factors[t + 1](j);
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(sv.size() - 1);
    if (!(sv(sv.size() - 1) > 1e-10 * sv(0)))
        throw invalid_state("fit_vhar: rank-deficient design (condition number " + std::to_string(cond) + ")");
    const Eigen::VectorXd coef = svd.solve(y);
    VharModel model;
    model.alpha = coef.head(m);
    model.beta_d = coef(m);
    model.beta_w = coef(m + 1);
    model.beta_m = coef(m + 2);
    model.rss = (y - x * coef).squaredNorm();
    model.observations = rows;
    model.condition = cond;
    return model;
}

/// Own-lag fit: the series forecasts itself.
[[nodiscard]] inline VharModel fit_vhar(const FactorSeries& series) { return fit_vhar(series, series); }

/// Factor prediction `horizon` days after the last entry of `history`,
/// iterating one-step predictions.
[[nodiscard]] inline Eigen::VectorXd forecast_factor(const VharModel& model, std::vector<Eigen::VectorXd> history,
                                                     std::size_t horizon) {
    if (horizon == 0) throw invalid_argument("forecast_vhar: horizon must be positive");
    if (history.size() < kMonthDays) throw invalid_argument("forecast_vhar: insufficient history (need 22 days)");
    Eigen::VectorXd next;
    for (std::size_t s = 0; s < horizon; ++s) {
        next = model.predict_next(history);
        history.push_back(next);
    }
    return next;
}

/// Covariance forecast for horizon 1, 5 or 22 days past the end of `series`.
[[nodiscard]] inline CovMatrix forecast_vhar(const VharModel& model, const FactorSeries& series, std::size_t horizon) {
    if (horizon != 1 && horizon != 5 && horizon != 22)
        throw invalid_argument("forecast_vhar: supported horizons are 1, 5 and 22");
    return factor_to_cov(forecast_factor(model, series.factors, horizon));
}

namespace detail {
inline void check_same_dim(const CovMatrix& a, const CovMatrix& b) {
    if (a.dim() != b.dim()) throw invalid_argument("loss: dimension mismatch");
}
}  // namespace detail

/// vech(S - H)' vech(S - H).
[[nodiscard]] inline double loss_euclidean(const CovMatrix& truth, const CovMatrix& forecast) {
    detail::check_same_dim(truth, forecast);
    return vech_lower(truth.matrix() - forecast.matrix()).squaredNorm();
}

/// tr[(S - H)'(S - H)].
[[nodiscard]] inline double loss_frobenius(const CovMatrix& truth, const CovMatrix& forecast) {
    detail::check_same_dim(truth, forecast);
    const Eigen::MatrixXd e = truth.matrix() - forecast.matrix();
    return (e.transpose() * e).trace();
}

/// log|H| + tr(H^{-1} S).
[[nodiscard]] inline double loss_qlike(const CovMatrix& truth, const CovMatrix& forecast) {
    detail::check_same_dim(truth, forecast);
    Eigen::LLT<Eigen::MatrixXd> llt(forecast.matrix());
    if (llt.info() != Eigen::Success) throw invalid_argument("loss_qlike: forecast is not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    if (!std::isfinite(logdet)) throw invalid_argument("loss_qlike: forecast is singular");
    return logdet + llt.solve(truth.matrix()).trace();
}

inline constexpr std::array<std::size_t, 3> kHorizons{1, 5, 22};
inline constexpr std::array<const char*, 3> kLossNames{"L_E", "L_F", "L_Q"};
inline constexpr std::array<const char*, 2> kModelNames{"vhar-rc", "vhar-kcv"};

struct LossEntry {
    std::string model;
    std::size_t horizon;
    std::string loss;
    double value;
};

struct LossReport {
    std::vector<LossEntry> entries;
    std::array<VharModel, 2> models;  // in kModelNames order
    std::size_t train_days = 0;
    std::size_t test_days = 0;

    [[nodiscard]] double value(const std::string& model, std::size_t horizon, const std::string& loss) const {
        for (const auto& e : entries)
            if (e.model == model && e.horizon == horizon && e.loss == loss) return e.value;
        throw invalid_argument("LossReport: no entry for " + model + "/" + std::to_string(horizon) + "/" + loss);
    }
};

/// Fits both models on the first `train_days` days (target: true integrated
/// covariance factors) and averages out-of-sample losses over every
/// forecast origin whose target day lies in the test span.
[[nodiscard]] inline LossReport compare_factor_models(const FactorSeries& rc, const FactorSeries& kc,
                                                      const std::vector<CovMatrix>& integrated,
                                                      std::size_t train_days) {
    const std::size_t days = integrated.size();
    if (rc.size() != days || kc.size() != days) throw invalid_argument("compare_models: series lengths differ");
    if (train_days < kMonthDays + 2)
        throw invalid_argument("compare_models: insufficient training history (" + std::to_string(train_days) +
                               " days; need at least 24)");
    if (days < train_days + kHorizons.back())
        throw invalid_argument("compare_models: insufficient history after the training span (need 22 test days)");
    const FactorSeries ic = to_factor_series(integrated, FactorSource::integrated_cov);
    auto head = [&](const FactorSeries& s) {
        FactorSeries out;
        out.source = s.source;
        out.dates.assign(s.dates.begin(), s.dates.begin() + static_cast<std::ptrdiff_t>(train_days));
        out.factors.assign(s.factors.begin(), s.factors.begin() + static_cast<std::ptrdiff_t>(train_days));
        return out;
    };
    const FactorSeries ic_train = head(ic);
    LossReport report;
    report.train_days = train_days;
    report.test_days = days - train_days;
    const std::array<const FactorSeries*, 2> inputs{&rc, &kc};
    for (std::size_t mi = 0; mi < 2; ++mi) {
        report.models[mi] = fit_vhar(head(*inputs[mi]), ic_train);
        for (std::size_t h : kHorizons) {
            std::array<double, 3> sums{0.0, 0.0, 0.0};
            std::size_t count = 0;
            for (std::size_t origin = train_days - 1; origin + h < days; ++origin) {
                std::vector<Eigen::VectorXd> hist(inputs[mi]->factors.begin(),
                                                  inputs[mi]->factors.begin() + static_cast<std::ptrdiff_t>(origin + 1));
                const CovMatrix fc = factor_to_cov(forecast_factor(report.models[mi], std::move(hist), h));
                const CovMatrix& truth = integrated[origin + h];
                sums[0] += loss_euclidean(truth, fc);
                sums[1] += loss_frobenius(truth, fc);
                sums[2] += loss_qlike(truth, fc);
                ++count;
            }
            for (std::size_t li = 0; li < 3; ++li)
                report.entries.push_back({kModelNames[mi], h, kLossNames[li], sums[li] / static_cast<double>(count)});
        }
    }
    return report;
}

struct ForecastSettings {
    std::size_t days = 120;
    const KernelSpec* kernel = &KernelSpec::get(KernelKind::gaussian);
    double h = 0.5;
    double train_fraction = 0.8;

    [[nodiscard]] std::size_t train_days() const {
        return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(days)));
    }

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw invalid_argument("train_fraction must lie in (0, 1)");
        if (!(h > 0.0)) throw invalid_argument("h must be positive");
        if (!kernel) throw invalid_argument("kernel must be set");
        if (train_days() < kMonthDays + 2)
            throw invalid_argument("insufficient training history: " + std::to_string(train_days()) +
                                   " training days, need at least 24");
        if (days < train_days() + kHorizons.back())
            throw invalid_argument("insufficient history after the training span: need 22 test days");
    }
};

/// VHAR on realized covariance versus VHAR on kernel covariance, both
/// scored against the simulator's daily integrated covariance.
[[nodiscard]] inline LossReport compare_models(const SimOutput& sim, const ForecastSettings& s) {
    s.validate();
    const auto rc = daily_cov_series(sim.prices, DailyMethod::realized(), s.days);
    const auto kc = daily_cov_series(sim.prices, DailyMethod::kernel_cov(*s.kernel, s.h), s.days);
    const auto ic = daily_integrated_cov(sim.prices.grid(), sim.true_cov, s.days);
    return compare_factor_models(to_factor_series(rc, FactorSource::realized_cov),
                                 to_factor_series(kc, FactorSource::kernel_cov), ic, s.train_days());
}

}  // namespace spotcov
