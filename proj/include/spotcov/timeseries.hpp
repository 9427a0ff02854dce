#pragma once

// Core value types: uniform time grids, price paths, increments, symmetric
// covariance snapshots and their half-vectorization.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spotcov/errors.hpp"

namespace spotcov {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPsdSlack = 1e-10;

/// Equally spaced observation times 0 = t_0 < ... < t_n = T.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n) : horizon_(horizon), n_(n) {
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw invalid_argument("TimeGrid: horizon T must be positive and finite");
        if (n < 2) throw invalid_argument("TimeGrid: need at least 2 increments (n >= 2)");
    }

    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t increments() const noexcept { return n_; }
    [[nodiscard]] std::size_t size() const noexcept { return n_ + 1; }
    [[nodiscard]] double delta() const noexcept { return horizon_ / static_cast<double>(n_); }

    // Computed as T*i/n so that the last point is exactly T.
    [[nodiscard]] double point(std::size_t i) const noexcept {
        return horizon_ * static_cast<double>(i) / static_cast<double>(n_);
    }

    [[nodiscard]] std::vector<double> points() const {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = point(i);
        return out;
    }

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_;
    std::size_t n_;
};

[[nodiscard]] inline TimeGrid build_uniform_grid(double horizon, std::size_t n) {
    return TimeGrid(horizon, n);
}

/// Log-prices X_k(t_i), one row per grid point.
class PricePath {
public:
    PricePath(TimeGrid grid, RowMatrix values) : grid_(grid), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.rows()) != grid_.size())
            throw invalid_argument("PricePath: row count must equal number of grid points");
        if (values_.cols() < 1) throw invalid_argument("PricePath: need at least one asset");
        if (!values_.allFinite()) throw invalid_argument("PricePath: non-finite price value");
    }

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t assets() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    [[nodiscard]] const RowMatrix& values() const noexcept { return values_; }

private:
    TimeGrid grid_;
    RowMatrix values_;
};

/// Row i holds X(t_{i+1}) - X(t_i), the increment starting at t_i.
class IncrementSeries {
public:
    IncrementSeries(TimeGrid grid, RowMatrix values) : grid_(grid), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.rows()) != grid_.increments())
            throw invalid_argument("IncrementSeries: row count must equal number of increments");
        if (values_.cols() < 1) throw invalid_argument("IncrementSeries: need at least one asset");
    }

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t assets() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    [[nodiscard]] const RowMatrix& values() const noexcept { return values_; }
    [[nodiscard]] auto row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)); }
    // Left endpoint t_{i} of increment i.
    [[nodiscard]] double start_time(std::size_t i) const noexcept { return grid_.point(i); }

private:
    TimeGrid grid_;
    RowMatrix values_;
};

[[nodiscard]] inline IncrementSeries log_returns(const PricePath& path) {
    const auto& x = path.values();
    const Eigen::Index n = x.rows() - 1;
    RowMatrix inc = x.bottomRows(n) - x.topRows(n);
    return {path.grid(), std::move(inc)};
}

/// Symmetric d x d matrix. Symmetry is checked on construction.
class CovMatrix {
public:
    CovMatrix() = default;

    explicit CovMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) throw invalid_argument("CovMatrix: matrix must be square");
        if (m_.rows() < 1) throw invalid_argument("CovMatrix: empty matrix");
        if (!m_.allFinite()) throw invalid_argument("CovMatrix: non-finite entry");
        for (Eigen::Index i = 0; i < m_.rows(); ++i)
            for (Eigen::Index j = 0; j < i; ++j)
                if (std::abs(m_(i, j) - m_(j, i)) > kSymmetryTol)
                    throw invalid_argument("CovMatrix: matrix is not symmetric");
    }

    static CovMatrix zero(std::size_t d) {
        const auto n = static_cast<Eigen::Index>(d);
        return CovMatrix(Eigen::MatrixXd::Zero(n, n));
    }

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
    [[nodiscard]] double operator()(std::size_t k, std::size_t l) const {
        return m_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
    }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return m_; }
    [[nodiscard]] double trace() const { return m_.trace(); }

    /// Smallest eigenvalue is no lower than -slack * |trace|.
    [[nodiscard]] bool is_psd(double slack = kPsdSlack) const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff() >= -slack * std::abs(m_.trace());
    }

    bool operator==(const CovMatrix& o) const { return m_.rows() == o.m_.rows() && m_ == o.m_; }

private:
    Eigen::MatrixXd m_;
};

/// Estimated or true covariance trajectory at increasing times.
class CovPath {
public:
    CovPath() = default;
    CovPath(std::vector<double> times, std::vector<CovMatrix> series)
        : times_(std::move(times)), series_(std::move(series)) {
        if (times_.size() != series_.size())
            throw invalid_argument("CovPath: times and series differ in length");
        for (std::size_t j = 1; j < times_.size(); ++j)
            if (!(times_[j] > times_[j - 1])) throw invalid_argument("CovPath: times must be strictly increasing");
        for (std::size_t j = 1; j < series_.size(); ++j)
            if (series_[j].dim() != series_[0].dim()) throw invalid_argument("CovPath: mixed dimensions");
    }

    [[nodiscard]] std::size_t size() const noexcept { return times_.size(); }
    [[nodiscard]] bool empty() const noexcept { return times_.empty(); }
    [[nodiscard]] std::size_t dim() const noexcept { return series_.empty() ? 0 : series_.front().dim(); }
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
    [[nodiscard]] const std::vector<CovMatrix>& series() const noexcept { return series_; }
    [[nodiscard]] const CovMatrix& operator[](std::size_t j) const { return series_[j]; }

    /// One element (k, l) along the path.
    [[nodiscard]] std::vector<double> element(std::size_t k, std::size_t l) const {
        std::vector<double> out;
        out.reserve(series_.size());
        for (const auto& m : series_) out.push_back(m(k, l));
        return out;
    }

private:
    std::vector<double> times_;
    std::vector<CovMatrix> series_;
};

[[nodiscard]] constexpr std::size_t vech_length(std::size_t d) noexcept { return d * (d + 1) / 2; }

/// Dimension d with d(d+1)/2 == len.
[[nodiscard]] inline std::size_t vech_dim(std::size_t len) {
    std::size_t d = 0;
    while (vech_length(d) < len) ++d;
    if (vech_length(d) != len) throw invalid_argument("vech: length is not triangular");
    return d;
}

/// Lower triangle stacked column by column: (m11, m21, ..., md1, m22, ..., mdd).
/// Works for any square matrix; symmetry is the caller's concern.
[[nodiscard]] inline Eigen::VectorXd vech_lower(const Eigen::MatrixXd& m) {
    const Eigen::Index d = m.rows();
    Eigen::VectorXd out(static_cast<Eigen::Index>(vech_length(static_cast<std::size_t>(d))));
    Eigen::Index p = 0;
    for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index r = c; r < d; ++r) out(p++) = m(r, c);
    return out;
}

[[nodiscard]] inline Eigen::VectorXd vech(const CovMatrix& m) { return vech_lower(m.matrix()); }

/// Lower-triangular matrix from its vech; upper triangle left zero.
[[nodiscard]] inline Eigen::MatrixXd unvech_lower(const Eigen::VectorXd& v) {
    const auto d = static_cast<Eigen::Index>(vech_dim(static_cast<std::size_t>(v.size())));
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    Eigen::Index p = 0;
    for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index r = c; r < d; ++r) m(r, c) = v(p++);
    return m;
}

[[nodiscard]] inline CovMatrix unvech(const Eigen::VectorXd& v) {
    Eigen::MatrixXd m = unvech_lower(v);
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose().triangularView<Eigen::StrictlyUpper>();
    return CovMatrix(std::move(m));
}

/// Column labels s_k_l in vech order (1-based indices).
[[nodiscard]] inline std::vector<std::string> vech_labels(std::size_t d, const std::string& prefix = "s") {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t r = c; r < d; ++r)
            out.push_back(prefix + "_" + std::to_string(r + 1) + "_" + std::to_string(c + 1));
    return out;
}

}  // namespace spotcov
