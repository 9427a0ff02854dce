#pragma once

// Euler simulation of the bivariate Heston model (CIR variances, correlated
// price shocks, no leverage) and its Bates extension with compound Poisson
// jumps in log-prices.
//
// Log-prices are simulated directly:
//   X_k(t+d) = X_k(t) + mu_k d + sigma_k(t) sqrt(d) eps_k + J_k,   corr(eps_1, eps_2) = rho
// so the spot covariance of log-returns over a step is exactly Sigma(t).
// Variances use full truncation and are floored at zero:
//   v(t+d) = max(0, v + kappa (theta - v) d + eta sqrt(v) sqrt(d) xi)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spotcov/errors.hpp"
#include "spotcov/rng.hpp"
#include "spotcov/timeseries.hpp"

namespace spotcov {

inline constexpr double kTradingDaysPerYear = 252.0;

struct CirParams {
    double kappa = 5.0;
    double theta = 0.04;
    double eta = 0.5;
    double v0 = 0.04;

    void validate(const std::string& where = "cir") const {
        if (!(kappa > 0.0)) throw invalid_argument(where + ".kappa must be positive");
        if (!(theta > 0.0)) throw invalid_argument(where + ".theta must be positive");
        if (!(eta >= 0.0)) throw invalid_argument(where + ".eta must be nonnegative");
        if (!(v0 > 0.0)) throw invalid_argument(where + ".v0 must be positive");
    }
};

struct HestonConfig {
    std::array<double, 2> mu{0.0, 0.0};
    std::array<CirParams, 2> cir{};
    double rho = 0.5;
    // Price/variance correlation. Only zero is supported.
    double leverage = 0.0;

    void validate() const {
        if (!(std::abs(rho) < 1.0)) throw invalid_argument("rho must satisfy |rho| < 1");
        if (leverage != 0.0) throw invalid_argument("leverage must be 0 (variances independent of price shocks)");
        for (double m : mu)
            if (!std::isfinite(m)) throw invalid_argument("mu must be finite");
        cir[0].validate("cir[0]");
        cir[1].validate("cir[1]");
    }

    /// kappa = (5, 4), theta = (0.04, 0.09), eta = (0.5, 0.4), rho = 0.5,
    /// mu = 0, read as annualized levels and converted to a one-day time
    /// unit (kappa, theta and eta each divided by 252); v0 = theta.
    static HestonConfig defaults() {
        HestonConfig c;
        const double y = kTradingDaysPerYear;
        c.cir[0] = {5.0 / y, 0.04 / y, 0.5 / y, 0.04 / y};
        c.cir[1] = {4.0 / y, 0.09 / y, 0.4 / y, 0.09 / y};
        c.rho = 0.5;
        return c;
    }
};

struct JumpConfig {
    double lambda = 5.0;
    std::array<double, 2> jump_mean{0.0, 0.0};
    std::array<double, 2> jump_sd{0.02, 0.02};

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw invalid_argument("jumps.lambda must be >= 0");
        for (double s : jump_sd)
            if (!(s >= 0.0)) throw invalid_argument("jumps.jump_sd must be >= 0");
        for (double m : jump_mean)
            if (!std::isfinite(m)) throw invalid_argument("jumps.jump_mean must be finite");
    }
};

/// Seeds for each labelled substream.
struct StreamSeeds {
    std::uint64_t vol1, vol2, diffusion1, diffusion2, jumps;

    static StreamSeeds derive(std::uint64_t master) {
        return {stream_seed(master, "vol-1"), stream_seed(master, "vol-2"), stream_seed(master, "diffusion-1"),
                stream_seed(master, "diffusion-2"), stream_seed(master, "jumps")};
    }
};

struct JumpEvent {
    double time;
    std::size_t step;  // increment [t_step, t_step+1) containing the jump
    Eigen::Vector2d size;
};

struct JumpPath {
    std::vector<JumpEvent> events;
    RowMatrix increments;  // n x 2, summed jump sizes per grid step
};

struct SimOutput {
    PricePath prices;
    CovPath true_cov;  // Sigma(t_i) at every grid point
    std::vector<JumpEvent> jump_times;
    std::uint64_t seed;
    std::array<std::vector<double>, 2> variance;
};

/// One Euler step of the CIR recursion with full truncation.
[[nodiscard]] inline double cir_step(const CirParams& p, double v, double delta, double xi) noexcept {
    const double vp = std::max(v, 0.0);
    const double next = v + p.kappa * (p.theta - vp) * delta + p.eta * std::sqrt(vp) * std::sqrt(delta) * xi;
    return std::max(next, 0.0);
}

[[nodiscard]] inline std::vector<double> simulate_cir(const CirParams& p, const TimeGrid& grid, std::uint64_t seed) {
    p.validate();
    Engine eng = make_engine(seed);
    std::normal_distribution<double> normal;
    std::vector<double> v(grid.size());
    v[0] = p.v0;
    const double delta = grid.delta();
    for (std::size_t i = 1; i < v.size(); ++i) v[i] = cir_step(p, v[i - 1], delta, normal(eng));
    return v;
}

/// Jump count ~ Poisson(lambda T), times uniform on [0, T), sizes i.i.d.
/// normal per asset. Events are sorted by time.
[[nodiscard]] inline JumpPath simulate_compound_poisson(const JumpConfig& jc, const TimeGrid& grid,
                                                        std::uint64_t seed) {
    jc.validate();
    const auto n = static_cast<Eigen::Index>(grid.increments());
    JumpPath out{{}, RowMatrix::Zero(n, 2)};
    if (jc.lambda == 0.0) return out;
    Engine eng = make_engine(seed);
    std::poisson_distribution<long> count_dist(jc.lambda * grid.horizon());
    const long count = count_dist(eng);
    std::uniform_real_distribution<double> unif(0.0, grid.horizon());
    std::normal_distribution<double> normal;
    std::vector<double> times(static_cast<std::size_t>(count));
    for (auto& t : times) t = unif(eng);
    std::sort(times.begin(), times.end());
    for (double t : times) {
        Eigen::Vector2d z;
        for (int k = 0; k < 2; ++k) z(k) = jc.jump_mean[static_cast<std::size_t>(k)] +
                                          jc.jump_sd[static_cast<std::size_t>(k)] * normal(eng);
        const auto step = std::min<std::size_t>(static_cast<std::size_t>(std::floor(t / grid.delta())),
                                                grid.increments() - 1);
        out.events.push_back({t, step, z});
        out.increments.row(static_cast<Eigen::Index>(step)) += z.transpose();
    }
    return out;
}

/// Places already simulated jump events on a (possibly different) grid.
[[nodiscard]] inline JumpPath place_jumps(const std::vector<JumpEvent>& events, const TimeGrid& grid) {
    JumpPath out{{}, RowMatrix::Zero(static_cast<Eigen::Index>(grid.increments()), 2)};
    for (const auto& e : events) {
        const auto step = std::min<std::size_t>(static_cast<std::size_t>(std::floor(e.time / grid.delta())),
                                                grid.increments() - 1);
        out.events.push_back({e.time, step, e.size});
        out.increments.row(static_cast<Eigen::Index>(step)) += e.size.transpose();
    }
    return out;
}

/// Spot covariance path from two variance paths and rho.
[[nodiscard]] inline CovPath heston_true_cov(const TimeGrid& grid, const std::vector<double>& v1,
                                             const std::vector<double>& v2, double rho) {
    std::vector<CovMatrix> series;
    series.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double s12 = rho * std::sqrt(v1[i]) * std::sqrt(v2[i]);
        Eigen::Matrix2d m;
        m << v1[i], s12, s12, v2[i];
        series.emplace_back(m);
    }
    return {grid.points(), std::move(series)};
}

/// Log-price Euler recursion given variance paths (grid.size() points each)
/// and optional per-step jump increments.
[[nodiscard]] inline PricePath simulate_log_prices(const HestonConfig& cfg, const TimeGrid& grid,
                                                   const std::vector<double>& v1, const std::vector<double>& v2,
                                                   std::uint64_t seed_diffusion1, std::uint64_t seed_diffusion2,
                                                   const RowMatrix* jumps = nullptr) {
    if (v1.size() != grid.size() || v2.size() != grid.size())
        throw invalid_argument("simulate_log_prices: variance paths must have one value per grid point");
    Engine e1 = make_engine(seed_diffusion1);
    Engine e2 = make_engine(seed_diffusion2);
    std::normal_distribution<double> n1, n2;
    const double delta = grid.delta();
    const double sd = std::sqrt(delta);
    const double rho_c = std::sqrt(1.0 - cfg.rho * cfg.rho);
    RowMatrix x(static_cast<Eigen::Index>(grid.size()), 2);
    x(0, 0) = 0.0;
    x(0, 1) = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double z1 = n1(e1);
        const double z2 = n2(e2);
        const double eps1 = z1;
        const double eps2 = cfg.rho * z1 + rho_c * z2;
        double dx1 = cfg.mu[0] * delta + std::sqrt(v1[i]) * sd * eps1;
        double dx2 = cfg.mu[1] * delta + std::sqrt(v2[i]) * sd * eps2;
        if (jumps) {
            dx1 += (*jumps)(static_cast<Eigen::Index>(i), 0);
            dx2 += (*jumps)(static_cast<Eigen::Index>(i), 1);
        }
        const auto r = static_cast<Eigen::Index>(i);
        x(r + 1, 0) = x(r, 0) + dx1;
        x(r + 1, 1) = x(r, 1) + dx2;
    }
    return {grid, std::move(x)};
}

[[nodiscard]] inline SimOutput simulate_heston2d(const HestonConfig& cfg, const TimeGrid& grid,
                                                 const StreamSeeds& seeds, std::uint64_t master = 0) {
    cfg.validate();
    auto v1 = simulate_cir(cfg.cir[0], grid, seeds.vol1);
    auto v2 = simulate_cir(cfg.cir[1], grid, seeds.vol2);
    auto prices = simulate_log_prices(cfg, grid, v1, v2, seeds.diffusion1, seeds.diffusion2);
    auto cov = heston_true_cov(grid, v1, v2, cfg.rho);
    return {std::move(prices), std::move(cov), {}, master, {std::move(v1), std::move(v2)}};
}

[[nodiscard]] inline SimOutput simulate_heston2d(const HestonConfig& cfg, const TimeGrid& grid, std::uint64_t seed) {
    return simulate_heston2d(cfg, grid, StreamSeeds::derive(seed), seed);
}

[[nodiscard]] inline SimOutput simulate_bates2d(const HestonConfig& cfg, const JumpConfig& jc, const TimeGrid& grid,
                                                const StreamSeeds& seeds, std::uint64_t master = 0) {
    cfg.validate();
    jc.validate();
    auto v1 = simulate_cir(cfg.cir[0], grid, seeds.vol1);
    auto v2 = simulate_cir(cfg.cir[1], grid, seeds.vol2);
    auto jumps = simulate_compound_poisson(jc, grid, seeds.jumps);
    auto prices = simulate_log_prices(cfg, grid, v1, v2, seeds.diffusion1, seeds.diffusion2, &jumps.increments);
    auto cov = heston_true_cov(grid, v1, v2, cfg.rho);
    return {std::move(prices), std::move(cov), std::move(jumps.events), master, {std::move(v1), std::move(v2)}};
}

[[nodiscard]] inline SimOutput simulate_bates2d(const HestonConfig& cfg, const JumpConfig& jc, const TimeGrid& grid,
                                                std::uint64_t seed) {
    return simulate_bates2d(cfg, jc, grid, StreamSeeds::derive(seed), seed);
}

}  // namespace spotcov
