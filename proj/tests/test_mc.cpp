#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "spotcov/mc.hpp"
#include "spotcov/parallel.hpp"

using namespace spotcov;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> t(n);
    for (int j = 0; j < n; ++j) t[j] = a + (b - a) * j / (n - 1);
    t.back() = b;
    return t;
}

CovPath offdiag_path(const std::vector<double>& t, const std::function<double(double)>& f) {
    std::vector<CovMatrix> s;
    for (double x : t) s.emplace_back(Eigen::Matrix2d{{1.0, f(x)}, {f(x), 1.0}});
    return {t, s};
}

McConfig small_config() {
    McConfig cfg;
    cfg.reps = 4;
    cfg.frequencies = {100, 200};
    cfg.kernels = {"gaussian", "onesided"};
    cfg.bandwidth.h = 0.2;
    cfg.eval_points = 41;
    cfg.master_seed = 11;
    return cfg;
}

void expect_same(const McReport& a, const McReport& b) {
    ASSERT_EQ(a.cells.size(), b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        EXPECT_EQ(a.cells[i].imse, b.cells[i].imse);
        EXPECT_EQ(a.cells[i].isb, b.cells[i].isb);
        EXPECT_EQ(a.cells[i].z, b.cells[i].z);
        EXPECT_EQ(a.cells[i].bandwidths, b.cells[i].bandwidths);
    }
}

}  // namespace

TEST(Imse, SymmetricErrorsGiveVarianceOnly) {
    const auto t = linspace(0.0, 2.0, 41);
    const double eps = 0.01;
    const auto truth = offdiag_path(t, [](double) { return 0.3; });
    const std::vector<CovPath> est{offdiag_path(t, [&](double) { return 0.3 + eps; }),
                                   offdiag_path(t, [&](double) { return 0.3 - eps; })};
    const Window w{0.2, 1.8};
    EXPECT_NEAR(imse(est, truth, w), eps * eps * 1.6, 1e-12);
    EXPECT_NEAR(isb(est, truth, w), 0.0, 1e-20);
}

TEST(Imse, ConstantBiasEqualsSquaredBiasTimesLength) {
    const auto t = linspace(0.0, 2.0, 41);
    const double b = 0.02;
    const auto truth = offdiag_path(t, [](double x) { return std::sin(x); });
    const std::vector<CovPath> est(3, offdiag_path(t, [&](double x) { return std::sin(x) + b; }));
    const Window w{0.5, 1.5};
    EXPECT_NEAR(imse(est, truth, w), b * b, 1e-12);
    EXPECT_NEAR(isb(est, truth, w), b * b, 1e-12);
}

TEST(Imse, SingleReplicationEqualsIse) {
    const auto t = linspace(0.0, 2.0, 57);
    const auto truth = offdiag_path(t, [](double x) { return 0.1 * x; });
    const auto est = offdiag_path(t, [](double x) { return 0.1 * x + 0.05 * std::cos(3.0 * x); });
    const Window w{0.2, 1.8};
    EXPECT_NEAR(imse({est}, truth, w), ise(est, truth, w), 1e-15);
    EXPECT_NEAR(isb({est}, truth, w), ise(est, truth, w), 1e-15);
}

TEST(Imse, BiasNeverExceedsMeanSquaredError) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 0.1);
    const auto t = linspace(0.0, 2.0, 21);
    const auto truth = offdiag_path(t, [](double) { return 0.0; });
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<CovPath> est;
        for (int r = 0; r < 5; ++r) {
            const double shift = nd(rng);
            est.push_back(offdiag_path(t, [&](double x) { return shift + 0.1 * x; }));
        }
        EXPECT_LE(isb(est, truth, {0.2, 1.8}), imse(est, truth, {0.2, 1.8}) * (1.0 + 1e-12));
    }
}

TEST(Imse, EmptyEnsembleThrows) {
    const auto t = linspace(0.0, 2.0, 5);
    const auto truth = offdiag_path(t, [](double) { return 0.0; });
    EXPECT_THROW((void)imse({}, truth, {0.2, 1.8}), invalid_argument);
    EXPECT_THROW((void)isb({}, truth, {0.2, 1.8}), invalid_argument);
}

TEST(Qq, PerfectNormalSampleLiesOnTheDiagonal) {
    std::vector<double> z;
    const int n = 200;
    for (int i = 1; i <= n; ++i) z.push_back(normal_quantile((i - 0.5) / n));
    std::reverse(z.begin(), z.end());
    const auto q = qq_data(z);
    EXPECT_NEAR(q.slope, 1.0, 1e-12);
    EXPECT_NEAR(q.intercept, 0.0, 1e-12);
    EXPECT_TRUE(std::is_sorted(q.empirical.begin(), q.empirical.end()));
}

TEST(Qq, AffineSampleRecoversScaleAndShift) {
    std::vector<double> z;
    for (int i = 1; i <= 50; ++i) z.push_back(2.0 * normal_quantile((i - 0.5) / 50) + 0.5);
    const auto q = qq_data(z);
    EXPECT_NEAR(q.slope, 2.0, 1e-12);
    EXPECT_NEAR(q.intercept, 0.5, 1e-12);
}

TEST(Qq, TooFewSamplesThrow) { EXPECT_THROW((void)qq_data(std::vector<double>(19, 0.0)), invalid_argument); }

TEST(Ks, KnownValues) {
    EXPECT_NEAR(ks_statistic_normal({0.0}), 0.5, 1e-15);
    std::vector<double> z;
    for (int i = 1; i <= 100; ++i) z.push_back(normal_quantile((i - 0.5) / 100));
    EXPECT_NEAR(ks_statistic_normal(z), 0.005, 1e-12);
    EXPECT_THROW((void)ks_statistic_normal({}), invalid_argument);
}

TEST(Ks, LargeNormalSampleIsSmall) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    std::vector<double> z(5000);
    for (auto& x : z) x = nd(rng);
    EXPECT_LT(ks_statistic_normal(z), 1.36 / std::sqrt(5000.0));
    for (auto& x : z) x = 1.5 * x;
    EXPECT_GT(ks_statistic_normal(z), 1.36 / std::sqrt(5000.0));
}

TEST(Bootstrap, IntervalContainsMeanAndShrinks) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(1.0, 1.0);
    std::vector<double> small(50), large(5000);
    for (auto& x : small) x = nd(rng);
    for (auto& x : large) x = nd(rng);
    const auto a = bootstrap_mean_interval(small, 2000, 0.95, 9);
    const auto b = bootstrap_mean_interval(large, 2000, 0.95, 9);
    const double m = std::accumulate(small.begin(), small.end(), 0.0) / 50.0;
    EXPECT_LT(a.first, m);
    EXPECT_GT(a.second, m);
    EXPECT_LT(b.second - b.first, a.second - a.first);
    EXPECT_NEAR(b.second - b.first, 2.0 * 1.96 / std::sqrt(5000.0), 0.01);
    EXPECT_EQ(a, bootstrap_mean_interval(small, 2000, 0.95, 9));
}

TEST(McStudy, ProducesConsistentCells) {
    const McReport r = run_mc_study(small_config());
    ASSERT_EQ(r.cells.size(), 4u);
    EXPECT_EQ(r.cells[0].kernel, "gaussian");
    EXPECT_EQ(r.cells[0].n, 100u);
    EXPECT_EQ(r.cells[1].n, 200u);
    EXPECT_EQ(r.cells[2].kernel, "onesided");
    EXPECT_EQ(r.eval_times.size(), 41u);
    for (const auto& c : r.cells) {
        EXPECT_EQ(c.reps + c.failed, 4u);
        EXPECT_EQ(c.reps, 4u);
        EXPECT_GE(c.imse, c.isb);
        EXPECT_GT(c.imse, 0.0);
        EXPECT_EQ(c.z.size(), c.reps);
        EXPECT_DOUBLE_EQ(c.delta, 2.0 / static_cast<double>(c.n));
        for (double h : c.bandwidths) EXPECT_EQ(h, 0.2);
    }
}

TEST(McStudy, SameSeedSameResult) {
    expect_same(run_mc_study(small_config()), run_mc_study(small_config()));
    McConfig other = small_config();
    other.master_seed = 12;
    EXPECT_NE(run_mc_study(other).cells[0].imse, run_mc_study(small_config()).cells[0].imse);
}

TEST(McStudy, ThreadCountDoesNotChangeResults) {
    McConfig cfg = small_config();
    cfg.estimator = Estimator::tkcv;
    cfg.model = Model::bates;
    set_thread_count(1);
    const McReport one = run_mc_study(cfg);
    set_thread_count(3);
    const McReport three = run_mc_study(cfg);
    set_thread_count(8);
    const McReport eight = run_mc_study(cfg);
    set_thread_count(0);
    expect_same(one, three);
    expect_same(one, eight);
}

TEST(McStudy, ValidationErrors) {
    McConfig cfg = small_config();
    cfg.reps = 1;
    EXPECT_THROW((void)run_mc_study(cfg), invalid_argument);
    cfg = small_config();
    cfg.frequencies = {200, 300};
    EXPECT_THROW((void)run_mc_study(cfg), invalid_argument);
    cfg = small_config();
    cfg.kernels = {"triangle"};
    EXPECT_THROW((void)run_mc_study(cfg), invalid_argument);
    cfg = small_config();
    cfg.window = Window{0.0, 1.0};
    EXPECT_THROW((void)run_mc_study(cfg), invalid_argument);
}
