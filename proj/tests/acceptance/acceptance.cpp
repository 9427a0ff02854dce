// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "spotcov/forecasting.hpp"
#include "spotcov/mc.hpp"

using namespace spotcov;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---------------------------------------------------------------- 1
Verdict oracle_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 0.01);
    const char* kernels[] = {"gaussian", "onesided", "beta"};
    double worst = 0.0;
    int compared = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const int d = 1 + inst % 4;
        const int n = 10 + static_cast<int>(u01(rng) * 991);
        const double horizon = 0.5 + 2.0 * u01(rng);
        Eigen::MatrixXd dx(n, d);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < d; ++k) dx(i, k) = nd(rng) * (u01(rng) < 0.02 ? 20.0 : 1.0);
        const IncrementSeries inc(TimeGrid(horizon, static_cast<std::size_t>(n)), RowMatrix(dx));
        const char* kname = kernels[inst % 3];
        const KernelSpec& spec = KernelSpec::from_name(kname);
        const double h = (0.02 + 0.3 * u01(rng)) * horizon;
        const double tau = horizon * u01(rng);
        const ThresholdMode mode = inst % 2 ? ThresholdMode::norm : ThresholdMode::squared_norm;
        const ThresholdSpec thr = calibrate_threshold(inc, 4.0 + 20.0 * u01(rng), 0.49, mode);
        const double cut = d * thr.c * std::pow(horizon / n, thr.beta);
        auto keep = [&](int i) {
            const long double sq = dx.row(i).cast<long double>().squaredNorm();
            return mode == ThresholdMode::squared_norm ? sq <= cut : std::sqrt(sq) <= cut;
        };
        const Eigen::MatrixXd want = oracle::naive_kcv(dx, horizon, kname, h, tau);
        const Eigen::MatrixXd want_t = oracle::naive_kcv(dx, horizon, kname, h, tau, keep);
        if (want.cwiseAbs().maxCoeff() > 0.0) {
            worst = std::max(worst, oracle::rel_diff(kcv(inc, spec, h, tau).matrix(), want));
            ++compared;
        }
        if (want_t.cwiseAbs().maxCoeff() > 0.0) {
            worst = std::max(worst, oracle::rel_diff(tkcv(inc, spec, h, tau, thr).matrix(), want_t));
            ++compared;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= 1e-12 && secs < 10.0 && compared >= 150,
            "max rel diff " + fmt("%.2e", worst) + " over " + std::to_string(compared) + " comparisons (tol 1e-12), " +
                fmt("%.1f", secs) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------- 2, 6
McConfig heston_study() {
    McConfig cfg;
    cfg.reps = 500;
    cfg.frequencies = {2880};
    cfg.kernels = {"gaussian"};
    cfg.bandwidth.h = 0.04;
    cfg.master_seed = 2;
    cfg.qq_tau = 1.0;
    cfg.element = {1, 0};
    return cfg;
}

const McReport& heston_report() {
    static const McReport r = run_mc_study(heston_study());
    return r;
}

Verdict asymptotic_normality() {
    const auto start = std::chrono::steady_clock::now();
    const McCell& c = heston_report().cells.front();
    const auto qq = qq_data(c.z);
    const double ks = ks_statistic_normal(c.z);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = c.z.size() == 500 && qq.slope >= 0.9 && qq.slope <= 1.1 && ks < 0.073 && secs < 300.0;
    return {ok, "N=" + std::to_string(c.z.size()) + ", QQ slope " + fmt("%.4f", qq.slope) + " (need [0.9, 1.1]), KS " +
                    fmt("%.4f", ks) + " (need < 0.073), " + fmt("%.1f", secs) + " s"};
}

Verdict band_coverage() {
    const McCell& c = heston_report().cells.front();
    return {c.reps == 500 && c.coverage >= 0.92 && c.coverage <= 0.98,
            "coverage " + fmt("%.3f", c.coverage) + " over " + std::to_string(c.reps) + " reps (need [0.92, 0.98])"};
}

// ---------------------------------------------------------------- 3
Verdict convergence_ordering() {
    const auto start = std::chrono::steady_clock::now();
    McConfig cfg;
    cfg.reps = 500;
    cfg.frequencies = {576, 2880, 34560};
    cfg.kernels = {"onesided"};
    cfg.bandwidth.h = 0.05;
    cfg.master_seed = 3;
    const McReport r = run_mc_study(cfg);
    std::string detail;
    bool ok = true;
    std::pair<double, double> prev{};
    for (std::size_t f = 0; f < 3; ++f) {
        const McCell& c = r.cells[f];
        const auto ci = bootstrap_mean_interval(c.ise_per_rep, 2000, 0.95, 77 + f);
        detail += "n=" + std::to_string(c.n) + " IMSE " + fmt("%.3e", c.imse) + " [" + fmt("%.3e", ci.first) + ", " +
                  fmt("%.3e", ci.second) + "]; ";
        if (c.reps != 500) ok = false;
        if (f > 0 && !(c.imse < r.cells[f - 1].imse && ci.second < prev.first)) ok = false;
        prev = ci;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ok = ok && secs < 900.0;
    return {ok, detail + fmt("%.1f", secs) + " s (limit 900 s)"};
}

// ---------------------------------------------------------------- 4
Verdict jump_robustness() {
    const double delta = 2.0 / 2880.0;
    McConfig cfg;
    cfg.model = Model::bates;
    cfg.reps = 200;
    cfg.frequencies = {2880};
    cfg.kernels = {"gaussian"};
    cfg.bandwidth.h = 0.04;
    cfg.master_seed = 4;
    cfg.jumps.lambda = 5.0;
    for (int k = 0; k < 2; ++k) cfg.jumps.jump_sd[k] = 10.0 * std::sqrt(cfg.heston.cir[k].theta * delta);
    const McReport plain = run_mc_study(cfg);
    cfg.estimator = Estimator::tkcv;
    const McReport thresholded = run_mc_study(cfg);
    const double ratio = thresholded.cells[0].imse / plain.cells[0].imse;

    // Jump-free path, threshold too large to exclude anything.
    const SimOutput sim = simulate_heston2d(HestonConfig::defaults(), TimeGrid(2.0, 2880), 44);
    const IncrementSeries inc = log_returns(sim.prices);
    const auto& spec = KernelSpec::get(KernelKind::gaussian);
    std::vector<double> taus;
    for (int j = 0; j <= 200; ++j) taus.push_back(0.01 * j);
    const CovPath a = spot_covariance_path(inc, spec, 0.04, taus);
    const CovPath b = threshold_covariance_path(inc, spec, 0.04, taus, ThresholdSpec{1e12, 0.49, ThresholdMode::squared_norm});
    bool bitwise = true;
    for (std::size_t j = 0; j < a.size(); ++j) bitwise = bitwise && a[j] == b[j];
    return {ratio < 0.5 && bitwise && plain.jump_count > 0,
            std::to_string(plain.jump_count) + " jumps; TKCV/KCV IMSE " + fmt("%.4f", ratio) +
                " (need < 0.5); forced-large threshold bitwise equal: " + (bitwise ? "yes" : "no")};
}

// ---------------------------------------------------------------- 5
Verdict threshold_rate() {
    const SimOutput sim = simulate_heston2d(HestonConfig::defaults(), TimeGrid(2.0, 2880), 5);
    const ThresholdSpec thr = calibrate_threshold(log_returns(sim.prices));
    const auto rep = validate_threshold_rate(thr, {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6});
    std::string detail = "c " + fmt("%.4g", thr.c) + ", beta 0.49; modulus:";
    for (double m : rep.modulus) detail += " " + fmt("%.3g", m);
    return {rep.passes(), detail};
}

// ---------------------------------------------------------------- 7
Verdict vhar_identification() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    const std::size_t n = 200;
    std::vector<Eigen::VectorXd> f(n, Eigen::VectorXd(3));
    for (auto& v : f)
        for (int j = 0; j < 3; ++j) v(j) = u(rng);
    const Eigen::Vector3d alpha(0.02, -0.01, 0.05);
    const double bd = 0.35, bw = 0.25, bm = 0.3;
    auto build = [&](double noise) {
        std::normal_distribution<double> nd(0.0, noise);
        std::vector<Eigen::VectorXd> y(n, Eigen::VectorXd::Zero(3));
        for (std::size_t t = 21; t + 1 < n; ++t) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(3), m = Eigen::VectorXd::Zero(3);
            for (std::size_t i = 0; i < 5; ++i) w += f[t - i] / 5.0;
            for (std::size_t i = 0; i < 22; ++i) m += f[t - i] / 22.0;
            y[t + 1] = alpha + bd * f[t] + bw * w + bm * m;
            if (noise > 0.0)
                for (int j = 0; j < 3; ++j) y[t + 1](j) += nd(rng);
        }
        FactorSeries s;
        s.factors = y;
        s.dates.resize(n);
        return s;
    };
    FactorSeries reg;
    reg.factors = f;
    reg.dates.resize(n);
    const VharModel exact = fit_vhar(reg, build(0.0));
    const double coef_err = std::max({(exact.alpha - alpha).cwiseAbs().maxCoeff(), std::abs(exact.beta_d - bd),
                                      std::abs(exact.beta_w - bw), std::abs(exact.beta_m - bm)});
    // Orthogonality of residuals to every regressor column on a noisy target.
    const FactorSeries noisy = build(0.05);
    const VharModel m = fit_vhar(reg, noisy);
    Eigen::VectorXd xr = Eigen::VectorXd::Zero(6);
    double xnorm = 0.0, rnorm = 0.0;
    for (std::size_t t = 21; t + 1 < n; ++t) {
        std::vector<Eigen::VectorXd> hist(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(t + 1));
        const Eigen::VectorXd res = noisy.factors[t + 1] - m.predict_next(hist);
        const Eigen::VectorXd w = horizon_average(hist, 5, t), mo = horizon_average(hist, 22, t);
        for (int j = 0; j < 3; ++j) {
            const double row[6] = {j == 0 ? 1.0 : 0.0, j == 1 ? 1.0 : 0.0, j == 2 ? 1.0 : 0.0, f[t](j), w(j), mo(j)};
            for (int c = 0; c < 6; ++c) {
                xr(c) += row[c] * res(j);
                xnorm += row[c] * row[c];
            }
            rnorm += res(j) * res(j);
        }
    }
    const double orth = xr.cwiseAbs().maxCoeff() / std::sqrt(xnorm * rnorm);
    return {coef_err <= 1e-8 && orth <= 1e-8,
            "max coefficient error " + fmt("%.2e", coef_err) + " (tol 1e-8), residual orthogonality " + fmt("%.2e", orth) +
                " relative (tol 1e-8)"};
}

// ---------------------------------------------------------------- 8
Verdict forecasting_direction() {
    const auto start = std::chrono::steady_clock::now();
    const int experiments = 50;
    int wins[3] = {0, 0, 0};
    ForecastSettings s;  // 120 days, gaussian, h = 0.5, 80% training
    for (int e = 0; e < experiments; ++e) {
        const SimOutput sim = simulate_heston2d(HestonConfig::defaults(), TimeGrid(120.0, 120 * 1440),
                                                replication_seed(2024, static_cast<std::uint64_t>(e)));
        const LossReport r = compare_models(sim, s);
        for (int l = 0; l < 3; ++l)
            if (r.value("vhar-kcv", 1, kLossNames[l]) < r.value("vhar-rc", 1, kLossNames[l])) ++wins[l];
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const int need = 35;
    return {wins[0] >= need && wins[1] >= need && wins[2] >= need && secs < 1200.0,
            "KCV wins at horizon 1: L_E " + std::to_string(wins[0]) + "/50, L_F " + std::to_string(wins[1]) + "/50, L_Q " +
                std::to_string(wins[2]) + "/50 (need >= 35 each), " + fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------- 9
Verdict loss_identities() {
    const CovMatrix eye(Eigen::Matrix2d::Identity());
    const CovMatrix two(2.0 * Eigen::Matrix2d::Identity());
    bool ok = loss_euclidean(eye, eye) == 0.0 && loss_frobenius(eye, eye) == 0.0;
    ok = ok && std::abs(loss_qlike(eye, eye) - 2.0) <= 1e-10;
    ok = ok && std::abs(loss_qlike(eye, two) - (2.0 * std::log(2.0) + 1.0)) <= 1e-10;
    const CovMatrix h(Eigen::Matrix2d{{1.5, 0.3}, {0.3, 0.8}});
    ok = ok && std::abs(loss_euclidean(eye, h) - 0.38) <= 1e-10 && std::abs(loss_frobenius(eye, h) - 0.47) <= 1e-10;
    std::mt19937_64 rng(9);
    int minimizer_ok = 0;
    for (int i = 0; i < 100; ++i) {
        const CovMatrix s(oracle::random_pd(rng, 2)), f(oracle::random_pd(rng, 2));
        if (loss_qlike(s, f) >= loss_qlike(s, s) - 1e-10) ++minimizer_ok;
    }
    bool singular_throws = false;
    try {
        (void)loss_qlike(eye, CovMatrix(Eigen::Matrix2d::Ones()));
    } catch (const std::invalid_argument&) {
        singular_throws = true;
    }
    return {ok && minimizer_ok == 100 && singular_throws,
            std::string("closed-form cases ") + (ok ? "ok" : "FAILED") + ", QLIKE minimized at truth in " +
                std::to_string(minimizer_ok) + "/100 random PD pairs, singular forecast rejected: " +
                (singular_throws ? "yes" : "no")};
}

// ---------------------------------------------------------------- 10
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(SPOTCOV_BIN) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict cli_determinism() {
    const fs::path work = SPOTCOV_WORK_DIR;
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string fixture = (fs::path(SPOTCOV_TEST_DATA) / "fixture_prices.csv").string();
    struct Case {
        const char* command;
        std::string config;
    };
    const std::vector<Case> cases{
        {"simulate", R"({"model": "bates", "horizon": 2.0, "n": 2880, "seed": 10})"},
        {"estimate", R"({"input": ")" + fixture + R"(", "estimator": "tkcv", "bandwidth": {"h": 0.1}})"},
        {"select-bandwidth", R"({"input": ")" + fixture + R"(", "kernel": "beta"})"},
        {"mc-study", R"({"reps": 8, "frequencies": [288, 576], "kernels": ["gaussian", "onesided"],
            "bandwidth": {"method": "cv", "grid": [0.05, 0.1, 0.2]}, "seed": 3})"},
        {"forecast", R"({"days": 120, "steps_per_day": 96, "seed": 6})"},
    };
    std::string detail;
    bool ok = true;
    for (const auto& c : cases) {
        const fs::path dir = work / c.command;
        fs::create_directories(dir);
        std::ofstream(dir / "config.json") << c.config;
        const fs::path first = dir / "t1";
        bool same = run_cli(std::string(c.command) + " --config " + (dir / "config.json").string() + " --out " +
                                first.string() + " --threads 1",
                            dir / "t1.log") == 0;
        for (const char* t : {"2", "8"}) {
            const fs::path out = dir / (std::string("t") + t);
            same = same && run_cli(std::string(c.command) + " --config " + (first / "resolved_config.json").string() +
                                       " --out " + out.string() + " --threads " + t,
                                   dir / (std::string("t") + t + ".log")) == 0;
            std::size_t files = 0;
            for (const auto& e : fs::directory_iterator(first)) {
                ++files;
                same = same && fs::exists(out / e.path().filename()) &&
                       slurp(e.path()) == slurp(out / e.path().filename());
            }
            std::size_t other = 0;
            for ([[maybe_unused]] const auto& e : fs::directory_iterator(out)) ++other;
            same = same && files == other && files > 0;
        }
        detail += std::string(c.command) + (same ? " ok; " : " DIFFERS; ");
        ok = ok && same;
    }
    return {ok, detail + "threads 1/2/8, reruns from the echoed config"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"C1 oracle equivalence", oracle_equivalence},
        {"C2 asymptotic normality", asymptotic_normality},
        {"C3 convergence ordering", convergence_ordering},
        {"C4 jump robustness", jump_robustness},
        {"C5 threshold rate", threshold_rate},
        {"C6 band coverage", band_coverage},
        {"C7 VHAR identification", vhar_identification},
        {"C8 forecasting direction", forecasting_direction},
        {"C9 loss identities", loss_identities},
        {"C10 CLI determinism", cli_determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v{false, ""};
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
