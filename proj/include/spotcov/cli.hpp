#pragma once

// Config-driven commands behind the spotcov executable. Each command parses
// a JSON config into validated settings, echoes the fully resolved config
// (defaults filled in) and writes its CSV outputs into an output directory.
//
// Error classes map to exit codes in the executable: invalid_argument and
// invalid_state -> 1, io_error -> 2.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotcov/bandwidth.hpp"
#include "spotcov/csv.hpp"
#include "spotcov/errors.hpp"
#include "spotcov/estimators.hpp"
#include "spotcov/forecasting.hpp"
#include "spotcov/kernels.hpp"
#include "spotcov/mc.hpp"
#include "spotcov/simulator.hpp"

namespace spotcov::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Reads fields of one JSON object, remembering which keys were used so
/// that leftovers (typos) can be reported by name.
class ConfigReader {
public:
    ConfigReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw invalid_argument("config field '" + display() + "' must be an object");
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    [[nodiscard]] T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!has(key)) return fallback;
        return convert<T>(j_.at(key), field(key));
    }

    template <class T>
    [[nodiscard]] std::optional<T> optional(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) return std::nullopt;
        return convert<T>(j_.at(key), field(key));
    }

    [[nodiscard]] ConfigReader child(const std::string& key) {
        seen_.insert(key);
        static const Json empty = Json::object();
        return {has(key) ? j_.at(key) : empty, field(key)};
    }

    [[nodiscard]] const Json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw invalid_argument("unknown config field '" + field(item.key()) + "'");
    }

    template <class T>
    static T convert(const Json& v, const std::string& name) {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw invalid_argument("");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number_integer()) throw invalid_argument("");
                if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned()) throw invalid_argument("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw invalid_argument("");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw invalid_argument("");
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw invalid_argument("config field '" + name + "' has the wrong type (got " + v.dump() + ")");
        }
    }

private:
    [[nodiscard]] std::string display() const { return path_.empty() ? "<root>" : path_; }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// ---------------------------------------------------------------- shared parts

inline std::array<double, 2> read_pair(ConfigReader& r, const std::string& key, std::array<double, 2> fallback) {
    const auto v = r.optional<std::vector<double>>(key);
    if (!v) return fallback;
    if (v->size() != 2) throw invalid_argument("config field '" + r.field(key) + "' must have 2 entries");
    return {(*v)[0], (*v)[1]};
}

inline HestonConfig read_heston(ConfigReader r) {
    HestonConfig h = HestonConfig::defaults();
    h.mu = read_pair(r, "mu", h.mu);
    h.rho = r.get("rho", h.rho);
    h.leverage = r.get("leverage", h.leverage);
    if (r.has("cir")) {
        const Json& arr = r.raw("cir");
        if (!arr.is_array() || arr.size() != 2) throw invalid_argument("config field 'heston.cir' must list 2 assets");
        for (std::size_t k = 0; k < 2; ++k) {
            ConfigReader c(arr[k], "heston.cir[" + std::to_string(k) + "]");
            CirParams& p = h.cir[k];
            p.kappa = c.get("kappa", p.kappa);
            p.theta = c.get("theta", p.theta);
            p.eta = c.get("eta", p.eta);
            p.v0 = c.get("v0", p.theta);
            c.finish();
        }
    } else {
        (void)r.get<int>("cir", 0);
    }
    r.finish();
    h.validate();
    return h;
}

inline Json to_json(const HestonConfig& h) {
    Json cir = Json::array();
    for (const auto& p : h.cir) cir.push_back({{"kappa", p.kappa}, {"theta", p.theta}, {"eta", p.eta}, {"v0", p.v0}});
    return {{"mu", {h.mu[0], h.mu[1]}}, {"rho", h.rho}, {"leverage", h.leverage}, {"cir", cir}};
}

inline JumpConfig read_jumps(ConfigReader r) {
    JumpConfig j;
    j.lambda = r.get("lambda", j.lambda);
    j.jump_mean = read_pair(r, "jump_mean", j.jump_mean);
    j.jump_sd = read_pair(r, "jump_sd", j.jump_sd);
    r.finish();
    j.validate();
    return j;
}

inline Json to_json(const JumpConfig& j) {
    return {{"lambda", j.lambda}, {"jump_mean", {j.jump_mean[0], j.jump_mean[1]}}, {"jump_sd", {j.jump_sd[0], j.jump_sd[1]}}};
}

inline Model read_model(ConfigReader& r) {
    const auto s = r.get<std::string>("model", "heston");
    if (s == "heston") return Model::heston;
    if (s == "bates") return Model::bates;
    throw invalid_argument("config field 'model' must be \"heston\" or \"bates\"");
}

inline const KernelSpec& read_kernel(ConfigReader& r, const std::string& key, const std::string& fallback) {
    const auto name = r.get<std::string>(key, fallback);
    try {
        return KernelSpec::from_name(name);
    } catch (const std::invalid_argument& e) {
        throw invalid_argument("config field '" + r.field(key) + "': " + e.what());
    }
}

inline Estimator read_estimator(ConfigReader& r) {
    const auto s = r.get<std::string>("estimator", "kcv");
    if (s == "kcv") return Estimator::kcv;
    if (s == "tkcv") return Estimator::tkcv;
    throw invalid_argument("config field 'estimator' must be \"kcv\" or \"tkcv\"");
}

/// {"c": x} fixes the threshold scale; otherwise it is calibrated from the
/// data with {"multiplier": m}.
inline ThresholdChoice read_threshold(ConfigReader r) {
    ThresholdChoice t;
    const auto c = r.optional<double>("c");
    const auto m = r.optional<double>("multiplier");
    if (c && m) throw invalid_argument("config field 'threshold': give either c or multiplier, not both");
    if (c) {
        t.automatic = false;
        t.c = *c;
        if (!(t.c > 0.0)) throw invalid_argument("config field 'threshold.c' must be positive");
    } else if (m) {
        t.multiplier = *m;
        if (!(t.multiplier > 0.0)) throw invalid_argument("config field 'threshold.multiplier' must be positive");
    }
    t.beta = r.get("beta", t.beta);
    if (!(t.beta > 0.0 && t.beta < 1.0)) throw invalid_argument("config field 'threshold.beta' must lie in (0, 1)");
    try {
        t.mode = threshold_mode_from_name(r.get<std::string>("mode", to_string(t.mode)));
    } catch (const std::invalid_argument& e) {
        throw invalid_argument(std::string("config field 'threshold.mode': ") + e.what());
    }
    r.finish();
    return t;
}

inline Json to_json(const ThresholdChoice& t) {
    Json j = Json::object();
    if (t.automatic)
        j["multiplier"] = t.multiplier;
    else
        j["c"] = t.c;
    j["beta"] = t.beta;
    j["mode"] = to_string(t.mode);
    return j;
}

inline std::vector<double> default_cv_grid() { return {0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.5}; }

inline BandwidthChoice read_bandwidth(ConfigReader r) {
    BandwidthChoice b;
    const auto method = r.get<std::string>("method", "fixed");
    if (method == "cv") {
        b.cross_validate = true;
    } else if (method != "fixed") {
        throw invalid_argument("config field 'bandwidth.method' must be \"fixed\" or \"cv\"");
    }
    b.h = r.get("h", b.h);
    if (!(b.h > 0.0)) throw invalid_argument("config field 'bandwidth.h' must be positive");
    b.cv_grid = r.get("grid", default_cv_grid());
    r.finish();
    return b;
}

inline Json to_json(const BandwidthChoice& b) {
    if (b.cross_validate) return {{"method", "cv"}, {"grid", b.cv_grid}};
    return {{"method", "fixed"}, {"h", b.h}};
}

inline Json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

inline void prepare_out_dir(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw io_error("cannot create output directory " + out.string());
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write " + path.string());
    f << text;
    if (!f) throw io_error("write failed for " + path.string());
}

/// Writes resolved_config.json and echoes it to `log`.
inline void echo_config(const Json& resolved, const fs::path& out, std::ostream& log) {
    const std::string text = resolved.dump(2) + "\n";
    write_text(out / "resolved_config.json", text);
    log << text;
}

inline std::string join_row(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
    return s + "\n";
}

// ---------------------------------------------------------------- simulate

struct SimulateSettings {
    Model model = Model::heston;
    HestonConfig heston = HestonConfig::defaults();
    JumpConfig jumps{};
    double horizon = 2.0;
    std::size_t n = 2880;
    std::uint64_t seed = 1;

    static SimulateSettings parse(const Json& j, std::optional<std::uint64_t> seed_override) {
        ConfigReader r(j, "");
        SimulateSettings s;
        s.model = read_model(r);
        s.horizon = r.get("horizon", s.horizon);
        s.n = r.get<std::size_t>("n", s.n);
        s.seed = seed_override.value_or(r.get<std::uint64_t>("seed", s.seed));
        if (seed_override) (void)r.get<std::uint64_t>("seed", 0);
        s.heston = read_heston(r.child("heston"));
        s.jumps = read_jumps(r.child("jumps"));
        r.finish();
        (void)TimeGrid(s.horizon, s.n);
        return s;
    }

    [[nodiscard]] Json to_json() const {
        Json j = {{"model", to_string(model)}, {"horizon", horizon}, {"n", n}, {"seed", seed},
                  {"heston", cli::to_json(heston)}};
        if (model == Model::bates) j["jumps"] = cli::to_json(jumps);
        return j;
    }
};

inline int run_simulate(const Json& config, const fs::path& out, std::optional<std::uint64_t> seed,
                        std::ostream& log) {
    const SimulateSettings s = SimulateSettings::parse(config, seed);
    prepare_out_dir(out);
    echo_config(s.to_json(), out, log);
    const TimeGrid grid(s.horizon, s.n);
    const SimOutput sim = s.model == Model::bates ? simulate_bates2d(s.heston, s.jumps, grid, s.seed)
                                                  : simulate_heston2d(s.heston, grid, s.seed);
    write_prices_csv(out / "prices.csv", sim.prices);
    write_cov_path_csv(out / "true_cov.csv", sim.true_cov);
    std::vector<std::vector<double>> jumps;
    for (const auto& e : sim.jump_times)
        jumps.push_back({e.time, static_cast<double>(e.step), e.size(0), e.size(1)});
    write_csv(out / "jumps.csv", {"time", "step", "size_1", "size_2"}, jumps);
    log << "simulated " << s.n << " increments, " << sim.jump_times.size() << " jumps\n";
    return 0;
}

// ---------------------------------------------------------------- estimate

struct EstimateSettings {
    fs::path input;
    const KernelSpec* kernel = &KernelSpec::get(KernelKind::gaussian);
    Estimator estimator = Estimator::kcv;
    BandwidthChoice bandwidth{};
    ThresholdChoice threshold{};
    std::optional<Window> cv_window;
    std::size_t eval_points = 101;
    std::optional<double> eval_lo, eval_hi;
    bool band = true;
    double band_level = 0.95;

    static EstimateSettings parse(const Json& j, const fs::path& base, bool force_cv) {
        ConfigReader r(j, "");
        EstimateSettings s;
        const auto input = r.optional<std::string>("input");
        if (!input) throw invalid_argument("config field 'input' (prices CSV path) is required");
        s.input = fs::path(*input).is_absolute() ? fs::path(*input) : fs::absolute(base / *input).lexically_normal();
        s.kernel = &read_kernel(r, "kernel", "gaussian");
        s.estimator = read_estimator(r);
        s.bandwidth = read_bandwidth(r.child("bandwidth"));
        if (force_cv) s.bandwidth.cross_validate = true;
        auto thr = r.child("threshold");
        s.threshold = read_threshold(thr);
        if (r.has("cv_window")) {
            auto w = r.child("cv_window");
            s.cv_window = Window{w.get("lo", 0.0), w.get("hi", 0.0)};
            w.finish();
        } else {
            (void)r.get<int>("cv_window", 0);
        }
        auto ev = r.child("eval");
        s.eval_points = ev.get<std::size_t>("points", s.eval_points);
        s.eval_lo = ev.optional<double>("lo");
        s.eval_hi = ev.optional<double>("hi");
        ev.finish();
        if (s.eval_points < 2) throw invalid_argument("config field 'eval.points' must be at least 2");
        auto b = r.child("band");
        s.band = b.get("enabled", s.band);
        s.band_level = b.get("level", s.band_level);
        b.finish();
        if (!(s.band_level > 0.0 && s.band_level < 1.0))
            throw invalid_argument("config field 'band.level' must lie in (0, 1)");
        r.finish();
        return s;
    }

    /// Fills data-dependent defaults once the horizon is known.
    void resolve(double horizon) {
        if (!eval_lo) eval_lo = 0.0;
        if (!eval_hi) eval_hi = horizon;
        if (!(*eval_lo >= 0.0 && *eval_lo < *eval_hi && *eval_hi <= horizon))
            throw invalid_argument("config field 'eval': need 0 <= lo < hi <= T");
        if (bandwidth.cross_validate) {
            if (!cv_window) cv_window = default_window(horizon);
            try {
                BandwidthGrid{bandwidth.cv_grid, *cv_window}.validate(horizon);
            } catch (const std::invalid_argument& e) {
                throw invalid_argument(std::string("config field 'bandwidth.grid' / 'cv_window': ") + e.what());
            }
        }
    }

    [[nodiscard]] std::vector<double> eval_times() const {
        std::vector<double> t(eval_points);
        const double step = (*eval_hi - *eval_lo) / static_cast<double>(eval_points - 1);
        for (std::size_t j = 0; j < eval_points; ++j)
            t[j] = j + 1 == eval_points ? *eval_hi : *eval_lo + step * static_cast<double>(j);
        return t;
    }

    [[nodiscard]] Json to_json() const {
        Json j = {{"input", input.string()},
                  {"kernel", kernel->name()},
                  {"estimator", to_string(estimator)},
                  {"bandwidth", cli::to_json(bandwidth)}};
        if (estimator == Estimator::tkcv) j["threshold"] = cli::to_json(threshold);
        if (cv_window) j["cv_window"] = {{"lo", cv_window->lo}, {"hi", cv_window->hi}};
        j["eval"] = {{"points", eval_points}, {"lo", *eval_lo}, {"hi", *eval_hi}};
        j["band"] = {{"enabled", band}, {"level", band_level}};
        return j;
    }
};

inline int run_estimate(const Json& config, const fs::path& config_dir, const fs::path& out, bool force_cv,
                        std::ostream& log) {
    EstimateSettings s = EstimateSettings::parse(config, config_dir, force_cv);
    const PricePath prices = read_prices_csv(s.input);
    s.resolve(prices.grid().horizon());
    prepare_out_dir(out);
    echo_config(s.to_json(), out, log);

    const IncrementSeries inc = log_returns(prices);
    const double delta = prices.grid().delta();
    double h = s.bandwidth.h;
    if (s.bandwidth.cross_validate) {
        const CvResult cv = cv_bandwidth(inc, *s.kernel, BandwidthGrid{s.bandwidth.cv_grid, *s.cv_window});
        std::vector<std::vector<double>> rows;
        for (const auto& [hh, v] : cv.curve) rows.push_back({hh, v});
        write_csv(out / "cv_curve.csv", {"h", "cv_value"}, rows);
        h = cv.h;
        log << "cross-validated bandwidth h = " << format_double(h) << "\n";
    }
    std::optional<ThresholdSpec> thr;
    if (s.estimator == Estimator::tkcv) {
        thr = s.threshold.resolve(inc);
        log << "threshold c = " << format_double(thr->c) << ", beta = " << format_double(thr->beta) << "\n";
    }
    const auto times = s.eval_times();
    const CovPath path = thr ? threshold_covariance_path(inc, *s.kernel, h, times, *thr)
                             : spot_covariance_path(inc, *s.kernel, h, times);
    write_cov_path_csv(out / "spot_cov.csv", path);

    if (s.band) {
        const std::size_t d = path.dim();
        std::vector<std::string> header{"time"};
        for (const auto& l : vech_labels(d, "lower_s")) header.push_back(l);
        for (const auto& l : vech_labels(d, "upper_s")) header.push_back(l);
        std::vector<std::vector<double>> rows;
        for (std::size_t j = 0; j < path.size(); ++j) {
            std::vector<double> r{times[j]};
            try {
                const CovBand b = asymptotic_band(path[j], omega(path[j]), delta, h, *s.kernel, s.band_level);
                const Eigen::VectorXd lo = vech_lower(b.lower), hi = vech_lower(b.upper);
                r.insert(r.end(), lo.data(), lo.data() + lo.size());
                r.insert(r.end(), hi.data(), hi.data() + hi.size());
            } catch (const invalid_state&) {
                // No increments with positive weight near this time: band undefined.
                r.resize(1 + 2 * vech_length(d), std::numeric_limits<double>::quiet_NaN());
            }
            rows.push_back(std::move(r));
        }
        write_csv(out / "band.csv", header, rows);
    }
    log << "estimated " << path.size() << " spot covariance matrices with h = " << format_double(h) << "\n";
    return 0;
}

// ---------------------------------------------------------------- mc-study

inline McConfig parse_mc_config(const Json& j, std::optional<std::uint64_t> seed_override) {
    ConfigReader r(j, "");
    McConfig c;
    c.model = read_model(r);
    c.heston = read_heston(r.child("heston"));
    c.jumps = read_jumps(r.child("jumps"));
    c.horizon = r.get("horizon", c.horizon);
    c.reps = r.get<std::size_t>("reps", c.reps);
    c.frequencies = r.get("frequencies", c.frequencies);
    c.kernels = r.get("kernels", c.kernels);
    for (auto& k : c.kernels) {
        try {
            k = KernelSpec::from_name(k).name();
        } catch (const std::invalid_argument& e) {
            throw invalid_argument(std::string("config field 'kernels': ") + e.what());
        }
    }
    c.estimator = read_estimator(r);
    if (r.has("window")) {
        auto w = r.child("window");
        c.window = Window{w.get("lo", 0.0), w.get("hi", 0.0)};
        w.finish();
    } else {
        (void)r.get<int>("window", 0);
    }
    c.bandwidth = read_bandwidth(r.child("bandwidth"));
    c.threshold = read_threshold(r.child("threshold"));
    c.master_seed = seed_override.value_or(r.get<std::uint64_t>("seed", c.master_seed));
    if (seed_override) (void)r.get<std::uint64_t>("seed", 0);
    const auto el = r.get<std::vector<std::size_t>>("element", {c.element.k + 1, c.element.l + 1});
    if (el.size() != 2 || el[0] < 1 || el[1] < 1 || el[0] > 2 || el[1] > 2)
        throw invalid_argument("config field 'element' must be a pair of indices in {1, 2}");
    c.element = {el[0] - 1, el[1] - 1};
    c.eval_points = r.get<std::size_t>("eval_points", c.eval_points);
    c.qq_tau = r.optional<double>("qq_tau");
    c.band_level = r.get("band_level", c.band_level);
    r.finish();
    c.validate();
    return c;
}

inline Json mc_to_json(const McConfig& c) {
    const Window w = c.resolved_window();
    Json j = {{"model", to_string(c.model)},
              {"heston", to_json(c.heston)}};
    if (c.model == Model::bates) j["jumps"] = to_json(c.jumps);
    j["horizon"] = c.horizon;
    j["reps"] = c.reps;
    j["frequencies"] = c.frequencies;
    j["kernels"] = c.kernels;
    j["estimator"] = to_string(c.estimator);
    j["window"] = {{"lo", w.lo}, {"hi", w.hi}};
    j["bandwidth"] = to_json(c.bandwidth);
    if (c.estimator == Estimator::tkcv) j["threshold"] = to_json(c.threshold);
    j["seed"] = c.master_seed;
    j["element"] = {c.element.k + 1, c.element.l + 1};
    j["eval_points"] = c.eval_points;
    j["qq_tau"] = c.resolved_qq_tau();
    j["band_level"] = c.band_level;
    return j;
}

inline int run_mc_study(const Json& config, const fs::path& out, std::optional<std::uint64_t> seed,
                        std::ostream& log) {
    const McConfig c = parse_mc_config(config, seed);
    prepare_out_dir(out);
    echo_config(mc_to_json(c), out, log);
    const McReport rep = spotcov::run_mc_study(c);

    std::string table = "kernel,n,delta,imse,isb,reps\n";
    std::string diag = "kernel,n,coverage,ks,qq_slope,qq_intercept,failed,mean_h\n";
    for (const auto& cell : rep.cells) {
        table += join_row({cell.kernel, std::to_string(cell.n), format_double(cell.delta), format_double(cell.imse),
                           format_double(cell.isb), std::to_string(cell.reps)});
        double mean_h = 0.0;
        for (double h : cell.bandwidths) mean_h += h;
        mean_h /= static_cast<double>(cell.bandwidths.size());
        std::string ks = "nan", slope = "nan", icpt = "nan";
        if (cell.z.size() >= 20) {
            const QqResult q = qq_data(cell.z);
            ks = format_double(ks_statistic_normal(cell.z));
            slope = format_double(q.slope);
            icpt = format_double(q.intercept);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < q.theoretical.size(); ++i) rows.push_back({q.theoretical[i], q.empirical[i]});
            write_csv(out / ("qq_" + cell.kernel + "_n" + std::to_string(cell.n) + ".csv"), {"theoretical", "empirical"},
                      rows);
        } else {
            std::vector<double> z = cell.z;
            std::sort(z.begin(), z.end());
            std::vector<std::vector<double>> rows;
            const auto nz = static_cast<double>(z.size());
            for (std::size_t i = 0; i < z.size(); ++i)
                rows.push_back({normal_quantile((static_cast<double>(i) + 0.5) / nz), z[i]});
            write_csv(out / ("qq_" + cell.kernel + "_n" + std::to_string(cell.n) + ".csv"), {"theoretical", "empirical"},
                      rows);
        }
        diag += join_row({cell.kernel, std::to_string(cell.n), format_double(cell.coverage), ks, slope, icpt,
                          std::to_string(cell.failed), format_double(mean_h)});
    }
    write_text(out / "mc_table.csv", table);
    write_text(out / "mc_diagnostics.csv", diag);
    log << table;
    return 0;
}

// ---------------------------------------------------------------- forecast

struct ForecastRunSettings {
    Model model = Model::heston;
    HestonConfig heston = HestonConfig::defaults();
    JumpConfig jumps{};
    std::size_t steps_per_day = 1440;
    ForecastSettings forecast{};
    std::uint64_t seed = 1;

    static ForecastRunSettings parse(const Json& j, std::optional<std::uint64_t> seed_override) {
        ConfigReader r(j, "");
        ForecastRunSettings s;
        s.model = read_model(r);
        s.heston = read_heston(r.child("heston"));
        s.jumps = read_jumps(r.child("jumps"));
        s.forecast.days = r.get<std::size_t>("days", s.forecast.days);
        s.steps_per_day = r.get<std::size_t>("steps_per_day", s.steps_per_day);
        s.forecast.kernel = &read_kernel(r, "kernel", "gaussian");
        s.forecast.h = r.get("h", s.forecast.h);
        s.forecast.train_fraction = r.get("train_fraction", s.forecast.train_fraction);
        s.seed = seed_override.value_or(r.get<std::uint64_t>("seed", s.seed));
        if (seed_override) (void)r.get<std::uint64_t>("seed", 0);
        r.finish();
        if (s.steps_per_day < 1) throw invalid_argument("config field 'steps_per_day' must be positive");
        if (s.forecast.days < 1) throw invalid_argument("config field 'days' must be positive");
        s.forecast.validate();
        return s;
    }

    [[nodiscard]] Json to_json() const {
        Json j = {{"model", to_string(model)}, {"heston", cli::to_json(heston)}};
        if (model == Model::bates) j["jumps"] = cli::to_json(jumps);
        j["days"] = forecast.days;
        j["steps_per_day"] = steps_per_day;
        j["kernel"] = forecast.kernel->name();
        j["h"] = forecast.h;
        j["train_fraction"] = forecast.train_fraction;
        j["seed"] = seed;
        return j;
    }
};

inline void write_factor_csv(const fs::path& path, const FactorSeries& s) {
    std::vector<std::string> header{"date"};
    for (Eigen::Index p = 0; p < s.factors.front().size(); ++p) header.push_back("f_" + std::to_string(p + 1));
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < s.size(); ++t) {
        std::vector<double> r{static_cast<double>(s.dates[t])};
        r.insert(r.end(), s.factors[t].data(), s.factors[t].data() + s.factors[t].size());
        rows.push_back(std::move(r));
    }
    write_csv(path, header, rows);
}

inline int run_forecast(const Json& config, const fs::path& out, std::optional<std::uint64_t> seed,
                        std::ostream& log) {
    const ForecastRunSettings s = ForecastRunSettings::parse(config, seed);
    prepare_out_dir(out);
    echo_config(s.to_json(), out, log);
    const std::size_t days = s.forecast.days;
    const TimeGrid grid(static_cast<double>(days), days * s.steps_per_day);
    const SimOutput sim = s.model == Model::bates ? simulate_bates2d(s.heston, s.jumps, grid, s.seed)
                                                  : simulate_heston2d(s.heston, grid, s.seed);
    const auto rc = to_factor_series(daily_cov_series(sim.prices, DailyMethod::realized(), days),
                                     FactorSource::realized_cov);
    const auto kc = to_factor_series(
        daily_cov_series(sim.prices, DailyMethod::kernel_cov(*s.forecast.kernel, s.forecast.h), days),
        FactorSource::kernel_cov);
    const auto ic_daily = daily_integrated_cov(grid, sim.true_cov, days);
    const LossReport rep = compare_factor_models(rc, kc, ic_daily, s.forecast.train_days());

    std::string losses = "model,horizon,loss_name,value\n";
    for (const auto& e : rep.entries)
        losses += join_row({e.model, std::to_string(e.horizon), e.loss, format_double(e.value)});
    write_text(out / "losses.csv", losses);

    const auto m = static_cast<std::size_t>(rep.models[0].alpha.size());
    std::vector<std::string> header{"model", "horizon"};
    for (std::size_t p = 0; p < m; ++p) header.push_back("alpha_" + std::to_string(p + 1));
    for (const char* b : {"beta_d", "beta_w", "beta_m", "rss", "nobs", "condition"}) header.push_back(b);
    std::string coef = join_row(header);
    for (std::size_t mi = 0; mi < 2; ++mi)
        for (std::size_t h : kHorizons) {
            const VharModel& vm = rep.models[mi];
            std::vector<std::string> row{kModelNames[mi], std::to_string(h)};
            for (std::size_t p = 0; p < m; ++p) row.push_back(format_double(vm.alpha(static_cast<Eigen::Index>(p))));
            for (double v : {vm.beta_d, vm.beta_w, vm.beta_m, vm.rss}) row.push_back(format_double(v));
            row.push_back(std::to_string(vm.observations));
            row.push_back(format_double(vm.condition));
            coef += join_row(row);
        }
    write_text(out / "coefficients.csv", coef);

    write_factor_csv(out / "factors_rc.csv", rc);
    write_factor_csv(out / "factors_kcv.csv", kc);
    write_factor_csv(out / "factors_ic.csv", to_factor_series(ic_daily, FactorSource::integrated_cov));
    log << losses;
    return 0;
}

}  // namespace spotcov::cli
