#pragma once

// Minimal numeric CSV I/O: a header row followed by rows of doubles written
// in their shortest round-trip form.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "spotcov/errors.hpp"
#include "spotcov/timeseries.hpp"

namespace spotcov {

/// Shortest decimal text that parses back to exactly `v`.
[[nodiscard]] inline std::string format_double(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view s, const std::string& where) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw invalid_argument(where + ": cannot parse '" + std::string(s) + "' as a number");
    return v;
}

}  // namespace detail

[[nodiscard]] inline CsvTable parse_csv(std::istream& in, const std::string& name) {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_commas(line);
        if (t.header.empty()) {
            for (auto f : fields) t.header.emplace_back(detail::trim(f));
            continue;
        }
        const std::string where = name + ":" + std::to_string(lineno);
        if (fields.size() != t.header.size())
            throw invalid_argument(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                                   std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (auto f : fields) row.push_back(detail::parse_double(f, where));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw invalid_argument(name + ": empty file (no header row)");
    return t;
}

[[nodiscard]] inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    return parse_csv(in, path.string());
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
        os << '\n';
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << os.str();
    if (!out) throw io_error("write failed for " + path.string());
}

/// Prices CSV `time,asset_1,...,asset_d`; timestamps must form a uniform
/// grid starting at 0.
[[nodiscard]] inline PricePath prices_from_table(const CsvTable& t, const std::string& name) {
    if (t.header.size() < 2 || t.header[0] != "time")
        throw invalid_argument(name + ": header must be time,asset_1,...,asset_d");
    if (t.rows.size() < 3) throw invalid_argument(name + ": need at least 3 price rows");
    const std::size_t n = t.rows.size() - 1;
    const double t0 = t.rows.front()[0];
    const double horizon = t.rows.back()[0];
    if (t0 != 0.0) throw invalid_argument(name + ":2: timestamps must start at 0");
    if (!(horizon > 0.0)) throw invalid_argument(name + ": timestamps must increase");
    const TimeGrid grid(horizon, n);
    const double tol = 1e-9 * grid.delta();
    RowMatrix x(static_cast<Eigen::Index>(n + 1), static_cast<Eigen::Index>(t.header.size() - 1));
    for (std::size_t i = 0; i <= n; ++i) {
        if (std::abs(t.rows[i][0] - grid.point(i)) > tol)
            throw invalid_argument(name + ":" + std::to_string(i + 2) + ": non-uniform timestamps (expected " +
                                   format_double(grid.point(i)) + ")");
        for (std::size_t k = 1; k < t.header.size(); ++k) {
            const double v = t.rows[i][k];
            if (!std::isfinite(v)) throw invalid_argument(name + ":" + std::to_string(i + 2) + ": non-finite price");
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k - 1)) = v;
        }
    }
    return {grid, std::move(x)};
}

[[nodiscard]] inline PricePath read_prices_csv(const std::filesystem::path& path) {
    return prices_from_table(read_csv(path), path.string());
}

inline void write_prices_csv(const std::filesystem::path& path, const PricePath& p) {
    std::vector<std::string> header{"time"};
    for (std::size_t k = 0; k < p.assets(); ++k) header.push_back("asset_" + std::to_string(k + 1));
    std::vector<std::vector<double>> rows;
    rows.reserve(p.grid().size());
    for (std::size_t i = 0; i < p.grid().size(); ++i) {
        std::vector<double> r{p.grid().point(i)};
        for (std::size_t k = 0; k < p.assets(); ++k)
            r.push_back(p.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
        rows.push_back(std::move(r));
    }
    write_csv(path, header, rows);
}

/// `time,` then vech labels.
inline void write_cov_path_csv(const std::filesystem::path& path, const CovPath& cp) {
    std::vector<std::string> header{"time"};
    for (auto& l : vech_labels(cp.dim())) header.push_back(l);
    std::vector<std::vector<double>> rows;
    rows.reserve(cp.size());
    for (std::size_t j = 0; j < cp.size(); ++j) {
        std::vector<double> r{cp.times()[j]};
        const Eigen::VectorXd v = vech(cp[j]);
        r.insert(r.end(), v.data(), v.data() + v.size());
        rows.push_back(std::move(r));
    }
    write_csv(path, header, rows);
}

}  // namespace spotcov
