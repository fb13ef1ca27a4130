#include "ingest.hpp"

#include "sope/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sope::cli {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    const bool has_comma = line.find(',') != std::string::npos;
    if (has_comma) {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) out.push_back(unquote(f));
    } else {
        std::stringstream ss(line);
        std::string f;
        while (ss >> f) out.push_back(unquote(f));
    }
    return out;
}

bool parse_number(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, v);
    return ec == std::errc() && p == e;
}

[[noreturn]] void parse_fail(int line, const std::string& what) {
    fail(ErrorCode::Parse, "line " + std::to_string(line) + ": " + what);
}

} // namespace

FitData parse_samples(const std::string& text, std::optional<Interval> interval) {
    std::vector<double> t, h, w;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto f = fields(line);
        if (f.size() < 2 || f.size() > 3) parse_fail(lineno, "expected 't, value[, weight]'");
        double vals[3] = {0.0, 0.0, 1.0};
        for (std::size_t j = 0; j < f.size(); ++j)
            if (!parse_number(f[j], vals[j]) || !std::isfinite(vals[j]))
                parse_fail(lineno, "not a finite number: '" + f[j] + "'");
        if (!t.empty() && vals[0] <= t.back()) parse_fail(lineno, "times must be strictly increasing");
        if (f.size() == 3 && vals[2] <= 0.0) parse_fail(lineno, "weights must be positive");
        t.push_back(vals[0]);
        h.push_back(vals[1]);
        w.push_back(vals[2]);
    }
    if (t.empty()) fail(ErrorCode::Parse, "no samples found");
    FitData d;
    d.t = Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
    d.h = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
    d.w = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    if (interval) {
        d.interval = *interval;
    } else {
        if (t.size() < 2) fail(ErrorCode::InvalidArgument, "a single sample needs an explicit interval");
        d.interval = Interval(t.front(), t.back());
    }
    d.validate();
    return d;
}

FitData ingest_samples(const std::filesystem::path& path, std::optional<Interval> interval) {
    try {
        return parse_samples(read_file(path), interval);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Parse) fail(ErrorCode::Parse, path.string() + ": " + e.what());
        throw;
    }
}

std::vector<double> parse_series(const std::string& text, const std::string& column) {
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    std::optional<std::size_t> col;
    std::size_t width = 0;
    bool first = true;
    std::vector<double> out;
    auto numeric_column = [&]() -> std::optional<std::size_t> {
        if (column.empty()) return std::nullopt;
        std::size_t idx = 0;
        auto [p, ec] = std::from_chars(column.data(), column.data() + column.size(), idx);
        if (ec == std::errc() && p == column.data() + column.size()) return idx;
        return std::nullopt;
    };
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto f = fields(line);
        if (first) {
            first = false;
            width = f.size();
            double probe = 0.0;
            const bool header = std::any_of(f.begin(), f.end(), [&](const std::string& s) { return !parse_number(s, probe); });
            if (header) {
                if (column.empty()) {
                    if (f.size() != 1) parse_fail(lineno, "several columns; select one by name or index");
                    col = 0;
                } else if (auto idx = numeric_column()) {
                    col = *idx;
                } else {
                    auto it = std::find(f.begin(), f.end(), column);
                    if (it == f.end()) parse_fail(lineno, "no column named '" + column + "'");
                    col = static_cast<std::size_t>(it - f.begin());
                }
                if (*col >= width) parse_fail(lineno, "column index out of range");
                continue;
            }
            if (column.empty()) {
                if (f.size() != 1) parse_fail(lineno, "several columns; select one by index");
                col = 0;
            } else if (auto idx = numeric_column()) {
                col = *idx;
            } else {
                parse_fail(lineno, "column '" + column + "' requires a header line");
            }
            if (*col >= width) parse_fail(lineno, "column index out of range");
        }
        if (f.size() != width) parse_fail(lineno, "expected " + std::to_string(width) + " fields");
        double v = 0.0;
        if (!parse_number(f[*col], v) || !std::isfinite(v)) parse_fail(lineno, "not a finite number: '" + f[*col] + "'");
        out.push_back(v);
    }
    if (out.empty()) fail(ErrorCode::Parse, "no observations found");
    return out;
}

std::vector<double> read_series(const std::filesystem::path& path, const std::string& column) {
    try {
        return parse_series(read_file(path), column);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Parse) fail(ErrorCode::Parse, path.string() + ": " + e.what());
        throw;
    }
}

FitData histogram(const std::vector<double>& values, int bins, double shift, const Interval& interval) {
    require(bins >= 1, "histogram needs at least one bin");
    require(!values.empty(), "histogram needs observations");
    const double width = interval.width() / bins;
    Eigen::VectorXd t(bins), h = Eigen::VectorXd::Zero(bins);
    for (int m = 0; m < bins; ++m) t(m) = interval.lo + (m + 0.5) * width;
    const double unit = 1.0 / (static_cast<double>(values.size()) * width);
    for (double v : values) {
        const double x = v - shift;
        if (x < interval.lo - 1e-12 || x > interval.hi + 1e-12)
            fail(ErrorCode::InvalidArgument, "observation " + std::to_string(v) + " falls outside the histogram interval");
        const int k = std::clamp(static_cast<int>(std::floor((x - interval.lo) / width)), 0, bins - 1);
        h(k) += unit;
    }
    return make_samples(std::move(t), std::move(h), interval);
}

FitData ingest_series_to_histogram(const std::filesystem::path& path, int bins, double shift,
                                   const Interval& interval, const std::string& column) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::MissingFixture, "data file not found: " + path.string());
    return histogram(read_series(path, column), bins, shift, interval);
}

double Target::pdf(double t) const {
    switch (kind) {
    case TargetKind::Weibull: {
        if (t < 0.0) return 0.0;
        const double x = t / eta;
        if (t == 0.0) return k < 1.0 ? INFINITY : (k == 1.0 ? 1.0 / eta : 0.0);
        return k / eta * std::pow(x, k - 1.0) * std::exp(-std::pow(x, k));
    }
    case TargetKind::Pareto:
        return t < 0.0 ? 0.0 : 1.0 / ((1.0 + t) * (1.0 + t));
    case TargetKind::Lognormal: {
        if (t <= 0.0) return 0.0;
        const double z = (std::log(t) - mu) / sigma;
        return std::exp(-0.5 * z * z) / (t * sigma * std::sqrt(2.0 * std::numbers::pi));
    }
    }
    return 0.0;
}

double Target::ccdf(double t) const {
    switch (kind) {
    case TargetKind::Weibull:
        return t <= 0.0 ? 1.0 : std::exp(-std::pow(t / eta, k));
    case TargetKind::Pareto:
        return t <= 0.0 ? 1.0 : 1.0 / (1.0 + t);
    case TargetKind::Lognormal:
        return t <= 0.0 ? 1.0 : 0.5 * std::erfc((std::log(t) - mu) / (sigma * std::numbers::sqrt2));
    }
    return 0.0;
}

TargetKind parse_target(const std::string& name) {
    if (name == "weibull") return TargetKind::Weibull;
    if (name == "pareto") return TargetKind::Pareto;
    if (name == "lognormal") return TargetKind::Lognormal;
    fail(ErrorCode::InvalidArgument, "unknown target '" + name + "' (weibull, pareto, lognormal)");
}

std::string to_string(TargetKind kind) {
    switch (kind) {
    case TargetKind::Weibull: return "weibull";
    case TargetKind::Pareto: return "pareto";
    case TargetKind::Lognormal: return "lognormal";
    }
    return "?";
}

FitData sample_target(const Target& target, int M, const Interval& interval, bool ccdf) {
    require(M >= 2, "target grid needs at least two points");
    if (target.kind == TargetKind::Weibull) require(target.eta > 0.0 && target.k > 0.0, "Weibull needs eta, k > 0");
    if (target.kind == TargetKind::Lognormal) require(target.sigma > 0.0, "lognormal needs sigma > 0");
    Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(M, interval.lo, interval.hi);
    if (!ccdf && !std::isfinite(target.pdf(interval.lo)))
        for (int m = 0; m < M; ++m) t(m) = interval.lo + interval.width() * (m + 1.0) / M;
    Eigen::VectorXd h(M);
    for (int m = 0; m < M; ++m) h(m) = ccdf ? target.ccdf(t(m)) : target.pdf(t(m));
    return make_samples(std::move(t), std::move(h), interval);
}

FitData sexton_data(int M) {
    require(M >= 2, "grid needs at least two points");
    Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(M, 0.0, 10.0);
    Eigen::VectorXd h(M);
    for (int m = 0; m < M; ++m) h(m) = 16.0 * std::exp(-0.5 * t(m)) - 30.0 * std::exp(-t(m)) + 15.0 * std::exp(-2.0 * t(m));
    FitData d = make_samples(std::move(t), std::move(h), Interval(0.0, 10.0));
    d.soe_target = SoeTarget{{16.0, -30.0, 15.0}, {0.5, 1.0, 2.0}};
    return d;
}

} // namespace sope::cli
