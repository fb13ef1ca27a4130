#include "sope/segmenter.hpp"

#include "sope/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace sope {

int ErrorTable::nu_index(int nu) const {
    auto it = std::find(nu_range.begin(), nu_range.end(), nu);
    require(it != nu_range.end(), "degree " + std::to_string(nu) + " is not in the error table");
    return static_cast<int>(it - nu_range.begin());
}

std::vector<double> default_tau_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 50; ++i) g.push_back(0.2 * i);
    return g;
}

std::vector<int> default_nu_range() {
    std::vector<int> r;
    for (int nu = 0; nu <= 12; ++nu) r.push_back(nu);
    return r;
}

namespace {

double table_entry(double tau, int nu, int probe_grid) {
    try {
        Interval iv(0.0, tau);
        auto pair = build_envelope(1.0, iv, nu);
        return verify_one_sided(pair, probe_grid).sup_error;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::CannotCertify) throw;
        return std::numeric_limits<double>::infinity();
    }
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(ErrorCode::Parse, "bad number in table file: " + s);
    return v;
}

} // namespace

ErrorTable build_table(const std::vector<double>& tau_grid, const std::vector<int>& nu_range, Exec exec,
                       int probe_grid) {
    require(!tau_grid.empty() && !nu_range.empty(), "error table needs a non-empty grid");
    require(tau_grid.front() > 0.0, "tau grid must be positive");
    require(std::is_sorted(tau_grid.begin(), tau_grid.end()) &&
                std::adjacent_find(tau_grid.begin(), tau_grid.end()) == tau_grid.end(),
            "tau grid must be strictly ascending");
    for (int nu : nu_range) require(nu >= 0, "table degrees must be non-negative");
    ErrorTable t{tau_grid, nu_range, Eigen::MatrixXd(tau_grid.size(), nu_range.size()), probe_grid};
    const long rows = static_cast<long>(tau_grid.size());
    const long cols = static_cast<long>(nu_range.size());
    const long total = rows * cols;
    if (exec == Exec::Serial) {
        for (long idx = 0; idx < total; ++idx)
            t.entries(idx / cols, idx % cols) = table_entry(tau_grid[idx / cols], nu_range[idx % cols], probe_grid);
        return t;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic)
    for (long idx = 0; idx < total; ++idx) {
        try {
            t.entries(idx / cols, idx % cols) = table_entry(tau_grid[idx / cols], nu_range[idx % cols], probe_grid);
        } catch (...) {
            errors[idx] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return t;
}

std::uint64_t table_hash(const std::vector<double>& tau_grid, const std::vector<int>& nu_range, int probe_grid) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    mix(kTableFormatVersion);
    mix(static_cast<std::uint64_t>(probe_grid));
    mix(tau_grid.size());
    for (double v : tau_grid) mix(std::bit_cast<std::uint64_t>(v));
    mix(nu_range.size());
    for (int v : nu_range) mix(static_cast<std::uint64_t>(v));
    return h;
}

void save_table(const ErrorTable& table, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "sope-error-table " << kTableFormatVersion << "\n";
    os << "probe_grid " << table.probe_grid << "\n";
    os << "hash " << std::hex << table_hash(table.tau_grid, table.nu_range, table.probe_grid) << std::dec << "\n";
    os << "tau " << table.tau_grid.size();
    for (double v : table.tau_grid) os << ' ' << format_double(v);
    os << "\nnu " << table.nu_range.size();
    for (int v : table.nu_range) os << ' ' << v;
    os << "\n";
    for (Eigen::Index i = 0; i < table.entries.rows(); ++i) {
        for (Eigen::Index j = 0; j < table.entries.cols(); ++j) os << (j ? " " : "") << format_double(table.entries(i, j));
        os << "\n";
    }
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) fail(ErrorCode::Io, "cannot write " + tmp);
        f << os.str();
        if (!f) fail(ErrorCode::Io, "write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::Io, "cannot move table into place at " + path.string() + ": " + ec.message());
}

ErrorTable load_table(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string());
    std::string word;
    int version = 0;
    ErrorTable t;
    std::string hash_text;
    std::size_t ntau = 0, nnu = 0;
    if (!(f >> word >> version) || word != "sope-error-table") fail(ErrorCode::Parse, "not an error table file");
    if (version != kTableFormatVersion) fail(ErrorCode::Parse, "unsupported table version " + std::to_string(version));
    if (!(f >> word >> t.probe_grid) || word != "probe_grid") fail(ErrorCode::Parse, "missing probe_grid");
    if (!(f >> word >> hash_text) || word != "hash") fail(ErrorCode::Parse, "missing hash");
    if (!(f >> word >> ntau) || word != "tau") fail(ErrorCode::Parse, "missing tau grid");
    for (std::size_t i = 0; i < ntau; ++i) {
        if (!(f >> word)) fail(ErrorCode::Parse, "truncated tau grid");
        t.tau_grid.push_back(parse_double(word));
    }
    if (!(f >> word >> nnu) || word != "nu") fail(ErrorCode::Parse, "missing nu range");
    for (std::size_t i = 0; i < nnu; ++i) {
        int v;
        if (!(f >> v)) fail(ErrorCode::Parse, "truncated nu range");
        t.nu_range.push_back(v);
    }
    t.entries.resize(static_cast<Eigen::Index>(ntau), static_cast<Eigen::Index>(nnu));
    for (std::size_t i = 0; i < ntau; ++i)
        for (std::size_t j = 0; j < nnu; ++j) {
            if (!(f >> word)) fail(ErrorCode::Parse, "truncated table entries");
            t.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(word);
        }
    std::uint64_t stored = 0;
    auto [p, ec] = std::from_chars(hash_text.data(), hash_text.data() + hash_text.size(), stored, 16);
    if (ec != std::errc() || stored != table_hash(t.tau_grid, t.nu_range, t.probe_grid))
        fail(ErrorCode::Parse, "table hash does not match its parameters");
    return t;
}

ErrorTable load_or_build_table(const std::filesystem::path& path, const std::vector<double>& tau_grid,
                               const std::vector<int>& nu_range, Exec exec) {
    if (std::filesystem::exists(path)) {
        try {
            auto t = load_table(path);
            if (t.tau_grid == tau_grid && t.nu_range == nu_range && t.probe_grid == kVerifyGrid) return t;
        } catch (const Error&) {
            // stale or corrupt cache; rebuilt below
        }
    }
    auto t = build_table(tau_grid, nu_range, exec);
    save_table(t, path);
    return t;
}

const ErrorTable& default_table() {
    static const ErrorTable table = [] {
        if (const char* cache = std::getenv("SOPE_TABLE_CACHE"); cache && *cache)
            return load_or_build_table(cache, default_tau_grid(), default_nu_range());
        return build_table(default_tau_grid(), default_nu_range());
    }();
    return table;
}

double lookup_length(const ErrorTable& table, double lambda, double t_start, double eps, int nu) {
    require(lambda >= 0.0, "exponent must be non-negative");
    require(eps > 0.0, "target error must be positive");
    if (lambda == 0.0) return std::numeric_limits<double>::infinity();
    const int j = table.nu_index(nu);
    const double budget = eps * std::exp(lambda * t_start);
    double best = -1.0;
    for (std::size_t i = 0; i < table.tau_grid.size(); ++i)
        if (table.entries(static_cast<Eigen::Index>(i), j) < budget) best = table.tau_grid[i];
    if (best < 0.0)
        fail(ErrorCode::NoFeasibleLength, "no tabulated length reaches error " + format_double(eps) +
                                              " for exponent " + format_double(lambda) + " starting at t = " +
                                              format_double(t_start));
    return best / lambda;
}

Segmentation split_endpoints(const std::vector<double>& lambdas, const Interval& iv, double eps, int nu_max,
                             const ErrorTable& table) {
    require(!lambdas.empty(), "at least one exponent is required");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        require(lambdas[i] >= 0.0, "exponents must be non-negative");
        require(i == 0 || lambdas[i] > lambdas[i - 1], "exponents must be ascending and distinct");
    }
    require(eps > 0.0, "target error must be positive");
    table.nu_index(nu_max);
    Segmentation seg;
    seg.epsilon = eps;
    seg.nu_max = nu_max;
    seg.lambdas = lambdas;
    seg.endpoints.push_back(iv.lo);
    while (seg.endpoints.back() < iv.hi) {
        const double t0 = seg.endpoints.back();
        double d = std::numeric_limits<double>::infinity();
        for (double lam : lambdas) d = std::min(d, lookup_length(table, lam, t0, eps, nu_max));
        seg.endpoints.push_back(std::min(t0 + d, iv.hi));
    }
    const int k = seg.intervals();
    seg.degrees = Eigen::MatrixXi::Constant(k, static_cast<int>(lambdas.size()), nu_max);
    return seg;
}

Segmentation reduce_degrees(Segmentation seg, const ErrorTable& table) {
    const auto n = seg.lambdas.size();
    const double tf = seg.endpoints.back();
    for (int k = 0; k < seg.intervals(); ++k) {
        const double t0 = seg.endpoints[k];
        const double dk = seg.endpoints[k + 1] - t0;
        std::vector<double> ds(n, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < n; ++i) {
            try {
                ds[i] = lookup_length(table, seg.lambdas[i], t0, seg.epsilon, seg.nu_max);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoFeasibleLength) throw;
            }
        }
        const double dmin = *std::min_element(ds.begin(), ds.end());
        const bool clamped = seg.endpoints[k + 1] == tf && dk < dmin;
        for (std::size_t i = 0; i < n; ++i) {
            const double lam = seg.lambdas[i];
            if (lam == 0.0) {
                seg.degrees(k, static_cast<int>(i)) = 0;
                continue;
            }
            if (!(ds[i] > dmin || clamped)) continue;
            const double x = lam * dk;
            auto it = std::find_if(table.tau_grid.begin(), table.tau_grid.end(),
                                   [&](double tau) { return tau >= x * (1 - 1e-12); });
            if (it == table.tau_grid.end()) continue;
            const auto row = static_cast<std::size_t>(it - table.tau_grid.begin());
            const double decay = std::exp(-lam * t0);
            for (int nu : table.nu_range) {
                if (nu > seg.nu_max) break;
                if (table.entry(row, nu) * decay < seg.epsilon) {
                    seg.degrees(k, static_cast<int>(i)) = nu;
                    break;
                }
            }
        }
    }
    return seg;
}

Segmentation attach_envelopes(Segmentation seg, Exec exec) {
    const int n = static_cast<int>(seg.lambdas.size());
    std::vector<EnvelopeRequest> reqs;
    for (int k = 0; k < seg.intervals(); ++k)
        for (int i = 0; i < n; ++i) reqs.push_back({seg.lambdas[i], seg.interval(k), seg.degrees(k, i)});
    auto pairs = build_envelopes(reqs, exec);
    seg.envelopes.assign(seg.intervals(), {});
    for (int k = 0; k < seg.intervals(); ++k)
        for (int i = 0; i < n; ++i) {
            auto& pair = pairs[static_cast<std::size_t>(k * n + i)];
            int nu = seg.degrees(k, i);
            while (pair.measured_sup_error > seg.epsilon) {
                if (++nu > seg.nu_max + 2)
                    fail(ErrorCode::CannotCertify, "envelope error exceeds the target on interval " + std::to_string(k));
                pair = build_envelope(seg.lambdas[i], seg.interval(k), nu);
            }
            seg.degrees(k, i) = seg.lambdas[i] == 0.0 ? 0 : std::max(pair.degree_lower, pair.degree_upper);
            seg.envelopes[k].push_back(std::move(pair));
        }
    return seg;
}

Segmentation split(const std::vector<double>& lambdas, const Interval& iv, double eps, int nu_max,
                   const ErrorTable& table, Exec exec) {
    return attach_envelopes(reduce_degrees(split_endpoints(lambdas, iv, eps, nu_max, table), table), exec);
}

} // namespace sope
