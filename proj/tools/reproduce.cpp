#include "reproduce.hpp"

#include "sope/error.hpp"
#include "sope/log.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#ifndef SOPE_DATA_DIR
#define SOPE_DATA_DIR "data"
#endif

namespace sope::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FitConfig search_config(double lambda1, double q, int N, double beta) {
    FitConfig cfg;
    cfg.sparse.lambda1 = lambda1;
    cfg.sparse.q = q;
    cfg.sparse.N = N;
    cfg.sparse.beta = beta;
    return cfg;
}

Check at_most(std::string what, double value, double hi) { return {std::move(what), value, -kInf, hi, value <= hi}; }

Check within(std::string what, double value, double center, double tol) {
    return {std::move(what), value, center - tol, center + tol, std::abs(value - center) <= tol};
}

Check at_least(std::string what, double value, double lo) { return {std::move(what), value, lo, kInf, value >= lo}; }

Example make(std::string label, FitData data, std::vector<int> degrees, FitConfig cfg, bool ccdf = false,
             std::vector<double> fixed = {}) {
    return {std::move(label), std::move(data), std::move(degrees), cfg, ccdf, std::move(fixed)};
}

} // namespace

Example sexton_fixed() {
    Example ex = make("sexton fixed exponents", sexton_data(), {0, 0, 0}, {}, false, {0.5, 1.0, 2.0});
    ex.config.criterion = Criterion::Integral;
    return ex;
}

Example sexton_search(double q) {
    Example ex = make("sexton q=" + std::to_string(q).substr(0, 4), sexton_data(), {0, 0, 0}, search_config(0.4873, q, 100, 5e-4));
    ex.config.criterion = Criterion::Integral;
    return ex;
}

Example weibull_w1() {
    Target w{TargetKind::Weibull, 1.0, 1.5};
    return make("weibull-w1", sample_target(w, 100, Interval(0.0, 5.0), false), {0, 0, 0, 0},
                search_config(2.0, 0.05, 100, 1e-5));
}

Example pareto_ccdf(int n) {
    Target p{TargetKind::Pareto};
    return make("pareto n=" + std::to_string(n), sample_target(p, 100, Interval(0.0, 20.0), true), std::vector<int>(n, 0),
            search_config(0.02, 0.02, 100, 1e-4), true);
}

Example lognormal_ccdf(int n) {
    Target l{TargetKind::Lognormal, 1.0, 1.5, 0.0, 0.5};
    return make("lognormal n=" + std::to_string(n), sample_target(l, 100, Interval(0.0, 6.0), true), std::vector<int>(n, 0),
            search_config(0.5, 0.05, 100, 1e-4), true);
}

Example oldfaithful(const std::filesystem::path& data_file, bool sope_structure) {
    FitData d = ingest_series_to_histogram(data_file, 40, 1.6, Interval(0.0, 10.0), "eruptions");
    std::vector<int> degrees = sope_structure ? std::vector<int>{0, 1, 1, 0} : std::vector<int>(6, 0);
    return make(sope_structure ? "oldfaithful sope" : "oldfaithful soe", std::move(d), std::move(degrees),
                search_config(0.5, 0.05, 100, 1e-4));
}

std::filesystem::path default_data_dir() { return SOPE_DATA_DIR; }

std::filesystem::path oldfaithful_file(const std::filesystem::path& data_dir) { return data_dir / "faithful.csv"; }

FitResult run_example(const Example& ex, Exec exec) {
    FitConfig cfg = ex.config;
    cfg.exec = exec;
    if (!ex.fixed_exponents.empty())
        return ex.ccdf ? ccdf_fit_fixed(ex.fixed_exponents, ex.degrees, ex.data, cfg)
                       : solve_sope_c(ex.fixed_exponents, ex.degrees, ex.data, cfg);
    return ex.ccdf ? ccdf_fit(ex.data, ex.degrees, cfg) : solve_general(ex.data, ex.degrees, cfg);
}

bool Reproduction::pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return !checks.empty();
}

const std::vector<std::string>& reproduction_names() {
    static const std::vector<std::string> names{"sexton", "weibull-w1", "pareto", "lognormal", "oldfaithful"};
    return names;
}

Reproduction reproduce(const std::string& name, const std::filesystem::path& data_dir, Exec exec) {
    Reproduction out;
    out.name = name;
    const auto start = std::chrono::steady_clock::now();
    auto run = [&](const Example& ex) -> const FitResult& {
        log_line(LogLevel::Info, "running %s", ex.label.c_str());
        out.fits.emplace_back(ex.label, run_example(ex, exec));
        return out.fits.back().second;
    };
    if (name == "sexton") {
        const FitResult& fixed = run(sexton_fixed());
        out.checks.push_back(within("fixed-exponent J", fixed.J, 0.0712, 0.0712e-3));
        const double ref[3] = {15.5243, -28.5073, 14.2410};
        for (int i = 0; i < 3; ++i)
            out.checks.push_back(within("fixed-exponent alpha_" + std::to_string(i + 1), fixed.model.terms[i].p.coeff(0),
                                        ref[i], 1e-2));
        const FitResult& a = run(sexton_search(0.01));
        out.checks.push_back(within("q=0.01 initial J", a.trace.front().J, 0.0433, 0.002));
        out.checks.push_back(at_most("q=0.01 final J", a.J, 0.044));
        out.checks.push_back(at_least("q=0.01 grid minimum", a.grid_min, -1e-6));
        const FitResult& b = run(sexton_search(0.03));
        out.checks.push_back(within("q=0.03 initial J", b.trace.front().J, 0.2227, 0.01));
        out.checks.push_back(at_most("q=0.03 final J", b.J, 0.046));
    } else if (name == "weibull-w1") {
        out.checks.push_back(at_most("J", run(weibull_w1()).J, 1e-4));
    } else if (name == "pareto") {
        out.checks.push_back(at_most("n=3 J", run(pareto_ccdf(3)).J, 3e-4));
        out.checks.push_back(at_most("n=5 J", run(pareto_ccdf(5)).J, 6e-5));
    } else if (name == "lognormal") {
        out.checks.push_back(at_most("n=3 J", run(lognormal_ccdf(3)).J, 3e-3));
    } else if (name == "oldfaithful") {
        const auto file = oldfaithful_file(data_dir);
        if (!std::filesystem::exists(file)) fail(ErrorCode::MissingFixture, "fixture not found: " + file.string());
        out.checks.push_back(at_most("SOE n=6 J", run(oldfaithful(file, false)).J, 0.013));
        out.checks.push_back(at_most("SOPE (0,1,1,0) J", run(oldfaithful(file, true)).J, 0.012));
    } else {
        fail(ErrorCode::InvalidArgument, "unknown reproduction '" + name + "'");
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace sope::cli
