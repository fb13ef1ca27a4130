#include "cli.hpp"

#include "ingest.hpp"
#include "report.hpp"
#include "reproduce.hpp"

#include "sope/log.hpp"
#include "sope/segmenter.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

namespace sope::cli {

using nlohmann::json;

int exit_code(ErrorCode code) noexcept { return kErrorBase + static_cast<int>(code); }

namespace {

struct FitOptions {
    std::string input, histogram, column, target;
    double eta = 1.0, k = 1.5, mu = 0.0, sigma = 0.5;
    int grid = 100;
    std::vector<double> interval;
    int bins = 40;
    double shift = 0.0;
    std::vector<double> soe_alphas, soe_lambdas;
    int n = 0;
    std::vector<int> degrees;
    double epsilon = 1e-8;
    int nu_max = 8;
    std::vector<double> fixed;
    double lambda1 = 0.0, q = 0.01, beta = 5e-4;
    int N = 100;
    std::string criterion = "ls", gradient = "reduced";
    int max_iters = 100;
    double solver_tol = 1e-9;
    int solver_max_iters = 100;
    bool parallel = false;
    std::string out, curve, model_out, config;
};

const std::set<std::string> kNotEchoed{"config", "out", "curve", "model-out", "help"};

std::optional<Interval> interval_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    require(v.size() == 2, "--interval takes two values a,b");
    return Interval(v[0], v[1]);
}

Interval required_interval(const std::vector<double>& v, const char* what) {
    auto iv = interval_of(v);
    if (!iv) fail(ErrorCode::InvalidArgument, std::string(what) + " requires --interval a,b");
    return *iv;
}

std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
    return s;
}

Settings echo(const CLI::App& sub) {
    Settings out;
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->count() == 0 || opt->get_lnames().empty()) continue;
        const std::string& name = opt->get_lnames().front();
        if (kNotEchoed.count(name)) continue;
        out[name] = opt->get_expected_min() == 0 ? "true" : join(opt->results());
    }
    return out;
}

// Settings from --config become "--key=value" arguments unless the key is
// already on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].starts_with("--config=")) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    const Settings settings = read_settings(path);
    auto given = [&](const std::string& key) {
        for (const auto& a : args)
            if (a == "--" + key || a.starts_with("--" + key + "=")) return true;
        return false;
    };
    std::vector<std::string> out(args.begin(), args.begin() + std::min<std::size_t>(1, args.size()));
    for (const auto& [key, value] : settings)
        if (!given(key) && !kNotEchoed.count(key)) out.push_back("--" + key + "=" + value);
    out.insert(out.end(), args.begin() + std::min<std::size_t>(1, args.size()), args.end());
    return out;
}

void add_data_options(CLI::App* sub, FitOptions& o) {
    sub->add_option("--input", o.input, "sample file: t, value[, weight] per line");
    sub->add_option("--histogram", o.histogram, "series file binned into a density histogram");
    sub->add_option("--column", o.column, "series column name or 0-based index");
    sub->add_option("--bins", o.bins, "histogram bins")->check(CLI::PositiveNumber);
    sub->add_option("--shift", o.shift, "subtracted from every observation before binning");
    sub->add_option("--target", o.target, "analytic target")->check(CLI::IsMember({"weibull", "pareto", "lognormal"}));
    sub->add_option("--eta", o.eta, "Weibull scale");
    sub->add_option("--k", o.k, "Weibull shape");
    sub->add_option("--mu", o.mu, "lognormal mu");
    sub->add_option("--sigma", o.sigma, "lognormal sigma");
    sub->add_option("--soe-alphas", o.soe_alphas, "closed-form SOE target coefficients")->delimiter(',');
    sub->add_option("--soe-lambdas", o.soe_lambdas, "closed-form SOE target exponents")->delimiter(',');
    sub->add_option("--grid", o.grid, "number of grid points for analytic targets")->check(CLI::PositiveNumber);
    sub->add_option("--interval", o.interval, "a,b")->delimiter(',')->expected(2);
}

void add_fit_options(CLI::App* sub, FitOptions& o) {
    add_data_options(sub, o);
    sub->add_option("--n", o.n, "number of SOE terms");
    sub->add_option("--degrees", o.degrees, "polynomial degrees d1,d2,...")->delimiter(',');
    sub->add_option("--epsilon", o.epsilon, "envelope accuracy");
    sub->add_option("--nu-max", o.nu_max, "maximum envelope degree");
    sub->add_option("--fixed-exponents", o.fixed, "skip the exponent search")->delimiter(',');
    sub->add_option("--init-lambda1", o.lambda1, "smallest exponent of the progression (0: tail estimate)");
    sub->add_option("--q", o.q, "progression step");
    sub->add_option("--N", o.N, "progression length");
    sub->add_option("--beta", o.beta, "l1 penalty weight");
    sub->add_option("--criterion", o.criterion, "ls or integral")->check(CLI::IsMember({"ls", "integral"}));
    sub->add_option("--gradient", o.gradient, "reduced or partial")->check(CLI::IsMember({"reduced", "partial"}));
    sub->add_option("--max-iters", o.max_iters, "outer iterations of the exponent search");
    sub->add_option("--solver-tol", o.solver_tol, "interior point tolerance");
    sub->add_option("--solver-max-iters", o.solver_max_iters, "interior point iteration limit");
    sub->add_flag("--parallel", o.parallel, "OpenMP kernels");
    sub->add_option("--config", o.config, "key = value file or a previous JSON report");
    sub->add_option("--out", o.out, "JSON report");
    sub->add_option("--curve", o.curve, "curve dump t,f,h,residual");
    sub->add_option("--model-out", o.model_out, "model file");
}

FitData load_data(const FitOptions& o, bool ccdf, std::string& source) {
    const int given = !o.input.empty() + !o.histogram.empty() + !o.target.empty() + !o.soe_alphas.empty();
    if (given != 1)
        fail(ErrorCode::InvalidArgument, "give exactly one of --input, --histogram, --target, --soe-alphas");
    if (!o.input.empty()) {
        source = o.input;
        return ingest_samples(o.input, interval_of(o.interval));
    }
    if (!o.histogram.empty()) {
        source = o.histogram;
        return ingest_series_to_histogram(o.histogram, o.bins, o.shift, required_interval(o.interval, "--histogram"),
                                          o.column);
    }
    const Interval iv = required_interval(o.interval, "an analytic target");
    if (!o.target.empty()) {
        Target t{parse_target(o.target), o.eta, o.k, o.mu, o.sigma};
        source = o.target;
        return sample_target(t, o.grid, iv, ccdf);
    }
    require(o.soe_alphas.size() == o.soe_lambdas.size(), "--soe-alphas and --soe-lambdas differ in length");
    require(o.grid >= 2, "--grid needs at least two points");
    Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(o.grid, iv.lo, iv.hi), h = Eigen::VectorXd::Zero(o.grid);
    for (std::size_t j = 0; j < o.soe_alphas.size(); ++j)
        h += o.soe_alphas[j] * (-o.soe_lambdas[j] * t.array()).exp().matrix();
    FitData d = make_samples(std::move(t), std::move(h), iv);
    if (!ccdf) d.soe_target = SoeTarget{o.soe_alphas, o.soe_lambdas};
    source = "soe";
    return d;
}

FitConfig make_config(const FitOptions& o) {
    FitConfig c;
    c.epsilon = o.epsilon;
    c.nu_max = o.nu_max;
    c.criterion = o.criterion == "integral" ? Criterion::Integral : Criterion::LeastSquares;
    c.gradient = o.gradient == "partial" ? GradientMode::Partial : GradientMode::Reduced;
    c.max_outer_iterations = o.max_iters;
    c.sparse.lambda1 = o.lambda1;
    c.sparse.q = o.q;
    c.sparse.N = o.N;
    c.sparse.beta = o.beta;
    c.solver.tol_gap = c.solver.tol_primal = c.solver.tol_dual = o.solver_tol;
    c.solver.tol_inaccurate = std::max(c.solver.tol_inaccurate, o.solver_tol);
    c.solver.max_iterations = o.solver_max_iters;
    c.exec = o.parallel ? Exec::Parallel : Exec::Serial;
    c.validate();
    return c;
}

std::vector<int> structure(const FitOptions& o) {
    if (!o.degrees.empty()) {
        if (o.n > 0 && o.n != static_cast<int>(o.degrees.size()))
            fail(ErrorCode::InvalidArgument, "--n disagrees with the number of --degrees");
        return o.degrees;
    }
    if (o.n <= 0) fail(ErrorCode::InvalidArgument, "give --n or --degrees");
    return std::vector<int>(o.n, 0);
}

void print_model(const SopeModel& m) {
    for (const auto& term : m.terms) {
        const Polynomial p = term.p.frame().center == 0.0 ? term.p : to_frame(term.p, Frame{});
        std::printf("  lambda %.10g  p:", term.lambda);
        for (double c : p.coeffs()) std::printf(" %.10g", c);
        std::printf("\n");
    }
}

int cmd_fit(const CLI::App& sub, const FitOptions& o, bool ccdf) {
    const auto start = std::chrono::steady_clock::now();
    ReportInput in;
    FitData data = load_data(o, ccdf, in.source);
    in.config = make_config(o);
    in.degrees = structure(o);
    in.ccdf = ccdf;
    in.settings = echo(sub);
    if (in.config.criterion == Criterion::Integral && !data.soe_target)
        fail(ErrorCode::InvalidArgument, "the integral criterion needs a closed-form target (--soe-alphas/--soe-lambdas)");
    FitResult r;
    if (!o.fixed.empty())
        r = ccdf ? ccdf_fit_fixed(o.fixed, in.degrees, data, in.config) : solve_sope_c(o.fixed, in.degrees, data, in.config);
    else
        r = ccdf ? ccdf_fit(data, in.degrees, in.config) : solve_general(data, in.degrees, in.config);
    in.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    in.data = &data;
    const json report = make_report(in, r);
    if (!o.out.empty()) write_atomic(o.out, report.dump(2) + "\n");
    if (!o.curve.empty()) write_atomic(o.curve, curve_csv(r.model, data));
    if (!o.model_out.empty()) save_model(r.model, o.model_out);
    std::printf("J = %.10g\ngrid_min = %.6g\nsegments = %d\nstatus = %s\n", r.J, r.grid_min,
                r.segmentation ? r.segmentation->intervals() : 0, std::string(to_string(r.stats.last_status)).c_str());
    print_model(r.model);
    if (ccdf) {
        const double f0 = sope_eval(r.model, data.interval.lo);
        std::printf("F(t0) = %.12g\n", f0);
        if (std::abs(f0 - 1.0) > 1e-8) {
            std::fprintf(stderr, "error[boundary]: F(t0) deviates from 1 by %.3g\n", std::abs(f0 - 1.0));
            return kExitFailed;
        }
    }
    return kExitOk;
}

struct CheckOptions {
    std::string model;
    std::vector<double> interval;
    double epsilon = 1e-8;
    int nu_max = 8;
};

int cmd_check(const CheckOptions& o) {
    const SopeModel m = load_model(o.model);
    FitConfig cfg;
    cfg.epsilon = o.epsilon;
    cfg.nu_max = o.nu_max;
    const PositivityReport rep = positivity_check(m, required_interval(o.interval, "check"), cfg);
    switch (rep.verdict) {
    case Positivity::Certified:
        std::printf("Certified (grid_min %.6g, certified lower bound %.6g)\n", rep.grid_min, rep.margin);
        return kExitOk;
    case Positivity::Violated:
        std::printf("Violated(t* = %.10g) value %.6g\n", rep.witness, sope_eval(m, rep.witness));
        return kExitFailed;
    case Positivity::Unknown:
        std::printf("Unknown (grid_min %.6g): %s\n", rep.grid_min, rep.diagnostic.c_str());
        return kExitUnknown;
    }
    return kExitUnknown;
}

struct ApproxOptions {
    std::vector<double> lambdas, interval;
    double epsilon = 1e-10;
    int nu_max = 8;
    bool parallel = false;
    std::string out;
};

int cmd_approx(const ApproxOptions& o) {
    require(!o.lambdas.empty(), "--lambdas is required");
    const Segmentation s = split(o.lambdas, required_interval(o.interval, "approx"), o.epsilon, o.nu_max,
                                 default_table(), o.parallel ? Exec::Parallel : Exec::Serial);
    json j;
    j["K"] = s.intervals();
    j["endpoints"] = s.endpoints;
    j["lambdas"] = s.lambdas;
    j["epsilon"] = s.epsilon;
    j["nu_max"] = s.nu_max;
    json segs = json::array();
    for (int k = 0; k < s.intervals(); ++k) {
        json env = json::array();
        for (std::size_t i = 0; i < s.envelopes[k].size(); ++i) {
            const EnvelopePair& e = s.envelopes[k][i];
            env.push_back({{"lambda", e.lambda},
                           {"degree", s.degrees(k, static_cast<Eigen::Index>(i))},
                           {"degree_lower", e.degree_lower},
                           {"degree_upper", e.degree_upper},
                           {"sup_error", e.measured_sup_error}});
        }
        segs.push_back({{"interval", {s.endpoints[k], s.endpoints[k + 1]}}, {"envelopes", env}});
    }
    j["segments"] = segs;
    const std::string text = j.dump(2) + "\n";
    if (o.out.empty())
        std::cout << text;
    else
        write_atomic(o.out, text);
    return kExitOk;
}

struct TableOptions {
    double tau_step = 0.2, tau_max = 10.0;
    int nu_max = 12;
    bool rebuild = false, parallel = false;
    std::string cache, out;
};

int cmd_table(const TableOptions& o) {
    require(o.tau_step > 0.0 && o.tau_max >= o.tau_step, "need 0 < --tau-step <= --tau-max");
    require(o.nu_max >= 0, "--nu-max must be non-negative");
    std::vector<double> taus;
    const int count = static_cast<int>(std::floor(o.tau_max / o.tau_step + 1e-9));
    for (int i = 1; i <= count; ++i) taus.push_back(i * o.tau_step);
    std::vector<int> nus;
    for (int v = 0; v <= o.nu_max; ++v) nus.push_back(v);
    const Exec exec = o.parallel ? Exec::Parallel : Exec::Serial;
    ErrorTable t;
    if (o.cache.empty()) {
        t = build_table(taus, nus, exec);
    } else if (o.rebuild) {
        t = build_table(taus, nus, exec);
        save_table(t, o.cache);
    } else {
        t = load_or_build_table(o.cache, taus, nus, exec);
    }
    std::ostringstream os;
    os << "# " << t.tau_grid.size() << " x " << t.nu_range.size() << "\n# tau";
    for (int v : t.nu_range) os << ",nu" << v;
    os << '\n';
    char buf[32];
    for (std::size_t i = 0; i < t.tau_grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6g", t.tau_grid[i]);
        os << buf;
        for (Eigen::Index j = 0; j < t.entries.cols(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.6e", t.entries(static_cast<Eigen::Index>(i), j));
            os << buf;
        }
        os << '\n';
    }
    if (o.out.empty())
        std::cout << os.str();
    else
        write_atomic(o.out, os.str());
    return kExitOk;
}

struct ReproduceOptions {
    std::string name, data_dir, out;
    bool parallel = false;
};

json reproduction_json(const Reproduction& r) {
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"what", c.what},
                          {"value", c.value},
                          {"lo", std::isfinite(c.lo) ? json(c.lo) : json(nullptr)},
                          {"hi", std::isfinite(c.hi) ? json(c.hi) : json(nullptr)},
                          {"pass", c.pass}});
    json fits = json::array();
    for (const auto& [label, f] : r.fits)
        fits.push_back({{"label", label}, {"J", f.J}, {"grid_min", f.grid_min}, {"model", model_json(f.model)},
                        {"iterations", f.trace.empty() ? 0 : f.trace.size() - 1}});
    return {{"name", r.name}, {"pass", r.pass()}, {"seconds", r.seconds}, {"checks", checks}, {"fits", fits}};
}

int cmd_reproduce(const ReproduceOptions& o) {
    const std::filesystem::path dir = o.data_dir.empty() ? default_data_dir() : std::filesystem::path(o.data_dir);
    std::vector<std::string> names = o.name == "all" ? reproduction_names() : std::vector<std::string>{o.name};
    json all = json::array();
    bool ok = true;
    for (const auto& name : names) {
        const Reproduction r = reproduce(name, dir, o.parallel ? Exec::Parallel : Exec::Serial);
        for (const auto& c : r.checks) {
            std::printf("%s  %s: %s = %.6g", c.pass ? "PASS" : "FAIL", name.c_str(), c.what.c_str(), c.value);
            if (std::isfinite(c.lo) && std::isfinite(c.hi))
                std::printf("  (expected [%.6g, %.6g])\n", c.lo, c.hi);
            else if (std::isfinite(c.hi))
                std::printf("  (expected <= %.6g)\n", c.hi);
            else
                std::printf("  (expected >= %.6g)\n", c.lo);
        }
        std::printf("%s: %s in %.1f s\n", name.c_str(), r.pass() ? "PASS" : "FAIL", r.seconds);
        std::fflush(stdout);
        ok = ok && r.pass();
        all.push_back(reproduction_json(r));
    }
    if (!o.out.empty()) write_atomic(o.out, all.dump(2) + "\n");
    return ok ? kExitOk : kExitFailed;
}

} // namespace

int run(const std::vector<std::string>& raw_args) {
    CLI::App app{"Fitting of sums of polynomials times exponentials with certified positivity", "sopefit"};
    app.require_subcommand(1);
    std::string log_level;
    app.add_option("--log-level", log_level, "quiet, info or debug (default from SOPE_LOG)");

    FitOptions fit_opts, ccdf_opts;
    auto* fit = app.add_subcommand("fit", "fit a density model to samples or an analytic target");
    add_fit_options(fit, fit_opts);
    auto* fit_ccdf = app.add_subcommand("fit-ccdf", "fit a ccdf F with -F' >= 0, F(t0) = 1 and F(tf) >= 0");
    add_fit_options(fit_ccdf, ccdf_opts);

    CheckOptions check_opts;
    auto* check = app.add_subcommand("check", "decide positivity of a model on an interval");
    check->add_option("--model", check_opts.model, "model file")->required();
    check->add_option("--interval", check_opts.interval, "a,b")->delimiter(',')->expected(2)->required();
    check->add_option("--epsilon", check_opts.epsilon, "envelope accuracy");
    check->add_option("--nu-max", check_opts.nu_max, "maximum envelope degree");

    ApproxOptions approx_opts;
    auto* approx = app.add_subcommand("approx", "segment an interval and build one-sided envelopes");
    approx->add_option("--lambdas", approx_opts.lambdas, "l1,l2,...")->delimiter(',')->required();
    approx->add_option("--interval", approx_opts.interval, "a,b")->delimiter(',')->expected(2)->required();
    approx->add_option("--epsilon", approx_opts.epsilon, "envelope accuracy");
    approx->add_option("--nu-max", approx_opts.nu_max, "maximum envelope degree");
    approx->add_flag("--parallel", approx_opts.parallel, "OpenMP kernels");
    approx->add_option("--out", approx_opts.out, "output file (default stdout)");

    TableOptions table_opts;
    auto* table = app.add_subcommand("table", "build or load the error table of e^{-t}");
    table->add_option("--tau-step", table_opts.tau_step, "tau spacing");
    table->add_option("--tau-max", table_opts.tau_max, "largest tau");
    table->add_option("--nu-max", table_opts.nu_max, "largest degree");
    table->add_option("--cache", table_opts.cache, "cache file");
    table->add_flag("--rebuild", table_opts.rebuild, "ignore and overwrite the cache");
    table->add_flag("--parallel", table_opts.parallel, "OpenMP kernels");
    table->add_option("--out", table_opts.out, "output file (default stdout)");

    ReproduceOptions repro_opts;
    auto* repro = app.add_subcommand("reproduce", "run a published example and compare against its thresholds");
    std::vector<std::string> choices = reproduction_names();
    choices.push_back("all");
    repro->add_option("name", repro_opts.name, "example name")->required()->check(CLI::IsMember(choices));
    repro->add_option("--data-dir", repro_opts.data_dir, "directory holding data fixtures");
    repro->add_option("--out", repro_opts.out, "JSON summary");
    repro->add_flag("--parallel", repro_opts.parallel, "OpenMP kernels");

    std::vector<std::string> args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream out, err;
        const int code = app.exit(e, out, err);
        std::cout << out.str();
        std::cerr << err.str();
        return code == 0 ? kExitOk : kExitUsage;
    }
    try {
        if (!log_level.empty()) set_log_level(parse_log_level(log_level));
        if (fit->parsed()) return cmd_fit(*fit, fit_opts, false);
        if (fit_ccdf->parsed()) return cmd_fit(*fit_ccdf, ccdf_opts, true);
        if (check->parsed()) return cmd_check(check_opts);
        if (approx->parsed()) return cmd_approx(approx_opts);
        if (table->parsed()) return cmd_table(table_opts);
        if (repro->parsed()) return cmd_reproduce(repro_opts);
    } catch (const Error& e) {
        std::fprintf(stderr, "error[%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error[internal]: %s\n", e.what());
        return kErrorBase + 99;
    }
    return kExitUsage;
}

} // namespace sope::cli
