// Acceptance gate: one line per criterion, nonzero exit if any fails.
// Usage: acceptance [criterion numbers...]

#include "reproduce.hpp"

#include "sope/conicsolve.hpp"
#include "sope/error.hpp"
#include "sope/fitter.hpp"
#include "sope/onesided.hpp"
#include "sope/psdcone.hpp"
#include "sope/segmenter.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>

using namespace sope;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Independent sup-norm measurement on a grid finer than the builder's own.
struct Gap {
    double violation = 0.0; // worst amount on the wrong side
    double sup = 0.0;
};

Gap measure(const EnvelopePair& e, int points = 5001) {
    Gap g;
    const Interval& iv = e.interval;
    for (int k = 0; k < points; ++k) {
        const double t = iv.lo + iv.width() * k / (points - 1.0);
        const double f = std::exp(-e.lambda * t);
        const double lo = e.lower.at_time(t), up = e.upper.at_time(t);
        g.violation = std::max({g.violation, lo - f, f - up});
        g.sup = std::max({g.sup, std::abs(f - lo), std::abs(up - f)});
    }
    return g;
}

Outcome c1_envelopes() {
    const auto t0 = Clock::now();
    std::mt19937 rng(1001);
    std::uniform_real_distribution<double> ulam(0.05, 10.0), uw(0.05, 3.0), u01(0.0, 1.0);
    std::uniform_int_distribution<int> unu(0, 10);
    double worst = 0.0;
    int failures = 0, errors = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double lam = ulam(rng), w = uw(rng);
        const double lo = u01(rng) * (20.0 - w);
        const int nu = unu(rng);
        try {
            const EnvelopePair e = build_envelope(lam, Interval(lo, lo + w), nu);
            const double rel = measure(e).violation / std::exp(-lam * lo);
            worst = std::max(worst, rel);
            if (rel > 1e-12) ++failures;
        } catch (const Error&) {
            ++errors;
        }
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && errors == 0 && secs < 10.0,
            fmt("1000 cases, worst violation/scale %.2e (<= 1e-12), %d over, %d build errors, %.2f s (< 10 s)", worst,
                failures, errors, secs)};
}

Outcome c2_degree8() {
    const EnvelopePair e = build_envelope(1.0, Interval(0.0, 1.0), 8);
    double sl = 0.0, su = 0.0, wrong = 0.0;
    for (int k = 0; k <= 20000; ++k) {
        const double t = k / 20000.0, f = std::exp(-t);
        const double lo = e.lower.at_time(t), up = e.upper.at_time(t);
        sl = std::max(sl, std::abs(f - lo));
        su = std::max(su, std::abs(up - f));
        wrong = std::max({wrong, lo - f, f - up});
    }
    return {sl <= 1e-9 && su <= 1e-9 && wrong <= 1e-15,
            fmt("sup error lower %.3e, upper %.3e (<= 1e-9), wrong-side %.1e, degrees %d/%d", sl, su, wrong,
                e.degree_lower, e.degree_upper)};
}

Outcome c3_segmentation() {
    const auto t0 = Clock::now();
    const ErrorTable table = build_table(default_tau_grid(), default_nu_range(), Exec::Parallel);
    const Segmentation s = split({0.3, 1.0, 3.0}, Interval(0.0, 10.0), 1e-10, 8, table, Exec::Parallel);
    const double secs = seconds_since(t0);
    const int K = static_cast<int>(s.degrees.rows());
    auto near = [&](int k, std::array<int, 3> ref) {
        for (int i = 0; i < 3; ++i)
            if (std::abs(s.degrees.coeff(k, i) - ref[static_cast<std::size_t>(i)]) > 1) return false;
        return true;
    };
    const bool ok = K == 10 && std::abs(s.endpoints[1] - 0.33) <= 0.02 && near(0, {5, 6, 8}) && near(K - 1, {6, 5, 1}) &&
                    secs < 5.0;
    return {ok, fmt("K = %d (10), t1 = %.4f (0.33 +- 0.02), first (%d,%d,%d), last (%d,%d,%d), %.2f s (< 5 s)", K,
                    s.endpoints[1], s.degrees.coeff(0, 0), s.degrees.coeff(0, 1), s.degrees.coeff(0, 2), s.degrees.coeff(K - 1, 0),
                    s.degrees.coeff(K - 1, 1), s.degrees.coeff(K - 1, 2), secs)};
}

Outcome c4_fixed() {
    const FitResult r = cli::run_example(cli::sexton_fixed());
    const double a[3] = {r.model.terms[0].p.coeff(0), r.model.terms[1].p.coeff(0), r.model.terms[2].p.coeff(0)};
    const double ref[3] = {15.5243, -28.5073, 14.2410};
    bool coef = true;
    for (int i = 0; i < 3; ++i) coef = coef && std::abs(a[i] - ref[i]) <= 1e-2;
    const bool ok = std::abs(r.J - 0.0712) <= 1e-3 * 0.0712 && coef;
    return {ok, fmt("J = %.6f (0.0712 rel 1e-3), alpha = (%.4f, %.4f, %.4f) (abs 1e-2)", r.J, a[0], a[1], a[2])};
}

Outcome c5_search() {
    const auto t0 = Clock::now();
    const FitResult r = cli::run_example(cli::sexton_search(0.01), Exec::Parallel);
    const double secs = seconds_since(t0);
    const double init = r.trace.front().J;
    const bool ok = std::abs(init - 0.0433) <= 0.002 && r.J <= 0.044 && r.grid_min >= -1e-6 && secs <= 300.0;
    return {ok, fmt("init J = %.5f (0.0433 +- 0.002), final J = %.5f (<= 0.044), grid min %.2e (>= -1e-6), "
                    "%zu iterations, %.1f s (<= 300 s)",
                    init, r.J, r.grid_min, r.trace.size() - 1, secs)};
}

Outcome c6_q003() {
    const FitResult r = cli::run_example(cli::sexton_search(0.03), Exec::Parallel);
    const double init = r.trace.front().J;
    const bool ok = std::abs(init - 0.2227) <= 0.01 && r.J <= 0.046;
    return {ok, fmt("init J = %.5f (0.2227 +- 0.01), final J = %.5f (<= 0.046)", init, r.J)};
}

Outcome c7_weibull() {
    const FitResult r = cli::run_example(cli::weibull_w1(), Exec::Parallel);
    return {r.J <= 1e-4, fmt("J = %.4e (<= 1e-4), grid min %.2e", r.J, r.grid_min)};
}

Outcome c8_table() {
    const double p3 = cli::run_example(cli::pareto_ccdf(3), Exec::Parallel).J;
    const double p5 = cli::run_example(cli::pareto_ccdf(5), Exec::Parallel).J;
    const double l3 = cli::run_example(cli::lognormal_ccdf(3), Exec::Parallel).J;
    return {p3 <= 3e-4 && p5 <= 6e-5 && l3 <= 3e-3,
            fmt("Pareto n=3 J = %.3e (<= 3e-4), n=5 J = %.3e (<= 6e-5), lognormal n=3 J = %.3e (<= 3e-3)", p3, p5, l3)};
}

Outcome c9_oldfaithful() {
    const auto file = cli::oldfaithful_file(cli::default_data_dir());
    const double soe = cli::run_example(cli::oldfaithful(file, false), Exec::Parallel).J;
    const double sope = cli::run_example(cli::oldfaithful(file, true), Exec::Parallel).J;
    return {soe <= 0.013 && sope <= 0.012, fmt("SOE n=6 J = %.5f (<= 0.013), SOPE (0,1,1,0) J = %.5f (<= 0.012)", soe, sope)};
}

// Planted complementary pair (x*, s*) in the cones of `kind`; the optimum
// value is c'x*.
ConicProgram planted(std::mt19937& rng, int kind, double& opt) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.5, 2.0);
    ProgramBuilder b;
    auto fr = b.add_free(2, "f");
    std::vector<VarRef> nn, so;
    std::optional<PsdRef> ps;
    if (kind == 0 || kind == 3) nn = b.add_nonneg(6, "l");
    if (kind == 1 || kind == 3) so = b.add_soc(5, "q");
    if (kind == 2 || kind == 3) ps = b.add_psd(3);
    const int N = b.num_vars();
    Eigen::VectorXd xs = Eigen::VectorXd::Zero(N), ss = Eigen::VectorXd::Zero(N);
    for (auto& v : fr) xs(v.index) = g(rng);
    for (std::size_t i = 0; i < nn.size(); ++i) (i % 2 ? xs : ss)(nn[i].index) = u(rng);
    if (!so.empty()) {
        Eigen::Vector4d d(g(rng), g(rng), g(rng), g(rng));
        d.normalize();
        const double tx = u(rng), ts = u(rng);
        xs(so[0].index) = tx;
        ss(so[0].index) = ts;
        for (int i = 0; i < 4; ++i) {
            xs(so[i + 1].index) = tx * d(i);
            ss(so[i + 1].index) = -ts * d(i);
        }
    }
    if (ps) {
        Eigen::Matrix3d R;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) R(i, j) = g(rng);
        const Eigen::Matrix3d Q = Eigen::HouseholderQR<Eigen::Matrix3d>(R).householderQ();
        Eigen::Vector3d ex(u(rng), 0, 0), es(0, u(rng), u(rng));
        xs.segment(ps->offset, 6) = svec(Q * ex.asDiagonal() * Q.transpose());
        ss.segment(ps->offset, 6) = svec(Q * es.asDiagonal() * Q.transpose());
    }
    const int m = std::min(N - 1, 10);
    Eigen::MatrixXd A(m, N);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < N; ++j) A(i, j) = g(rng);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) y(i) = g(rng);
    const Eigen::VectorXd bvec = A * xs;
    const Eigen::VectorXd cvec = A.transpose() * y + ss;
    for (int i = 0; i < m; ++i) {
        LinearExpr e(-bvec(i));
        for (int j = 0; j < N; ++j) e += LinearExpr::var(j, A(i, j));
        b.add_equality(e);
    }
    LinearExpr obj;
    for (int j = 0; j < N; ++j) obj += LinearExpr::var(j, cvec(j));
    b.add_objective(obj);
    opt = cvec.dot(xs);
    return b.build();
}

Outcome c10_solver() {
    std::mt19937 rng(1010);
    int bad = 0, nondet = 0;
    double worst_obj = 0.0, worst_kkt = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        double opt = 0.0;
        const ConicProgram prog = planted(rng, trial % 4, opt);
        const ConicSolution a = solve(prog);
        const ConicSolution b = solve(prog);
        if (a.x != b.x || a.y != b.y || a.iterations != b.iterations) ++nondet;
        const double rel = std::abs(a.primal_objective - opt) / std::max(1.0, std::abs(opt));
        const Residuals r = kkt_residuals(prog, a);
        const double kkt = std::max(r.primal / (1.0 + prog.b.norm()), r.dual / (1.0 + prog.c.norm()));
        worst_obj = std::max(worst_obj, rel);
        worst_kkt = std::max(worst_kkt, kkt);
        if (a.status != SolveStatus::Optimal || rel > 1e-7 || kkt > 1e-8) ++bad;
    }
    return {bad == 0 && nondet == 0, fmt("50 LP/SOCP/SDP/mixed instances, worst objective rel %.2e (<= 1e-7), worst "
                                         "scaled KKT %.2e (<= 1e-8), %d failed, %d nondeterministic",
                                         worst_obj, worst_kkt, bad, nondet)};
}

SopeModel random_model(std::mt19937& rng, int n, int max_degree) {
    std::uniform_real_distribution<double> u(0.2, 3.0), c(-2.0, 2.0);
    std::uniform_int_distribution<int> deg(0, max_degree);
    std::vector<double> lam;
    for (int i = 0; i < n; ++i) lam.push_back(u(rng));
    std::sort(lam.begin(), lam.end());
    for (int i = 1; i < n; ++i)
        if (lam[i] - lam[i - 1] < 0.05) lam[i] = lam[i - 1] + 0.05;
    SopeModel m;
    for (int i = 0; i < n; ++i) {
        std::vector<double> co(static_cast<std::size_t>(deg(rng)) + 1);
        for (double& v : co) v = c(rng);
        m.terms.push_back({lam[i], Polynomial(co)});
    }
    return m;
}

double fd_mismatch(const SopeModel& m, const FitData& d, Criterion which) {
    const Eigen::VectorXd g = lambda_gradient(m, d, which);
    const auto lam = m.lambdas();
    double err = 0.0;
    for (std::size_t i = 0; i < lam.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, lam[i]);
        SopeModel p = m, q = m;
        p.terms[i].lambda += h;
        q.terms[i].lambda -= h;
        const double fd = (criterion(p, d, which) - criterion(q, d, which)) / (2.0 * h);
        err = std::max(err, std::abs(fd - g(static_cast<Eigen::Index>(i))));
    }
    return err / std::max(g.lpNorm<Eigen::Infinity>(), 1e-12);
}

Outcome c11_gradients() {
    std::mt19937 rng(1111);
    FitData d = cli::sexton_data(300);
    double w_soe = 0.0, w_sope = 0.0, w_int = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 4;
        const SopeModel soe = random_model(rng, n, 0);
        const SopeModel sope = random_model(rng, n, 3);
        w_soe = std::max(w_soe, fd_mismatch(soe, d, Criterion::LeastSquares));
        w_sope = std::max(w_sope, fd_mismatch(sope, d, Criterion::LeastSquares));
        w_int = std::max(w_int, fd_mismatch(soe, d, Criterion::Integral));
    }
    return {std::max({w_soe, w_sope, w_int}) <= 1e-5,
            fmt("100 instances each, worst relative mismatch SOE %.2e, SOPE %.2e, integral %.2e (<= 1e-5)", w_soe, w_sope,
                w_int)};
}

Outcome c12_perturbed() {
    std::mt19937 rng(1212);
    std::uniform_real_distribution<double> u(0.0, 1.0), c(-3.0, 3.0);
    double worst = -INFINITY;
    int over = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + trial % 3;
        const double a = 4.0 * u(rng), w = 0.1 + 1.5 * u(rng);
        const Interval iv(a, a + w);
        const SopeModel m = random_model(rng, n, 2);
        std::vector<EnvelopePair> env;
        std::vector<Polynomial> gamma, eps;
        for (int i = 0; i < n; ++i) {
            env.push_back(build_envelope(m.terms[i].lambda, iv, 3 + trial % 6));
            gamma.push_back(Polynomial({c(rng), c(rng), c(rng)}));
            const Polynomial r({c(rng), c(rng)});
            eps.push_back(r * r + Polynomial::constant(u(rng)));
        }
        double scale = 1.0, gap = -INFINITY;
        for (int k = 0; k <= 500; ++k) {
            const double t = iv.lo + iv.width() * k / 500.0;
            double P = 0.0, Pe = 0.0;
            for (int i = 0; i < n; ++i) {
                const double p = m.terms[i].p.at_time(t), g = gamma[i].at_time(t), e = eps[i].at_time(t);
                const double hi = env[i].upper.at_time(t), lo = env[i].lower.at_time(t);
                P += (p - g) * hi + g * lo;
                Pe += (p - g - e) * hi + (g + e) * lo;
                scale = std::max({scale, std::abs(p * hi), std::abs(g * hi), std::abs(e * hi)});
            }
            gap = std::max(gap, (Pe - P) / scale);
        }
        worst = std::max(worst, gap);
        if (gap > 1e-12) ++over;
    }
    return {over == 0, fmt("100 triples, worst (P_eps - P)/scale %.2e (<= 1e-12 roundoff), %d over", worst, over)};
}

Outcome c13_formulations() {
    std::mt19937 rng(1313);
    std::uniform_real_distribution<double> ul(0.2, 1.0), uq(0.15, 0.5), uc(-1.0, 1.0);
    double worst = 0.0;
    int errors = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const double l1 = ul(rng), q = uq(rng);
        const int n = 4 + trial % 3;
        std::vector<int> support{0};
        for (int j = 1; j < n; ++j)
            if (rng() % 2) support.push_back(j);
        if (support.size() < 2) support.push_back(n - 1);
        std::vector<double> lam;
        for (int j : support) lam.push_back(l1 + j * q);
        // Mixed-sign target so that positivity is active in some instances.
        const double a1 = 1.0 + uc(rng), a2 = 3.0 * uc(rng), l2 = l1 + 2.0 * uq(rng);
        Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(150, 0.0, 8.0), h(150);
        for (int m = 0; m < 150; ++m) h(m) = a1 * std::exp(-l1 * t(m)) + a2 * std::exp(-l2 * t(m)) + 0.05 * uc(rng);
        const FitData d = make_samples(t, h, Interval(0.0, 8.0));
        try {
            const FitResult a = arithmetic_fit(l1, q, n, d, {}, support);
            const FitResult b = solve_sope_c(lam, std::vector<int>(lam.size(), 0), d);
            worst = std::max(worst, std::abs(a.J - b.J) / std::max(std::abs(b.J), 1e-300));
        } catch (const Error& e) {
            std::fprintf(stderr, "criterion 13 instance %d: %s\n", trial, e.what());
            ++errors;
        }
    }
    return {worst <= 1e-6 && errors == 0,
            fmt("20 instances, worst relative J difference %.2e (<= 1e-6), %d errors", worst, errors)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"one-sided envelope suite", c1_envelopes},
        {"degree-8 accuracy", c2_degree8},
        {"segmentation reproduction", c3_segmentation},
        {"convex subproblem exactness", c4_fixed},
        {"full SOE search, q = 0.01", c5_search},
        {"full SOE search, q = 0.03", c6_q003},
        {"Weibull W1", c7_weibull},
        {"Pareto and lognormal ccdf rows", c8_table},
        {"Old Faithful", c9_oldfaithful},
        {"solver unit suite", c10_solver},
        {"gradient suite", c11_gradients},
        {"perturbed envelope property", c12_perturbed},
        {"formulation cross-check", c13_formulations},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
