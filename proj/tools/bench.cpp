// Serial reference vs OpenMP kernels: wall time and bitwise agreement.

#include "reproduce.hpp"

#include "sope/fitter.hpp"
#include "sope/onesided.hpp"
#include "sope/parallel.hpp"
#include "sope/segmenter.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

using namespace sope;

namespace {

template <class F>
auto timed(F&& f, double& seconds) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = f();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

template <class F, class Eq>
bool row(const char* name, F&& f, Eq&& equal) {
    double ts = 0.0, tp = 0.0;
    const auto s = timed([&] { return f(Exec::Serial); }, ts);
    const auto p = timed([&] { return f(Exec::Parallel); }, tp);
    const bool same = equal(s, p);
    std::printf("%-22s %10.3f %10.3f %8.2fx  %s\n", name, ts, tp, ts / tp, same ? "identical" : "MISMATCH");
    return same;
}

bool same_pairs(const std::vector<EnvelopePair>& a, const std::vector<EnvelopePair>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!(a[i].lower == b[i].lower) || !(a[i].upper == b[i].upper)) return false;
    return true;
}

} // namespace

int main() {
    std::printf("threads: %d\n", max_threads());
    std::printf("%-22s %10s %10s %9s  %s\n", "kernel", "serial s", "parallel s", "speedup", "results");
    bool ok = true;

    ok &= row(
        "error table",
        [](Exec e) { return build_table(default_tau_grid(), default_nu_range(), e); },
        [](const ErrorTable& a, const ErrorTable& b) { return a.entries == b.entries; });

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<EnvelopeRequest> reqs;
    for (int i = 0; i < 4000; ++i) {
        const double w = 0.05 + 2.0 * u(rng), lo = 10.0 * u(rng);
        reqs.push_back({0.05 + 5.0 * u(rng), Interval(lo, lo + w), static_cast<int>(12 * u(rng))});
    }
    ok &= row("envelope batch", [&](Exec e) { return build_envelopes(reqs, e); }, same_pairs);

    const SopeModel m = SopeModel::soe({16.0, -30.0, 15.0}, {0.5, 1.0, 2.0});
    ok &= row("grid minimum", [&](Exec e) { return grid_min(m, Interval(0.0, 10.0), 4000000, e); },
              [](double a, double b) { return a == b; });

    const cli::Example ex = cli::weibull_w1();
    FitConfig cfg = ex.config;
    cfg.max_outer_iterations = 2;
    const FitResult start = solve_sope_c({1.0, 1.5, 2.0, 2.5}, ex.degrees, ex.data, cfg);
    ok &= row(
        "exponent refinement",
        [&](Exec e) {
            FitConfig c = cfg;
            c.exec = e;
            return refine_exponents(start, ex.data, c);
        },
        [](const FitResult& a, const FitResult& b) { return a.J == b.J && a.model.lambdas() == b.model.lambdas(); });

    return ok ? 0 : 1;
}
