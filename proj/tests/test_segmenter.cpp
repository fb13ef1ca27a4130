#include "sope/error.hpp"
#include "sope/segmenter.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace sope;

TEST_CASE("default table shape and examples") {
    const auto& t = default_table();
    CHECK(t.tau_grid.size() == 50);
    CHECK(t.nu_range.size() == 13);
    CHECK(t.tau_grid.back() == doctest::Approx(10.0));
    for (std::size_t i = 0; i < t.tau_grid.size(); ++i) {
        if (t.tau_grid[i] <= 1.0 + 1e-12) CHECK(t.entry(i, 8) <= 1e-10);
        // Constant one-sided bounds of a monotone function on [0, tau].
        CHECK(t.entry(i, 0) == doctest::Approx(1 - std::exp(-t.tau_grid[i])).epsilon(1e-12));
    }
}

TEST_CASE("property: table monotone in tau and degree") {
    const auto& t = default_table();
    for (Eigen::Index i = 0; i < t.entries.rows(); ++i)
        for (Eigen::Index j = 0; j < t.entries.cols(); ++j) {
            if (j + 1 < t.entries.cols()) CHECK(t.entries(i, j + 1) <= t.entries(i, j) + 1e-13);
            if (i + 1 < t.entries.rows()) CHECK(t.entries(i + 1, j) >= t.entries(i, j) - 1e-13);
        }
}

TEST_CASE("table build: parallel equals serial, and it is quick") {
    auto start = std::chrono::steady_clock::now();
    auto a = build_table(default_tau_grid(), default_nu_range(), Exec::Serial);
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 5.0);
    auto b = build_table(default_tau_grid(), default_nu_range(), Exec::Parallel);
    CHECK(a.entries == b.entries);
}

TEST_CASE("table cache round-trips exactly") {
    auto dir = std::filesystem::temp_directory_path() / "sope_table_test";
    std::filesystem::create_directories(dir);
    auto path = dir / "table.txt";
    const auto& t = default_table();
    save_table(t, path);
    auto u = load_table(path);
    CHECK(u.tau_grid == t.tau_grid);
    CHECK(u.nu_range == t.nu_range);
    CHECK(u.entries == t.entries);
    auto v = load_or_build_table(path, t.tau_grid, t.nu_range);
    CHECK(v.entries == t.entries);

    ErrorTable inf_table = t;
    inf_table.entries(3, 4) = INFINITY;
    save_table(inf_table, path);
    CHECK(std::isinf(load_table(path).entries(3, 4)));

    std::ofstream(path) << "garbage\n";
    CHECK_THROWS_AS(load_table(path), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("lookup_length examples") {
    const auto& t = default_table();
    CHECK(lookup_length(t, 3.0, 1.0, 1e-10, 8) == doctest::Approx(1.6 / 3).epsilon(0.02));
    CHECK(std::isinf(lookup_length(t, 0.0, 0.0, 1e-10, 8)));
    // "Largest value smaller than": equality excludes that tau.
    const std::size_t star = 10;
    CHECK(lookup_length(t, 1.0, 0.0, t.entry(star, 6), 6) == doctest::Approx(t.tau_grid[star - 1]));
    double prev = 0.0;
    for (double ts = 0.0; ts < 8.0; ts += 0.5) {
        const double d = lookup_length(t, 1.3, ts, 1e-10, 8);
        CHECK(d >= prev);
        prev = d;
    }
    CHECK_THROWS_AS(lookup_length(t, 1.0, 0.0, 1e-30, 2), Error);
    CHECK_THROWS_AS(lookup_length(t, 1.0, 0.0, 1e-10, 40), Error);
}

TEST_CASE("three-exponent example") {
    auto seg = split({0.3, 1.0, 3.0}, {0, 10}, 1e-10, 8, default_table());
    REQUIRE(seg.intervals() == 10);
    CHECK(seg.endpoints[1] == doctest::Approx(0.33).epsilon(0.06));
    CHECK(std::abs(seg.endpoints[9] - 9.27) <= 0.02);
    CHECK(std::abs(seg.endpoints[8] - 6.67) <= 0.02);
    CHECK(seg.endpoints.back() == 10.0);
    const int first[] = {5, 6, 8};
    const int last[] = {6, 5, 1};
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(seg.degrees(0, i) - first[i]) <= 1);
        CHECK(std::abs(seg.degrees(9, i) - last[i]) <= 1);
    }
    CHECK(seg.degrees(0, 2) == 8);
}

TEST_CASE("property: segmentation contract") {
    for (double eps : {1e-6, 1e-8, 1e-10, 1e-12}) {
        auto seg = split({0.0, 0.4, 1.1, 2.5}, {0, 12}, eps, 10, default_table());
        CHECK(seg.endpoints.front() == 0.0);
        CHECK(seg.endpoints.back() == 12.0);
        for (int k = 0; k < seg.intervals(); ++k) {
            CHECK(seg.endpoints[k] < seg.endpoints[k + 1]);
            for (const auto& pair : seg.envelopes[k]) {
                auto chk = verify_one_sided(pair);
                CHECK(chk.sup_error <= eps);
                CHECK(chk.max_violation <= 1e-12);
                CHECK(pair.lower.frame().center == doctest::Approx(seg.interval(k).mid()));
                CHECK(pair.upper.frame().center == doctest::Approx(seg.interval(k).mid()));
            }
        }
    }
}

TEST_CASE("property: interval count weakly decreasing in eps and nu_max") {
    const auto& t = default_table();
    const std::vector<double> lams{0.2, 0.9, 4.0};
    int prev = 1 << 30;
    for (double eps : {1e-13, 1e-11, 1e-9, 1e-7, 1e-5, 1e-3}) {
        const int k = split_endpoints(lams, {0, 15}, eps, 8, t).intervals();
        CHECK(k <= prev);
        prev = k;
    }
    prev = 1 << 30;
    for (int nu = 6; nu <= 12; ++nu) {
        const int k = split_endpoints(lams, {0, 15}, 1e-10, nu, t).intervals();
        CHECK(k <= prev);
        prev = k;
    }
}

TEST_CASE("single exponent cases") {
    const auto& t = default_table();
    auto one = split({1.0}, {0, 10}, 1.5 * t.entry(49, 12), 12, t);
    CHECK(one.intervals() == 1);
    const double d1 = lookup_length(t, 2.0, 0.0, 1e-10, 8);
    auto two = split({2.0}, {0, 2 * d1}, 1e-10, 8, t);
    REQUIRE(two.intervals() == 2);
    CHECK(two.endpoints[1] == doctest::Approx(d1));
}

TEST_CASE("split input validation") {
    const auto& t = default_table();
    CHECK_THROWS_AS(split({1.0, 0.5}, {0, 1}, 1e-10, 8, t), Error);
    CHECK_THROWS_AS(split({1.0, 1.0}, {0, 1}, 1e-10, 8, t), Error);
    CHECK_THROWS_AS(split({1.0}, {0, 1}, 0.0, 8, t), Error);
}

TEST_CASE("split: parallel envelopes equal serial") {
    const auto& t = default_table();
    auto a = split({0.3, 1.0, 3.0}, {0, 10}, 1e-10, 8, t, Exec::Serial);
    auto b = split({0.3, 1.0, 3.0}, {0, 10}, 1e-10, 8, t, Exec::Parallel);
    CHECK(a.degrees == b.degrees);
    for (int k = 0; k < a.intervals(); ++k)
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(a.envelopes[k][i].lower == b.envelopes[k][i].lower);
            CHECK(a.envelopes[k][i].upper == b.envelopes[k][i].upper);
        }
}
