#include "cli.hpp"
#include "ingest.hpp"
#include "report.hpp"
#include "reproduce.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include <unistd.h>

using namespace sope;
using namespace sope::cli;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() / ("sope_cli_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

} // namespace

TEST_CASE("sample files") {
    const FitData d = parse_samples("# t h w\n0, 1\n0.5\t2 2\n1 3\n");
    REQUIRE(d.size() == 3);
    CHECK(d.h(1) == 2.0);
    CHECK(d.w(1) == 2.0);
    CHECK(d.w(0) == 1.0);
    CHECK(d.interval.lo == 0.0);
    CHECK(d.interval.hi == 1.0);
    auto code_line = [](const std::string& text) {
        try {
            parse_samples(text);
        } catch (const Error& e) {
            return std::make_pair(e.code(), std::string(e.what()));
        }
        return std::make_pair(ErrorCode::InvalidArgument, std::string("no error"));
    };
    auto [c1, w1] = code_line("0 1\n0 2\n");
    CHECK(c1 == ErrorCode::Parse);
    CHECK(w1.find("line 2") != std::string::npos);
    auto [c2, w2] = code_line("0 1\n1 nan\n");
    CHECK(c2 == ErrorCode::Parse);
    auto [c3, w3] = code_line("# only\n\n0 1 -1\n");
    CHECK(c3 == ErrorCode::Parse);
    CHECK(w3.find("line 3") != std::string::npos);
}

TEST_CASE("histogram examples") {
    const FitData d = histogram({0.5, 0.5, 1.5, 1.5}, 2, 0.0, Interval(0.0, 2.0));
    REQUIRE(d.size() == 2);
    CHECK(d.t(0) == doctest::Approx(0.5));
    CHECK(d.t(1) == doctest::Approx(1.5));
    CHECK(d.h(0) == doctest::Approx(0.5));
    CHECK(d.h(1) == doctest::Approx(0.5));
    CHECK(d.h.sum() * 1.0 == doctest::Approx(1.0).epsilon(1e-12));
    const FitData s = histogram({2.6, 3.0}, 4, 1.6, Interval(0.0, 4.0));
    CHECK(s.h(1) > 0.0);
    CHECK(s.h(2) == 0.0);
    CHECK_THROWS_AS(histogram({5.0}, 2, 0.0, Interval(0.0, 2.0)), Error);
}

TEST_CASE("series parsing") {
    CHECK(parse_series("x\n1\n2\n") == std::vector<double>{1.0, 2.0});
    CHECK(parse_series("\"\",\"a\",\"b\"\n\"1\",3.5,7\n\"2\",1.5,9\n", "a") == std::vector<double>{3.5, 1.5});
    CHECK(parse_series("1 2\n3 4\n", "1") == std::vector<double>{2.0, 4.0});
    CHECK_THROWS_AS(parse_series("a,b\n1,2\n"), Error);
    CHECK_THROWS_AS(parse_series("a,b\n1,2\n", "c"), Error);
}

TEST_CASE("old faithful fixture") {
    const auto file = oldfaithful_file(default_data_dir());
    REQUIRE(std::filesystem::exists(file));
    const auto values = read_series(file, "eruptions");
    CHECK(values.size() == 272);
    const FitData d = ingest_series_to_histogram(file, 40, 1.6, Interval(0.0, 10.0), "eruptions");
    CHECK(d.size() == 40);
    CHECK(d.h.sum() * 0.25 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.t(0) == doctest::Approx(0.125));
    CHECK(d.h.tail(20).isZero());
    try {
        ingest_series_to_histogram("/nonexistent/faithful.csv", 40, 1.6, Interval(0.0, 10.0));
        FAIL("expected MissingFixture");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingFixture);
    }
}

TEST_CASE("analytic targets") {
    const Target w{TargetKind::Weibull, 1.0, 1.5};
    CHECK(w.pdf(1.0) == doctest::Approx(1.5 * std::exp(-1.0)));
    CHECK(w.ccdf(1.0) == doctest::Approx(std::exp(-1.0)));
    const Target p{TargetKind::Pareto};
    CHECK(p.ccdf(1.0) == doctest::Approx(0.5));
    const Target l{TargetKind::Lognormal, 1.0, 1.5, 0.0, 0.5};
    CHECK(l.ccdf(1.0) == doctest::Approx(0.5));
    CHECK(l.ccdf(0.0) == 1.0);
    const FitData g = sample_target(w, 100, Interval(0.0, 5.0), false);
    CHECK(g.size() == 100);
    CHECK(g.t(0) == 0.0);
    CHECK(g.t(99) == 5.0);
    const Target singular{TargetKind::Weibull, 1.0, 0.5};
    CHECK(sample_target(singular, 10, Interval(0.0, 1.0), false).t(0) == doctest::Approx(0.1));
    CHECK_THROWS_AS(parse_target("gamma"), Error);
}

TEST_CASE("settings files") {
    TempDir tmp;
    const auto kv = tmp.write("a.cfg", "# comment\nn = 3\n--epsilon=1e-9  # trailing\n\n");
    const Settings s = read_settings(kv);
    CHECK(s.at("n") == "3");
    CHECK(s.at("epsilon") == "1e-9");
    const auto js = tmp.write("r.json", R"({"settings": {"n": "2", "interval": "0,1"}})");
    CHECK(read_settings(js).at("interval") == "0,1");
    const auto bad = tmp.write("b.cfg", "n 3\n");
    CHECK_THROWS_AS(read_settings(bad), Error);
}

TEST_CASE("cli: fit trivial cases and report round-trip") {
    TempDir tmp;
    const auto c = tmp.write("constant.csv", "0,1\n1,1\n2,1\n");
    const auto report = (tmp.path / "r.json").string();
    CHECK(run({"fit", "--input", c.string(), "--n", "1", "--fixed-exponents", "0", "--out", report}) == kExitOk);
    nlohmann::json j = nlohmann::json::parse(std::ifstream(report));
    CHECK(j["result"]["J"].get<double>() <= 1e-9);
    CHECK(j["result"]["model"][0]["coefficients"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-4));

    const auto two = tmp.write("tworow.csv", "0 1\n1 3\n");
    const auto r1 = (tmp.path / "r1.json").string(), r2 = (tmp.path / "r2.json").string();
    const auto curve = (tmp.path / "c.csv").string();
    CHECK(run({"fit", "--input", two.string(), "--n", "1", "--fixed-exponents", "1", "--out", r1, "--curve", curve}) ==
          kExitOk);
    const nlohmann::json a = nlohmann::json::parse(std::ifstream(r1));
    const double e1 = std::exp(-1.0);
    const double alpha = (1.0 + 3.0 * e1) / (1.0 + e1 * e1);
    const double oracle = ((alpha - 1.0) * (alpha - 1.0) + (alpha * e1 - 3.0) * (alpha * e1 - 3.0)) / 2.0;
    CHECK(a["result"]["J"].get<double>() == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(a["result"]["model"][0]["coefficients"][0].get<double>() == doctest::Approx(alpha).epsilon(2e-5));
    std::ifstream cs(curve);
    std::string header;
    std::getline(cs, header);
    CHECK(header == "t,f,h,residual");

    CHECK(run({"fit", "--config", r1, "--out", r2}) == kExitOk);
    const nlohmann::json b = nlohmann::json::parse(std::ifstream(r2));
    CHECK(b["result"]["J"].get<double>() == doctest::Approx(a["result"]["J"].get<double>()).epsilon(1e-9));

    const auto neg = tmp.write("neg.csv", "0 -1\n1 -2\n");
    const auto r3 = (tmp.path / "r3.json").string();
    CHECK(run({"fit", "--input", neg.string(), "--n", "1", "--fixed-exponents", "1", "--out", r3}) == kExitOk);
    const nlohmann::json z = nlohmann::json::parse(std::ifstream(r3));
    CHECK(std::abs(z["result"]["model"][0]["coefficients"][0].get<double>()) <= 1e-6);
}

TEST_CASE("cli: ccdf fit of an exact exponential") {
    TempDir tmp;
    std::string text;
    for (int m = 0; m <= 40; ++m) text += std::to_string(0.1 * m) + " " + std::to_string(std::exp(-0.1 * m * 0.7)) + "\n";
    const auto f = tmp.write("ccdf.csv", text);
    CHECK(run({"fit-ccdf", "--input", f.string(), "--n", "1", "--fixed-exponents", "0.7"}) == kExitOk);
}

TEST_CASE("cli: check exit codes") {
    TempDir tmp;
    const auto exp1 = tmp.write("exp.txt", "1\n1 0 1\n");
    const auto sext = tmp.write("sexton.txt", "3\n0.5 0 16\n1 0 -30\n2 0 15\n");
    const auto best = tmp.write("best.txt", "3\n0.5315 0 19.91\n1.0264 0 -48.63\n1.5177 0 29.66\n");
    CHECK(run({"check", "--model", exp1.string(), "--interval", "0,10"}) == kExitOk);
    CHECK(run({"check", "--model", sext.string(), "--interval", "0,10"}) == kExitFailed);
    CHECK(run({"check", "--model", best.string(), "--interval", "0,10"}) == kExitOk);
    CHECK(run({"check", "--model", (tmp.path / "missing.txt").string(), "--interval", "0,10"}) ==
          exit_code(ErrorCode::Io));
}

TEST_CASE("cli: usage and error categories") {
    CHECK(run({}) == kExitUsage);
    CHECK(run({"fit", "--bogus"}) == kExitUsage);
    CHECK(run({"fit", "--n", "2"}) == exit_code(ErrorCode::InvalidArgument));
    CHECK(run({"reproduce", "nothing"}) == kExitUsage);
    CHECK(run({"reproduce", "oldfaithful", "--data-dir", "/nonexistent"}) == exit_code(ErrorCode::MissingFixture));
    CHECK(run({"approx", "--lambdas", "0", "--interval", "0,1"}) == kExitOk);
    CHECK(run({"approx", "--lambdas", "1", "--interval", "0,1", "--epsilon", "1e-300", "--nu-max", "0"}) ==
          exit_code(ErrorCode::NoFeasibleLength));
}
