#include "report.hpp"

#include "sope/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace sope::cli {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string to_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return fmt(v.get<double>());
    return v.dump();
}

} // namespace

json model_json(const SopeModel& model) {
    json terms = json::array();
    for (const auto& term : model.terms) {
        const Polynomial p = term.p.frame().center == 0.0 ? term.p : to_frame(term.p, Frame{});
        terms.push_back({{"lambda", term.lambda}, {"coefficients", std::vector<double>(p.coeffs().begin(), p.coeffs().end())}});
    }
    return terms;
}

json make_report(const ReportInput& in, const FitResult& result) {
    require(in.data != nullptr, "report needs the fitted data");
    const FitData& d = *in.data;
    const bool unit_weights = (d.w.array() == 1.0).all();
    json report;
    report["input"] = {{"source", in.source},
                       {"M", d.size()},
                       {"interval", {d.interval.lo, d.interval.hi}},
                       {"weights", unit_weights ? "unit" : "from file"},
                       {"kind", in.ccdf ? "ccdf" : "density"}};
    report["structure"] = {{"n", in.degrees.size()}, {"degrees", in.degrees}};
    const FitConfig& c = in.config;
    report["config"] = {{"epsilon", c.epsilon},
                        {"nu_max", c.nu_max},
                        {"criterion", c.criterion == Criterion::Integral ? "integral" : "ls"},
                        {"gradient", c.gradient == GradientMode::Reduced ? "reduced" : "partial"},
                        {"solver_tol", c.solver.tol_gap},
                        {"solver_max_iters", c.solver.max_iterations},
                        {"determinism", "no random seeds; reruns with the same settings give identical results"}};
    report["settings"] = in.settings;
    if (result.segmentation) {
        const Segmentation& s = *result.segmentation;
        std::vector<std::vector<int>> deg(s.degrees.rows());
        for (Eigen::Index k = 0; k < s.degrees.rows(); ++k)
            for (Eigen::Index i = 0; i < s.degrees.cols(); ++i) deg[k].push_back(s.degrees(k, i));
        report["segmentation"] = {{"K", s.intervals()}, {"endpoints", s.endpoints}, {"degrees", deg}};
    } else {
        report["segmentation"] = nullptr;
    }
    json trace = json::array();
    for (const auto& e : result.trace) trace.push_back({{"J", e.J}, {"step", e.step}, {"lambdas", e.lambdas}});
    report["result"] = {{"J", result.J},
                        {"grid_min", result.grid_min},
                        {"model", model_json(result.model)},
                        {"trace", trace},
                        {"solves", result.stats.solves},
                        {"ipm_iterations", result.stats.iterations},
                        {"last_status", std::string(to_string(result.stats.last_status))}};
    if (in.ccdf) report["result"]["F_t0"] = sope_eval(result.model, d.interval.lo);
    report["timing"] = {{"seconds", in.seconds}};
    return report;
}

std::string curve_csv(const SopeModel& model, const FitData& data) {
    std::ostringstream os;
    os << "t,f,h,residual\n";
    const Eigen::VectorXd f = sope_eval(model, data.t);
    for (Eigen::Index m = 0; m < data.t.size(); ++m)
        os << fmt(data.t(m)) << ',' << fmt(f(m)) << ',' << fmt(data.h(m)) << ',' << fmt(f(m) - data.h(m)) << '\n';
    return os.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) fail(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorCode::Io, "cannot rename onto " + path.string());
    }
}

Settings read_settings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    Settings out;
    if (trim(text).starts_with("{")) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            fail(ErrorCode::Parse, path.string() + ": " + e.what());
        }
        if (!j.contains("settings") || !j["settings"].is_object())
            fail(ErrorCode::Parse, path.string() + ": JSON configuration needs a 'settings' object");
        for (const auto& [k, v] : j["settings"].items()) out[k] = to_text(v);
        return out;
    }
    std::istringstream lines(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(lines, raw)) {
        ++lineno;
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::Parse, path.string() + ": line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        while (key.starts_with("-")) key.erase(0, 1);
        if (key.empty()) fail(ErrorCode::Parse, path.string() + ": line " + std::to_string(lineno) + ": empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

} // namespace sope::cli
