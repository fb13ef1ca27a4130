#ifndef SOPE_TOOLS_REPORT_HPP
#define SOPE_TOOLS_REPORT_HPP

#include "sope/fitter.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace sope::cli {

using Settings = std::map<std::string, std::string>;

struct ReportInput {
    const FitData* data = nullptr;
    std::string source;   // file path or target description
    Settings settings;    // flags as given, echoed for reruns
    FitConfig config;
    std::vector<int> degrees;
    bool ccdf = false;
    double seconds = 0.0;
};

nlohmann::json make_report(const ReportInput& in, const FitResult& result);
nlohmann::json model_json(const SopeModel& model);

/// Header t,f,h,residual; f is the fitted function (F for ccdf fits).
std::string curve_csv(const SopeModel& model, const FitData& data);

/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Flat "key = value" text; '#' starts a comment. A JSON fit report is also
/// accepted, in which case its echoed settings are used.
Settings read_settings(const std::filesystem::path& path);

} // namespace sope::cli

#endif
