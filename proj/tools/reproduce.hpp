#ifndef SOPE_TOOLS_REPRODUCE_HPP
#define SOPE_TOOLS_REPRODUCE_HPP

#include "ingest.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sope::cli {

/// A fit problem with the parameters used to reproduce a published result.
struct Example {
    std::string label;
    FitData data;
    std::vector<int> degrees;
    FitConfig config;
    bool ccdf = false;
    std::vector<double> fixed_exponents; // nonempty: convex fit only
};

Example sexton_fixed();
Example sexton_search(double q);
Example weibull_w1();
Example pareto_ccdf(int n);
Example lognormal_ccdf(int n);
Example oldfaithful(const std::filesystem::path& data_file, bool sope_structure);

std::filesystem::path default_data_dir();
std::filesystem::path oldfaithful_file(const std::filesystem::path& data_dir);

FitResult run_example(const Example& ex, Exec exec = Exec::Serial);

struct Check {
    std::string what;
    double value = 0.0;
    double lo = 0.0; // pass iff lo <= value <= hi
    double hi = 0.0;
    bool pass = false;
};

struct Reproduction {
    std::string name;
    std::vector<std::pair<std::string, FitResult>> fits;
    std::vector<Check> checks;
    double seconds = 0.0;

    bool pass() const;
};

const std::vector<std::string>& reproduction_names();

/// Runs a named reproduction. Throws MissingFixture when the data file of
/// oldfaithful is absent.
Reproduction reproduce(const std::string& name, const std::filesystem::path& data_dir, Exec exec = Exec::Serial);

} // namespace sope::cli

#endif
