#ifndef SOPE_TOOLS_INGEST_HPP
#define SOPE_TOOLS_INGEST_HPP

#include "sope/fitter.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace sope::cli {

/// Records "t value [weight]" separated by commas, tabs or spaces. Lines that
/// start with '#' and blank lines are skipped. The interval defaults to the
/// sample span.
FitData ingest_samples(const std::filesystem::path& path, std::optional<Interval> interval = std::nullopt);
FitData parse_samples(const std::string& text, std::optional<Interval> interval = std::nullopt);

/// One observation per record. A non-numeric first line is a header; column
/// is a header name or a 0-based index and may be empty for one-column files.
std::vector<double> read_series(const std::filesystem::path& path, const std::string& column = "");
std::vector<double> parse_series(const std::string& text, const std::string& column = "");

/// Histogram with `bins` equal bins on `interval` after subtracting `shift`.
/// Densities are count / (N width) at the bin centers, so bins past the
/// largest observation are the zero padding.
FitData histogram(const std::vector<double>& values, int bins, double shift, const Interval& interval);
FitData ingest_series_to_histogram(const std::filesystem::path& path, int bins, double shift,
                                   const Interval& interval, const std::string& column = "");

enum class TargetKind { Weibull, Pareto, Lognormal };

struct Target {
    TargetKind kind = TargetKind::Weibull;
    double eta = 1.0;   // Weibull scale
    double k = 1.5;     // Weibull shape
    double mu = 0.0;    // lognormal
    double sigma = 0.5; // lognormal

    double pdf(double t) const;
    double ccdf(double t) const;
};

TargetKind parse_target(const std::string& name); // throws InvalidArgument
std::string to_string(TargetKind kind);

/// M equispaced points on [a, b] including b; t = a is dropped in favor of
/// a shifted grid when the density is unbounded there.
FitData sample_target(const Target& target, int M, const Interval& interval, bool ccdf);

/// h(t) = 16 e^{-t/2} - 30 e^{-t} + 15 e^{-2t} on [0, 10] with its closed form
/// attached for the integral criterion.
FitData sexton_data(int M = 1001);

} // namespace sope::cli

#endif
