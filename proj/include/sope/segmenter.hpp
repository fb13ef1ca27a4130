#ifndef SOPE_SEGMENTER_HPP
#define SOPE_SEGMENTER_HPP

#include "sope/onesided.hpp"
#include "sope/parallel.hpp"
#include "sope/polynomial.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sope {

/// Measured one-sided approximation errors of e^{-t} on [0, tau]:
/// entries(i, j) is the worse of the lower/upper sup errors at degree
/// nu_range[j] on [0, tau_grid[i]]. Unusable entries are +inf.
struct ErrorTable {
    std::vector<double> tau_grid;
    std::vector<int> nu_range;
    Eigen::MatrixXd entries;
    int probe_grid = kVerifyGrid;

    int nu_index(int nu) const; // throws InvalidArgument when nu is not tabulated
    double entry(std::size_t tau_index, int nu) const { return entries(static_cast<Eigen::Index>(tau_index), nu_index(nu)); }
};

inline constexpr int kTableFormatVersion = 1;

std::vector<double> default_tau_grid(); // 0.2, 0.4, ..., 10
std::vector<int> default_nu_range();    // 0..12

ErrorTable build_table(const std::vector<double>& tau_grid, const std::vector<int>& nu_range,
                       Exec exec = Exec::Parallel, int probe_grid = kVerifyGrid);

/// FNV-1a hash over the build parameters and the format version.
std::uint64_t table_hash(const std::vector<double>& tau_grid, const std::vector<int>& nu_range, int probe_grid);

void save_table(const ErrorTable& table, const std::filesystem::path& path);
ErrorTable load_table(const std::filesystem::path& path);
/// Loads `path` when its hash matches the requested parameters, otherwise
/// builds the table and writes it there.
ErrorTable load_or_build_table(const std::filesystem::path& path, const std::vector<double>& tau_grid,
                               const std::vector<int>& nu_range, Exec exec = Exec::Parallel);

/// Default-parameter table, built once per process. If SOPE_TABLE_CACHE is
/// set it names the cache file.
const ErrorTable& default_table();

/// Largest tabulated tau with T(tau, nu) < eps e^{lambda t_start}, divided by
/// lambda. Returns +inf for lambda = 0; throws NoFeasibleLength.
double lookup_length(const ErrorTable& table, double lambda, double t_start, double eps, int nu);

struct Segmentation {
    std::vector<double> endpoints;                    // t_0 < ... < t_K
    Eigen::MatrixXi degrees;                          // K x n
    std::vector<std::vector<EnvelopePair>> envelopes; // [k][i]
    double epsilon = 0.0;
    int nu_max = 0;
    std::vector<double> lambdas;

    int intervals() const noexcept { return static_cast<int>(endpoints.size()) - 1; }
    Interval interval(int k) const { return {endpoints[k], endpoints[k + 1]}; }
};

/// Endpoints and degrees only (uniform nu_max, no envelopes yet).
Segmentation split_endpoints(const std::vector<double>& lambdas, const Interval& iv, double eps, int nu_max,
                             const ErrorTable& table);

/// Lowers nu_ik for every exponent that did not decide the length of interval k.
Segmentation reduce_degrees(Segmentation seg, const ErrorTable& table);

/// Builds the envelopes and raises any degree whose measured error exceeds
/// epsilon. Throws CannotCertify if nu_max + 2 is still insufficient.
Segmentation attach_envelopes(Segmentation seg, Exec exec = Exec::Parallel);

/// split_endpoints + reduce_degrees + attach_envelopes.
Segmentation split(const std::vector<double>& lambdas, const Interval& iv, double eps, int nu_max,
                   const ErrorTable& table, Exec exec = Exec::Parallel);

} // namespace sope

#endif
