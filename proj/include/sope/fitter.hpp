#ifndef SOPE_FITTER_HPP
#define SOPE_FITTER_HPP

#include "sope/conicsolve.hpp"
#include "sope/parallel.hpp"
#include "sope/polynomial.hpp"
#include "sope/segmenter.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sope {

/// One term p(t) e^{-lambda t}; p is stored in raw time (frame center 0).
struct SopeTerm {
    double lambda = 0.0;
    Polynomial p;
};

/// f(t) = sum_i p_i(t) e^{-lambda_i t} with strictly increasing lambdas.
struct SopeModel {
    std::vector<SopeTerm> terms;

    static SopeModel soe(const std::vector<double>& alphas, const std::vector<double>& lambdas);

    int size() const noexcept { return static_cast<int>(terms.size()); }
    std::vector<double> lambdas() const;
    std::vector<int> degrees() const;
    bool is_soe() const noexcept;
    void validate() const; // throws InvalidArgument
};

double sope_eval(const SopeModel& model, double t);
Eigen::VectorXd sope_eval(const SopeModel& model, const Eigen::VectorXd& t);

/// Target given in closed form as a SOE, used by the integral criterion.
struct SoeTarget {
    std::vector<double> alphas;
    std::vector<double> lambdas;
};

/// Samples (t_m, h_m, w_m) and the positivity interval [t_0, t_f].
struct FitData {
    Eigen::VectorXd t;
    Eigen::VectorXd h;
    Eigen::VectorXd w;
    Interval interval;
    std::optional<SoeTarget> soe_target;

    int size() const noexcept { return static_cast<int>(t.size()); }
    void validate() const;
};

FitData make_samples(Eigen::VectorXd t, Eigen::VectorXd h, const Interval& iv);

enum class Criterion { LeastSquares, Integral };

/// Partial: derivative of the criterion at fixed coefficients. Reduced:
/// derivative of the optimal value of the convex fit, which also accounts for
/// active positivity constraints (central differences, 2n convex solves).
enum class GradientMode { Partial, Reduced };

struct SparseInitConfig {
    double lambda1 = 0.0; // 0 selects the tail estimate
    double q = 0.01;
    int N = 100;
    double beta = 5e-4;
    bool resolve_support = true;
};

struct FitConfig {
    double epsilon = 1e-8;
    int nu_max = 8;
    Criterion criterion = Criterion::LeastSquares;
    GradientMode gradient = GradientMode::Reduced;
    double fd_step = 1e-4; // relative, for GradientMode::Reduced
    double step_init = 0.0; // 0 selects 0.1 / |grad|_inf
    int step_halvings_max = 30;
    double step_min = 1e-8; // on the largest exponent move
    double improvement_tol = 1e-6;
    int improvement_window = 3;
    int max_outer_iterations = 100;
    SparseInitConfig sparse;
    SolverConfig solver;
    Exec exec = Exec::Serial;

    void validate() const;
};

struct TraceEntry {
    double J = 0.0;
    double step = 0.0;
    std::vector<double> lambdas;
};

struct SolverStats {
    int solves = 0;
    int iterations = 0;
    SolveStatus last_status = SolveStatus::Optimal;
};

struct FitResult {
    SopeModel model;
    double J = 0.0;
    std::vector<TraceEntry> trace;
    std::optional<Segmentation> segmentation;
    SolverStats stats;
    double grid_min = 0.0;
};

/// (1/M) sum w_m (f(t_m) - h_m)^2 and its gradient in the coefficients,
/// ordered term by term, ascending powers.
double criterion_ls(const SopeModel& model, const FitData& data);
Eigen::VectorXd criterion_ls_gradient_alpha(const SopeModel& model, const FitData& data);

/// Integral over [0, inf) of (f - h)^2 for SOE f and h.
double criterion_integral_soe(const std::vector<double>& alpha, const std::vector<double>& lambdas,
                              const std::vector<double>& h_alpha, const std::vector<double>& h_lambdas);
double criterion(const SopeModel& model, const FitData& data, Criterion which);

/// Gradient of the criterion in the exponents with the polynomials fixed.
Eigen::VectorXd lambda_gradient(const SopeModel& model, const FitData& data,
                                Criterion which = Criterion::LeastSquares);

double grid_min(const SopeModel& model, const Interval& iv, int points = 100000, Exec exec = Exec::Serial);

enum class Positivity { Certified, Violated, Unknown };
std::string_view to_string(Positivity p) noexcept;

struct PositivityReport {
    Positivity verdict = Positivity::Unknown;
    double witness = 0.0;    // t* for Violated
    double grid_min = 0.0;
    double margin = 0.0;     // smallest certified lower-bound minimum
    std::string diagnostic;
};

PositivityReport positivity_check(const SopeModel& model, const Interval& iv, const FitConfig& config = {});

/// Convex fit with fixed exponents; degrees[i] is the degree of p_i.
FitResult solve_sope_c(const std::vector<double>& lambdas, const std::vector<int>& degrees, const FitData& data,
                       const FitConfig& config = {});

/// f(t) = e^{-lambda1 t} sum_i alpha_i e^{-(i-1) q t}; support, when given,
/// lists the progression indices allowed to be nonzero.
FitResult arithmetic_fit(double lambda1, double q, int n, const FitData& data, const FitConfig& config = {},
                         const std::vector<int>& support = {});

struct SparseInitResult {
    std::vector<double> lambdas;
    std::vector<int> indices;
    Eigen::VectorXd alpha; // full progression coefficients
    std::optional<FitResult> resolved;
};

SparseInitResult sparse_init(const FitData& data, int n, const FitConfig& config);

/// Alternates gradient steps on the exponents with convex re-fits.
FitResult refine_exponents(const FitResult& start, const FitData& data, const FitConfig& config);

double tail_estimate_lambda1(const FitData& data, double fraction = 0.2);

/// General pipeline: sparse initialization then exponent refinement; SOPE
/// structures start from the SOE solution with the same number of terms.
FitResult solve_general(const FitData& data, const std::vector<int>& degrees, const FitConfig& config);

/// Fits F (samples of a ccdf H) with f = -F' >= 0, F(t_0) = 1, F(t_f) >= 0.
/// The returned model is F.
FitResult ccdf_fit_fixed(const std::vector<double>& lambdas, const std::vector<int>& degrees, const FitData& data,
                         const FitConfig& config = {});
FitResult ccdf_fit(const FitData& data, const std::vector<int>& degrees, const FitConfig& config);
/// -F' as a SOPE model.
SopeModel ccdf_density(const SopeModel& F);

void write_model(std::ostream& os, const SopeModel& model);
SopeModel read_model(std::istream& is);
void save_model(const SopeModel& model, const std::filesystem::path& path);
SopeModel load_model(const std::filesystem::path& path);

} // namespace sope

#endif
