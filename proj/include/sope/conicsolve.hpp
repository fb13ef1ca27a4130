#ifndef SOPE_CONICSOLVE_HPP
#define SOPE_CONICSOLVE_HPP

#include "sope/psdcone.hpp"

#include <string_view>

namespace sope {

struct SolverConfig {
    int max_iterations = 100;
    double tol_gap = 1e-9;
    double tol_primal = 1e-9;
    double tol_dual = 1e-9;
    double tol_inaccurate = 1e-6;
    double step_fraction_to_boundary = 0.99;
    bool predictor_corrector = true;

    static SolverConfig high_accuracy();
    void validate() const;
};

class SolverBackend {
public:
    virtual ~SolverBackend() = default;
    virtual std::string_view name() const noexcept = 0;
    virtual ConicSolution solve(const ConicProgram& program, const SolverConfig& config) const = 0;
};

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling
/// and Mehrotra predictor-corrector steps. The user program is dualized so
/// that its free variables become equality multipliers; the Newton system is
/// reduced to a dense quasi-definite system and solved by LU with iterative
/// refinement.
class InteriorPointSolver final : public SolverBackend {
public:
    std::string_view name() const noexcept override { return "hsd-ipm"; }
    ConicSolution solve(const ConicProgram& program, const SolverConfig& config) const override;
};

ConicSolution solve(const ConicProgram& program, const SolverConfig& config = {});

/// Absolute residuals recomputed from scratch: primal = |Ax-b| + cone
/// violation of x, dual = |c - A'y - s| + |s_free| + cone violation of s,
/// gap = |c'x - b'y|.
Residuals kkt_residuals(const ConicProgram& program, const ConicSolution& solution);

/// Smallest "eigenvalue" of v with respect to block `blk` (min entry,
/// t - |x|, or min matrix eigenvalue; -inf never, +inf for free blocks).
double cone_min_eig(const ConeBlock& blk, const Eigen::Ref<const Eigen::VectorXd>& v);

} // namespace sope

#endif
