#ifndef SOPE_ONESIDED_HPP
#define SOPE_ONESIDED_HPP

#include "sope/parallel.hpp"
#include "sope/polynomial.hpp"

#include <vector>

namespace sope {

/// Interpolation nodes on an interval. Double nodes match value and first
/// derivative; simple nodes (interval ends) match the value only.
struct NodeSet {
    std::vector<double> double_nodes;
    std::vector<double> simple_nodes;

    int degree() const noexcept {
        return 2 * static_cast<int>(double_nodes.size()) + static_cast<int>(simple_nodes.size()) - 1;
    }
};

/// `count` double nodes at the first-kind Chebyshev roots (degree 2*count-1).
NodeSet gauss_nodes(int count, const Interval& iv);
/// Both ends simple plus count-1 interior double nodes at second-kind
/// Chebyshev roots (degree 2*count-1).
NodeSet lobatto_nodes(int count, const Interval& iv);
/// Left end simple plus `interior` double nodes at the roots of the
/// third-kind Chebyshev polynomial (Jacobi(-1/2, 1/2)); degree 2*interior.
NodeSet radau_left_nodes(int interior, const Interval& iv);
/// Right end simple plus `interior` double nodes at the roots of the
/// fourth-kind Chebyshev polynomial (Jacobi(1/2, -1/2)); degree 2*interior.
NodeSet radau_right_nodes(int interior, const Interval& iv);

enum class Side { Lower, Upper };

/// Node pattern that yields a one-sided bound of e^{-lambda t} of degree nu.
/// `mirrored` swaps to the other pattern of the same parity.
NodeSet node_pattern(Side side, int nu, const Interval& iv, bool mirrored = false);

/// Hermite interpolant of e^{-lambda t} through `nodes`, returned in the
/// centered frame of `iv` (variable s = t - mid). Throws SingularSystem.
Polynomial hermite_interpolant(const NodeSet& nodes, double lambda, const Interval& iv);

struct EnvelopePair {
    Polynomial lower;
    Polynomial upper;
    double lambda = 0.0;
    Interval interval;
    int degree_lower = 0;
    int degree_upper = 0;
    double measured_sup_error = 0.0;
};

struct OneSidedCheck {
    double max_violation = 0.0;
    double sup_error = 0.0;
};

inline constexpr int kVerifyGrid = 2049;
inline constexpr double kOneSidedTolerance = 1e-12;

/// Grid check of lower <= e^{-lambda t} <= upper on `grid_size` equispaced
/// points (both ends included).
OneSidedCheck verify_one_sided(const EnvelopePair& pair, int grid_size = kVerifyGrid);

/// One-sided bound of degree nu (or up to nu+2 after retries). Throws
/// CannotCertify when no candidate passes the post-check.
Polynomial build_lower(double lambda, const Interval& iv, int nu);
Polynomial build_upper(double lambda, const Interval& iv, int nu);

/// Both sides plus the measured sup error.
EnvelopePair build_envelope(double lambda, const Interval& iv, int nu);

struct EnvelopeRequest {
    double lambda;
    Interval interval;
    int nu;
};

/// Batch construction; the parallel path must agree bitwise with the serial one.
std::vector<EnvelopePair> build_envelopes(const std::vector<EnvelopeRequest>& requests,
                                          Exec exec = Exec::Parallel);

} // namespace sope

#endif
