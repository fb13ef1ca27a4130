#include "sope/onesided.hpp"

#include "sope/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sope {

namespace {

double to_time(const Interval& iv, double x) { return iv.mid() + 0.5 * iv.width() * x; }

std::vector<double> map_nodes(const Interval& iv, std::vector<double> xs) {
    for (double& x : xs) x = to_time(iv, x);
    return xs;
}

// Confluent Vandermonde system in u = s / halfwidth, solved for the scaled
// target e^{-lambda halfwidth u}; the e^{-lambda mid} factor is applied after.
std::vector<double> solve_hermite_normalized(const NodeSet& nodes, double lh, const Interval& iv) {
    const int n = nodes.degree() + 1;
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs(n);
    const double hw = 0.5 * iv.width();
    const double mid = iv.mid();
    int row = 0;
    auto value_row = [&](double u) {
        double pw = 1.0;
        for (int j = 0; j < n; ++j, pw *= u) V(row, j) = pw;
        rhs(row) = std::exp(-lh * u);
        ++row;
    };
    for (double x : nodes.double_nodes) {
        const double u = (x - mid) / hw;
        value_row(u);
        double pw = 1.0;
        for (int j = 1; j < n; ++j, pw *= u) V(row, j) = j * pw;
        rhs(row) = -lh * std::exp(-lh * u);
        ++row;
    }
    for (double x : nodes.simple_nodes) {
        double u = (x - mid) / hw;
        if (x == iv.lo) u = -1.0;
        if (x == iv.hi) u = 1.0;
        value_row(u);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
    if (!lu.isInvertible() || lu.rcond() < 1e-15)
        fail(ErrorCode::SingularSystem, "Hermite interpolation system is numerically singular");
    Eigen::VectorXd c = lu.solve(rhs);
    return {c.data(), c.data() + n};
}

} // namespace

NodeSet gauss_nodes(int count, const Interval& iv) {
    require(count >= 1, "gauss_nodes requires count >= 1");
    std::vector<double> xs;
    for (int k = 1; k <= count; ++k) xs.push_back(std::cos((2.0 * k - 1.0) * std::numbers::pi / (2.0 * count)));
    return {map_nodes(iv, std::move(xs)), {}};
}

NodeSet lobatto_nodes(int count, const Interval& iv) {
    require(count >= 1, "lobatto_nodes requires count >= 1");
    const int m = count - 1;
    std::vector<double> xs;
    for (int k = 1; k <= m; ++k) xs.push_back(std::cos(k * std::numbers::pi / (m + 1.0)));
    return {map_nodes(iv, std::move(xs)), {iv.lo, iv.hi}};
}

NodeSet radau_left_nodes(int interior, const Interval& iv) {
    require(interior >= 0, "radau_left_nodes requires interior >= 0");
    std::vector<double> xs;
    for (int k = 1; k <= interior; ++k)
        xs.push_back(std::cos((2.0 * k - 1.0) * std::numbers::pi / (2.0 * interior + 1.0)));
    return {map_nodes(iv, std::move(xs)), {iv.lo}};
}

NodeSet radau_right_nodes(int interior, const Interval& iv) {
    require(interior >= 0, "radau_right_nodes requires interior >= 0");
    std::vector<double> xs;
    for (int k = 1; k <= interior; ++k)
        xs.push_back(std::cos(2.0 * k * std::numbers::pi / (2.0 * interior + 1.0)));
    return {map_nodes(iv, std::move(xs)), {iv.hi}};
}

// The interpolation error of e^{-lambda t} has the sign of
// (-1)^{nu+1} * prod(t - node); the pattern is chosen so that product has the
// sign that puts the polynomial on the requested side.
NodeSet node_pattern(Side side, int nu, const Interval& iv, bool mirrored) {
    require(nu >= 0, "degree must be non-negative");
    if (nu % 2 == 1) {
        const int l = (nu + 1) / 2;
        const bool lower = (side == Side::Lower) != mirrored;
        return lower ? gauss_nodes(l, iv) : lobatto_nodes(l, iv);
    }
    const int m = nu / 2;
    const bool right = (side == Side::Lower) != mirrored;
    return right ? radau_right_nodes(m, iv) : radau_left_nodes(m, iv);
}

Polynomial hermite_interpolant(const NodeSet& nodes, double lambda, const Interval& iv) {
    const double hw = 0.5 * iv.width();
    const Frame frame{iv.mid(), hw};
    auto c = solve_hermite_normalized(nodes, lambda * hw, iv);
    const double scale = std::exp(-lambda * iv.mid());
    double f = scale;
    for (double& v : c) {
        v *= f;
        f /= hw;
    }
    return Polynomial(std::move(c), frame);
}

OneSidedCheck verify_one_sided(const EnvelopePair& pair, int grid_size) {
    require(grid_size >= 2, "verification grid needs at least two points");
    const Interval& iv = pair.interval;
    const double hw = 0.5 * iv.width();
    const double base = std::exp(-pair.lambda * iv.mid());
    const Polynomial lo = to_frame(pair.lower, {iv.mid(), hw});
    const Polynomial up = to_frame(pair.upper, {iv.mid(), hw});
    OneSidedCheck out;
    for (int i = 0; i < grid_size; ++i) {
        const double u = -1.0 + 2.0 * i / (grid_size - 1);
        const double s = hw * u;
        const double phi = base * std::exp(-pair.lambda * s);
        const double gl = phi - lo(s);
        const double gu = up(s) - phi;
        out.max_violation = std::max({out.max_violation, -gl, -gu});
        out.sup_error = std::max({out.sup_error, std::abs(gl), std::abs(gu)});
    }
    return out;
}

namespace {

double side_violation(const Polynomial& p, Side side, double lambda, const Interval& iv) {
    EnvelopePair probe;
    probe.lambda = lambda;
    probe.interval = iv;
    // The other side is set to the exact constant extreme so it never violates.
    if (side == Side::Lower) {
        probe.lower = p;
        probe.upper = Polynomial::constant(std::exp(-lambda * iv.lo) * 2.0 + 1.0, p.frame());
    } else {
        probe.upper = p;
        probe.lower = Polynomial::constant(-1.0, p.frame());
    }
    return verify_one_sided(probe).max_violation;
}

struct Built {
    Polynomial poly;
    int degree;
};

Built build_side(Side side, double lambda, const Interval& iv, int nu) {
    require(lambda >= 0.0, "exponent must be non-negative");
    require(nu >= 0, "degree must be non-negative");
    const Frame frame{iv.mid(), 0.5 * iv.width()};
    if (lambda == 0.0) return {Polynomial::constant(1.0, frame), nu};
    const double tol = kOneSidedTolerance * std::exp(-lambda * iv.lo);
    for (int deg = nu; deg <= nu + 2; ++deg) {
        for (bool mirrored : {false, true}) {
            if (mirrored && deg % 2 == 1) continue;
            Polynomial p;
            try {
                p = hermite_interpolant(node_pattern(side, deg, iv, mirrored), lambda, iv);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::SingularSystem) throw;
                continue;
            }
            if (side_violation(p, side, lambda, iv) <= tol) return {std::move(p), deg};
        }
    }
    fail(ErrorCode::CannotCertify, "no one-sided bound passed the grid check");
}

} // namespace

Polynomial build_lower(double lambda, const Interval& iv, int nu) {
    return build_side(Side::Lower, lambda, iv, nu).poly;
}

Polynomial build_upper(double lambda, const Interval& iv, int nu) {
    return build_side(Side::Upper, lambda, iv, nu).poly;
}

EnvelopePair build_envelope(double lambda, const Interval& iv, int nu) {
    auto lo = build_side(Side::Lower, lambda, iv, nu);
    auto up = build_side(Side::Upper, lambda, iv, nu);
    EnvelopePair pair{std::move(lo.poly), std::move(up.poly), lambda, iv, lo.degree, up.degree, 0.0};
    pair.measured_sup_error = verify_one_sided(pair).sup_error;
    return pair;
}

std::vector<EnvelopePair> build_envelopes(const std::vector<EnvelopeRequest>& requests, Exec exec) {
    std::vector<EnvelopePair> out(requests.size());
    const auto n = static_cast<long>(requests.size());
    if (exec == Exec::Serial) {
        for (long i = 0; i < n; ++i) out[i] = build_envelope(requests[i].lambda, requests[i].interval, requests[i].nu);
        return out;
    }
    // Exceptions cannot cross the parallel region; collect and rethrow.
    std::vector<std::exception_ptr> errors(requests.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        try {
            out[i] = build_envelope(requests[i].lambda, requests[i].interval, requests[i].nu);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace sope
