#include "sope/fitter.hpp"

#include "sope/error.hpp"
#include "sope/log.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sope {

SopeModel SopeModel::soe(const std::vector<double>& alphas, const std::vector<double>& lambdas) {
    require(alphas.size() == lambdas.size(), "one coefficient per exponent");
    SopeModel m;
    for (std::size_t i = 0; i < alphas.size(); ++i) m.terms.push_back({lambdas[i], Polynomial({alphas[i]}, Frame{})});
    return m;
}

std::vector<double> SopeModel::lambdas() const {
    std::vector<double> out;
    for (const auto& t : terms) out.push_back(t.lambda);
    return out;
}

std::vector<int> SopeModel::degrees() const {
    std::vector<int> out;
    for (const auto& t : terms) out.push_back(std::max(0, t.p.degree()));
    return out;
}

bool SopeModel::is_soe() const noexcept {
    return std::all_of(terms.begin(), terms.end(), [](const SopeTerm& t) { return t.p.degree() <= 0; });
}

void SopeModel::validate() const {
    require(!terms.empty(), "model needs at least one term");
    for (std::size_t i = 0; i < terms.size(); ++i) {
        require(std::isfinite(terms[i].lambda) && terms[i].lambda >= 0.0, "exponents must be finite and non-negative");
        if (i > 0) require(terms[i].lambda > terms[i - 1].lambda, "exponents must be strictly increasing");
        for (double c : terms[i].p.coeffs()) require(std::isfinite(c), "coefficients must be finite");
    }
}

double sope_eval(const SopeModel& model, double t) {
    double acc = 0.0;
    for (const auto& term : model.terms) acc += term.p.at_time(t) * std::exp(-term.lambda * t);
    return acc;
}

Eigen::VectorXd sope_eval(const SopeModel& model, const Eigen::VectorXd& t) {
    Eigen::VectorXd out(t.size());
    for (Eigen::Index m = 0; m < t.size(); ++m) out(m) = sope_eval(model, t(m));
    return out;
}

void FitData::validate() const {
    require(t.size() >= 1, "at least one sample is required");
    require(h.size() == t.size() && w.size() == t.size(), "sample columns must have equal length");
    for (Eigen::Index m = 0; m < t.size(); ++m) {
        require(std::isfinite(t(m)) && std::isfinite(h(m)), "samples must be finite");
        require(w(m) > 0.0 && std::isfinite(w(m)), "weights must be positive");
        require(t(m) >= interval.lo - 1e-12 && t(m) <= interval.hi + 1e-12, "sample times must lie in the interval");
    }
}

FitData make_samples(Eigen::VectorXd t, Eigen::VectorXd h, const Interval& iv) {
    FitData d;
    d.w = Eigen::VectorXd::Ones(t.size());
    d.t = std::move(t);
    d.h = std::move(h);
    d.interval = iv;
    d.validate();
    return d;
}

void FitConfig::validate() const {
    require(epsilon > 0.0, "epsilon must be positive");
    require(nu_max >= 0, "nu_max must be non-negative");
    require(step_init >= 0.0, "step_init must be non-negative");
    require(step_halvings_max >= 0 && max_outer_iterations >= 0, "iteration limits must be non-negative");
    require(fd_step > 0.0, "fd_step must be positive");
    require(step_min > 0.0 && improvement_tol >= 0.0 && improvement_window >= 1, "invalid stopping rule");
    require(sparse.q > 0.0 && sparse.N >= 0 && sparse.beta >= 0.0 && sparse.lambda1 >= 0.0, "invalid sparse init block");
    solver.validate();
}

// ---------------------------------------------------------------- criteria

double criterion_ls(const SopeModel& model, const FitData& data) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < data.t.size(); ++m) {
        const double r = sope_eval(model, data.t(m)) - data.h(m);
        acc += data.w(m) * r * r;
    }
    return acc / static_cast<double>(data.t.size());
}

Eigen::VectorXd criterion_ls_gradient_alpha(const SopeModel& model, const FitData& data) {
    int total = 0;
    for (int d : model.degrees()) total += d + 1;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(total);
    const double M = static_cast<double>(data.t.size());
    for (Eigen::Index m = 0; m < data.t.size(); ++m) {
        const double t = data.t(m);
        const double r = 2.0 * data.w(m) * (sope_eval(model, t) - data.h(m)) / M;
        int k = 0;
        for (const auto& term : model.terms) {
            const double e = std::exp(-term.lambda * t);
            // Coefficients refer to the polynomial's own frame variable.
            const double s = t - term.p.frame().center;
            double pw = 1.0;
            for (int j = 0; j <= std::max(0, term.p.degree()); ++j, pw *= s) g(k++) += r * pw * e;
        }
    }
    return g;
}

namespace {

constexpr double kCollision = 1e-12;

bool usable(SolveStatus s) { return s == SolveStatus::Optimal || s == SolveStatus::OptimalInaccurate; }

struct Merged {
    std::vector<double> lambdas;
    std::vector<double> coeffs;
};

// Combines exactly repeated exponents; near-coincident distinct ones are rejected.
Merged merge_exponents(const std::vector<double>& a, const std::vector<double>& la, const std::vector<double>& b,
                       const std::vector<double>& lb) {
    std::vector<std::pair<double, double>> all;
    for (std::size_t i = 0; i < la.size(); ++i) all.emplace_back(la[i], a[i]);
    for (std::size_t i = 0; i < lb.size(); ++i) all.emplace_back(lb[i], -b[i]);
    std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    Merged out;
    for (const auto& [l, c] : all) {
        require(l > 0.0, "the integral criterion needs positive exponents");
        if (!out.lambdas.empty() && l == out.lambdas.back()) {
            out.coeffs.back() += c;
            continue;
        }
        if (!out.lambdas.empty() && l - out.lambdas.back() < kCollision)
            fail(ErrorCode::ExponentCollision, "exponents coincide within 1e-12");
        out.lambdas.push_back(l);
        out.coeffs.push_back(c);
    }
    return out;
}

Eigen::MatrixXd gram(const std::vector<double>& l) {
    const auto n = static_cast<Eigen::Index>(l.size());
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) G(i, j) = 1.0 / (l[i] + l[j]);
    return G;
}

const SoeTarget& integral_target(const FitData& data) {
    if (!data.soe_target) fail(ErrorCode::InvalidArgument, "the integral criterion needs a SOE target");
    return *data.soe_target;
}

std::vector<double> soe_alphas(const SopeModel& model) {
    require(model.is_soe(), "the integral criterion is implemented for SOE models only");
    std::vector<double> a;
    for (const auto& t : model.terms) a.push_back(t.p.coeff(0));
    return a;
}

} // namespace

double criterion_integral_soe(const std::vector<double>& alpha, const std::vector<double>& lambdas,
                              const std::vector<double>& h_alpha, const std::vector<double>& h_lambdas) {
    require(alpha.size() == lambdas.size() && h_alpha.size() == h_lambdas.size(), "one coefficient per exponent");
    const Merged mg = merge_exponents(alpha, lambdas, h_alpha, h_lambdas);
    const Eigen::Map<const Eigen::VectorXd> d(mg.coeffs.data(), static_cast<Eigen::Index>(mg.coeffs.size()));
    return d.dot(gram(mg.lambdas) * d);
}

double criterion(const SopeModel& model, const FitData& data, Criterion which) {
    if (which == Criterion::LeastSquares) return criterion_ls(model, data);
    const auto& h = integral_target(data);
    return criterion_integral_soe(soe_alphas(model), model.lambdas(), h.alphas, h.lambdas);
}

Eigen::VectorXd lambda_gradient(const SopeModel& model, const FitData& data, Criterion which) {
    const int n = model.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    if (which == Criterion::LeastSquares) {
        const double M = static_cast<double>(data.t.size());
        for (Eigen::Index m = 0; m < data.t.size(); ++m) {
            const double t = data.t(m);
            const double r = data.w(m) * (sope_eval(model, t) - data.h(m));
            for (int i = 0; i < n; ++i) {
                const auto& term = model.terms[i];
                g(i) -= 2.0 / M * t * term.p.at_time(t) * r * std::exp(-term.lambda * t);
            }
        }
        return g;
    }
    const auto& h = integral_target(data);
    const auto a = soe_alphas(model);
    const auto l = model.lambdas();
    // d/dlambda_i of d'Gd with G_jk = 1/(L_j + L_k) over the unmerged list.
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += a[k] / ((l[i] + l[k]) * (l[i] + l[k]));
        for (std::size_t k = 0; k < h.lambdas.size(); ++k)
            acc -= h.alphas[k] / ((l[i] + h.lambdas[k]) * (l[i] + h.lambdas[k]));
        g(i) = -2.0 * a[i] * acc;
    }
    return g;
}

double grid_min(const SopeModel& model, const Interval& iv, int points, Exec exec) {
    require(points >= 2, "grid needs at least two points");
    const double step = iv.width() / (points - 1);
    double best = std::numeric_limits<double>::infinity();
    if (exec == Exec::Serial) {
        for (int m = 0; m < points; ++m) best = std::min(best, sope_eval(model, iv.lo + step * m));
        return best;
    }
#pragma omp parallel for reduction(min : best) schedule(static)
    for (int m = 0; m < points; ++m) best = std::min(best, sope_eval(model, iv.lo + step * m));
    return best;
}

namespace {

int argmin_on_grid(const SopeModel& model, const Interval& iv, int points, double* value) {
    const double step = iv.width() / (points - 1);
    int arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int m = 0; m < points; ++m) {
        const double v = sope_eval(model, iv.lo + step * m);
        if (v < best) {
            best = v;
            arg = m;
        }
    }
    *value = best;
    return arg;
}

// ---------------------------------------------------------------- program assembly

using Coeffs = std::vector<VarRef>;

AffinePolynomial raw_poly(const Coeffs& v) {
    std::vector<LinearExpr> c;
    for (const auto& r : v) c.push_back(r.expr());
    return AffinePolynomial(std::move(c), Frame{});
}

// P_k = sum (p_i - g_ik) upper_ik + g_ik lower_ik >= 0 with p_i - g_ik <= 0,
// g_ik >= 0 on every sub-interval; g_ik has the degree of p_i.
void add_envelope_positivity(ProgramBuilder& b, const std::vector<AffinePolynomial>& ps, const Segmentation& seg) {
    const double lmin = *std::min_element(seg.lambdas.begin(), seg.lambdas.end());
    for (int k = 0; k < seg.intervals(); ++k) {
        const Interval iv = seg.interval(k);
        const Frame fr = seg.envelopes[k][0].upper.frame();
        AffinePolynomial P(std::vector<LinearExpr>{}, fr);
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto& env = seg.envelopes[k][i];
            const AffinePolynomial pk = ps[i].to_frame(fr);
            const int deg = std::max(0, pk.degree());
            AffinePolynomial g;
            if (deg == 0) {
                g = AffinePolynomial({b.add_nonneg("gamma").expr()}, fr);
            } else {
                g = AffinePolynomial(std::vector<LinearExpr>{}, fr);
                for (int j = 0; j <= deg; ++j) g.coeff(j) = b.add_free("gamma").expr();
                nonneg_on_interval(b, g, iv);
            }
            AffinePolynomial neg = pk;
            neg -= g;
            nonpos_on_interval(b, neg, iv);
            P += neg.times(env.upper);
            P += g.times(env.lower);
        }
        // Positive rescaling keeps late sub-intervals at unit magnitude.
        P *= std::exp(lmin * fr.center);
        nonneg_on_interval(b, P, iv);
    }
}

std::vector<LsqRow> ls_rows(const FitData& data, const std::vector<double>& lambdas, const std::vector<Coeffs>& vars) {
    std::vector<LsqRow> rows;
    for (Eigen::Index m = 0; m < data.t.size(); ++m) {
        const double t = data.t(m);
        LsqRow row;
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            const double e = std::exp(-lambdas[i] * t);
            double pw = 1.0;
            for (const auto& v : vars[i]) {
                row.residual += LinearExpr::var(v.index, pw * e);
                pw *= t;
            }
        }
        row.residual.compress();
        row.target = data.h(m);
        row.weight = data.w(m);
        rows.push_back(std::move(row));
    }
    return rows;
}

// |R d|^2 = d'Gd with d the merged signed coefficient vector.
std::vector<LsqRow> integral_rows(const FitData& data, const std::vector<double>& lambdas,
                                  const std::vector<LinearExpr>& alphas) {
    const auto& h = integral_target(data);
    std::vector<std::pair<double, LinearExpr>> all;
    for (std::size_t i = 0; i < lambdas.size(); ++i) all.emplace_back(lambdas[i], alphas[i]);
    for (std::size_t i = 0; i < h.lambdas.size(); ++i) all.emplace_back(h.lambdas[i], LinearExpr(-h.alphas[i]));
    std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<double> L;
    std::vector<LinearExpr> d;
    for (auto& [l, e] : all) {
        require(l > 0.0, "the integral criterion needs positive exponents");
        if (!L.empty() && l == L.back()) {
            d.back() += e;
            continue;
        }
        if (!L.empty() && l - L.back() < kCollision) fail(ErrorCode::ExponentCollision, "exponents coincide within 1e-12");
        L.push_back(l);
        d.push_back(e);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram(L));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    std::vector<LsqRow> rows;
    for (Eigen::Index r = 0; r < ev.size(); ++r) {
        if (ev(r) <= top * 1e-16) continue;
        LsqRow row;
        const double s = std::sqrt(ev(r));
        for (std::size_t j = 0; j < d.size(); ++j) row.residual += (s * es.eigenvectors()(static_cast<Eigen::Index>(j), r)) * d[j];
        row.residual.compress();
        rows.push_back(std::move(row));
    }
    for (auto& row : rows) row.weight = static_cast<double>(rows.size());
    return rows;
}

void add_objective(ProgramBuilder& b, const FitData& data, const FitConfig& cfg, const std::vector<double>& lambdas,
                   const std::vector<Coeffs>& vars) {
    if (cfg.criterion == Criterion::LeastSquares) {
        lsq_epigraph(b, ls_rows(data, lambdas, vars));
        return;
    }
    std::vector<LinearExpr> alphas;
    for (const auto& v : vars) {
        require(v.size() == 1, "the integral criterion is implemented for SOE models only");
        alphas.push_back(v[0].expr());
    }
    lsq_epigraph(b, integral_rows(data, lambdas, alphas));
}

ConicSolution run(const ConicProgram& prog, const FitConfig& cfg, SolverStats& stats) {
    ConicSolution sol = solve(prog, cfg.solver);
    stats.solves += 1;
    stats.iterations += sol.iterations;
    stats.last_status = sol.status;
    if (sol.status == SolveStatus::PrimalInfeasible)
        fail(ErrorCode::Infeasible, "the fitting program is infeasible");
    if (sol.status == SolveStatus::DualInfeasible) fail(ErrorCode::SolverFailure, "the fitting program is unbounded");
    return sol;
}

Polynomial extract(const Coeffs& v, const Eigen::VectorXd& x) {
    std::vector<double> c;
    for (const auto& r : v) c.push_back(x(r.index));
    return Polynomial(std::move(c), Frame{});
}

void check_lambdas(const std::vector<double>& lambdas, const std::vector<int>& degrees) {
    require(!lambdas.empty(), "at least one exponent is required");
    require(lambdas.size() == degrees.size(), "one degree per exponent");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        require(std::isfinite(lambdas[i]) && lambdas[i] >= 0.0, "exponents must be finite and non-negative");
        require(degrees[i] >= 0, "degrees must be non-negative");
        if (i > 0) require(lambdas[i] > lambdas[i - 1], "exponents must be strictly increasing");
    }
}

void finish(FitResult& r, const FitData& data, const FitConfig& cfg) {
    r.J = criterion(r.model, data, cfg.criterion);
    r.grid_min = grid_min(r.model, data.interval, 100000, cfg.exec);
}

} // namespace

// ---------------------------------------------------------------- positivity

std::string_view to_string(Positivity p) noexcept {
    switch (p) {
    case Positivity::Certified: return "Certified";
    case Positivity::Violated: return "Violated";
    case Positivity::Unknown: return "Unknown";
    }
    return "?";
}

namespace {

// Largest m with p - m >= 0 on iv, reduced by the l1 norm of the certificate
// residual so that p >= returned value holds for the computed Gram matrices.
double certified_minimum(const Polynomial& p, const Interval& iv, const SolverConfig& solver, std::string& diag) {
    if (p.is_zero()) return 0.0;
    double mag = 0.0;
    for (double c : p.coeffs()) mag = std::max(mag, std::abs(c));
    ProgramBuilder b;
    auto m = b.add_free("margin");
    AffinePolynomial ap = AffinePolynomial::constant(scale(p, 1.0 / mag));
    ap.coeff(0) -= m.expr();
    nonneg_on_interval(b, ap, iv);
    b.add_objective(-1.0 * m.expr());
    const ConicProgram prog = b.build();
    const ConicSolution sol = solve(prog, solver);
    if (!usable(sol.status)) {
        diag = "certificate solve ended with status " + std::string(to_string(sol.status));
        return -std::numeric_limits<double>::infinity();
    }
    const double resid = (prog.A * sol.x - prog.b).lpNorm<1>();
    return (sol.x(m.index) - resid) * mag;
}

} // namespace

PositivityReport positivity_check(const SopeModel& model, const Interval& iv, const FitConfig& config) {
    model.validate();
    PositivityReport rep;
    double gmin = 0.0;
    const int points = 100000;
    const int arg = argmin_on_grid(model, iv, points, &gmin);
    rep.grid_min = gmin;
    if (gmin < 0.0) {
        rep.verdict = Positivity::Violated;
        rep.witness = iv.lo + iv.width() / (points - 1) * arg;
        return rep;
    }
    Segmentation seg;
    try {
        seg = split(model.lambdas(), iv, config.epsilon, config.nu_max, default_table(), config.exec);
    } catch (const Error& e) {
        rep.diagnostic = e.what();
        return rep;
    }
    rep.margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < seg.intervals(); ++k) {
        const Interval sub = seg.interval(k);
        const Frame fr = seg.envelopes[k][0].upper.frame();
        std::vector<Polynomial> local;
        std::vector<double> cuts{sub.lo, sub.hi};
        for (const auto& term : model.terms) {
            local.push_back(to_frame(term.p, fr));
            for (double r : real_roots(term.p.with_frame(Frame{0.0, 1.0}))) {
                const double t = r + term.p.frame().center;
                if (t > sub.lo && t < sub.hi) cuts.push_back(t);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            if (cuts[c + 1] - cuts[c] <= 1e-14 * std::max(1.0, std::abs(cuts[c]))) continue;
            const Interval piece(cuts[c], cuts[c + 1]);
            const double probe = piece.mid();
            Polynomial P(std::vector<double>{}, fr);
            for (std::size_t i = 0; i < local.size(); ++i) {
                const auto& env = seg.envelopes[k][i];
                const bool nonneg = local[i].is_zero() || model.terms[i].p.at_time(probe) >= 0.0;
                P = P + local[i] * (nonneg ? env.lower : env.upper);
            }
            std::string diag;
            const double mk = certified_minimum(P, piece, config.solver, diag);
            rep.margin = std::min(rep.margin, mk);
            if (!(mk >= 0.0)) {
                rep.verdict = Positivity::Unknown;
                char buf[160];
                std::snprintf(buf, sizeof buf, "lower bound not certified on [%.6g, %.6g] (bound %.3g)", piece.lo,
                              piece.hi, mk);
                rep.diagnostic = diag.empty() ? std::string(buf) : diag;
                return rep;
            }
        }
    }
    rep.verdict = Positivity::Certified;
    return rep;
}

// ---------------------------------------------------------------- convex fits

FitResult solve_sope_c(const std::vector<double>& lambdas, const std::vector<int>& degrees, const FitData& data,
                       const FitConfig& config) {
    config.validate();
    data.validate();
    check_lambdas(lambdas, degrees);
    FitResult res;
    res.segmentation = split(lambdas, data.interval, config.epsilon, config.nu_max, default_table(), config.exec);
    ProgramBuilder b;
    std::vector<Coeffs> vars;
    std::vector<AffinePolynomial> ps;
    for (int d : degrees) {
        vars.push_back(b.add_free(d + 1, "alpha"));
        ps.push_back(raw_poly(vars.back()));
    }
    add_envelope_positivity(b, ps, *res.segmentation);
    add_objective(b, data, config, lambdas, vars);
    const ConicSolution sol = run(b.build(), config, res.stats);
    for (std::size_t i = 0; i < lambdas.size(); ++i) res.model.terms.push_back({lambdas[i], extract(vars[i], sol.x)});
    finish(res, data, config);
    return res;
}

SopeModel ccdf_density(const SopeModel& F) {
    SopeModel f;
    for (const auto& term : F.terms) {
        const Polynomial& r = term.p;
        f.terms.push_back({term.lambda, sub(scale(r, term.lambda), derivative(r))});
    }
    return f;
}

namespace {

// Linear constraints F(t_0) = 1 and F(t_f) >= 0 for F = sum r_i e^{-lambda_i t}.
void add_ccdf_boundary(ProgramBuilder& b, const std::vector<double>& lambdas, const std::vector<Coeffs>& vars,
                       const Interval& iv) {
    for (int side = 0; side < 2; ++side) {
        const double t = side == 0 ? iv.lo : iv.hi;
        LinearExpr F;
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            const double e = std::exp(-lambdas[i] * t);
            double pw = 1.0;
            for (const auto& v : vars[i]) {
                F += LinearExpr::var(v.index, pw * e);
                pw *= t;
            }
        }
        if (side == 0) {
            F -= 1.0;
            b.add_equality(F);
        } else {
            b.add_equality(F - b.add_nonneg("F_end").expr());
        }
    }
}

AffinePolynomial density_poly(const Coeffs& r, double lambda) {
    // lambda r(t) - r'(t)
    std::vector<LinearExpr> c(r.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
        c[j] += lambda * r[j].expr();
        if (j + 1 < r.size()) c[j] -= static_cast<double>(j + 1) * r[j + 1].expr();
    }
    return AffinePolynomial(std::move(c), Frame{});
}

} // namespace

FitResult ccdf_fit_fixed(const std::vector<double>& lambdas, const std::vector<int>& degrees, const FitData& data,
                         const FitConfig& config) {
    config.validate();
    data.validate();
    check_lambdas(lambdas, degrees);
    require(config.criterion == Criterion::LeastSquares, "ccdf fits use the least-squares criterion");
    FitResult res;
    res.segmentation = split(lambdas, data.interval, config.epsilon, config.nu_max, default_table(), config.exec);
    ProgramBuilder b;
    std::vector<Coeffs> vars;
    std::vector<AffinePolynomial> ps;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        vars.push_back(b.add_free(degrees[i] + 1, "r"));
        ps.push_back(density_poly(vars.back(), lambdas[i]));
    }
    add_envelope_positivity(b, ps, *res.segmentation);
    add_ccdf_boundary(b, lambdas, vars, data.interval);
    add_objective(b, data, config, lambdas, vars);
    const ConicSolution sol = run(b.build(), config, res.stats);
    for (std::size_t i = 0; i < lambdas.size(); ++i) res.model.terms.push_back({lambdas[i], extract(vars[i], sol.x)});
    res.J = criterion_ls(res.model, data);
    res.grid_min = grid_min(ccdf_density(res.model), data.interval, 100000, config.exec);
    return res;
}

namespace {

struct ProgressionFit {
    Eigen::VectorXd alpha; // over the progression indices
    FitResult result;
};

// Exact fit on exponents lambda1 + q*j for j in indices, positivity imposed on
// sum_j c_j x^j over x = e^{-qt} in [e^{-q t_f}, e^{-q t_0}].
ProgressionFit progression_fit(double lambda1, double q, const std::vector<int>& indices, const FitData& data,
                               const FitConfig& cfg, bool ccdf, double beta) {
    require(q > 0.0, "progression ratio must be positive");
    require(lambda1 >= 0.0, "first exponent must be non-negative");
    require(!indices.empty(), "progression support is empty");
    const double x_lo = std::exp(-q * data.interval.hi);
    const double x_hi = std::exp(-q * data.interval.lo);
    ProgramBuilder b;
    std::vector<double> lambdas;
    std::vector<Coeffs> vars;
    const int top = *std::max_element(indices.begin(), indices.end());
    AffinePolynomial px(std::vector<LinearExpr>(static_cast<std::size_t>(top) + 1), Frame{});
    // The common factor e^{-lambda1 t_0} scales the x-polynomial; dropping it keeps
    // the certificate at unit magnitude.
    for (int j : indices) {
        const double l = lambda1 + q * j;
        lambdas.push_back(l);
        vars.push_back({b.add_free("alpha")});
        px.coeff(j) += (ccdf ? l : 1.0) * vars.back()[0].expr();
    }
    nonneg_on_interval(b, px, Interval(x_lo, x_hi));
    if (ccdf) add_ccdf_boundary(b, lambdas, vars, data.interval);
    if (cfg.criterion == Criterion::Integral) {
        std::vector<LinearExpr> a;
        for (const auto& v : vars) a.push_back(v[0].expr());
        lsq_epigraph(b, integral_rows(data, lambdas, a));
    } else {
        lsq_epigraph(b, ls_rows(data, lambdas, vars));
    }
    if (beta > 0.0) {
        std::vector<LinearExpr> a;
        std::vector<double> w;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            a.push_back(vars[i][0].expr());
            w.push_back(1.0 / std::max(lambdas[i], q));
        }
        l1_penalty(b, a, w, beta);
    }
    ProgressionFit out;
    const ConicSolution sol = run(b.build(), cfg, out.result.stats);
    out.alpha = Eigen::VectorXd::Zero(top + 1);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double a = sol.x(vars[i][0].index);
        out.alpha(indices[i]) = a;
        out.result.model.terms.push_back({lambdas[i], Polynomial({a}, Frame{})});
    }
    if (ccdf) {
        out.result.J = criterion_ls(out.result.model, data);
        out.result.grid_min = grid_min(ccdf_density(out.result.model), data.interval, 100000, cfg.exec);
    } else {
        finish(out.result, data, cfg);
    }
    return out;
}

std::vector<int> full_support(int n) {
    std::vector<int> s(static_cast<std::size_t>(n));
    std::iota(s.begin(), s.end(), 0);
    return s;
}

} // namespace

FitResult arithmetic_fit(double lambda1, double q, int n, const FitData& data, const FitConfig& config,
                         const std::vector<int>& support) {
    config.validate();
    data.validate();
    require(n >= 1, "n must be positive");
    std::vector<int> idx = support.empty() ? full_support(n) : support;
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    for (int j : idx) require(j >= 0 && j < n, "support index out of range");
    return progression_fit(lambda1, q, idx, data, config, false, 0.0).result;
}

double tail_estimate_lambda1(const FitData& data, double fraction) {
    require(fraction > 0.0 && fraction <= 1.0, "tail fraction must lie in (0, 1]");
    std::vector<std::pair<double, double>> pos;
    for (Eigen::Index m = 0; m < data.t.size(); ++m)
        if (data.h(m) > 0.0) pos.emplace_back(data.t(m), std::log(data.h(m)));
    if (pos.size() < 5) fail(ErrorCode::TailUnusable, "fewer than five positive samples in the tail");
    std::sort(pos.begin(), pos.end());
    const auto take = std::max<std::size_t>(5, static_cast<std::size_t>(std::ceil(fraction * pos.size())));
    const std::size_t first = pos.size() - std::min(take, pos.size());
    Eigen::MatrixXd X(static_cast<Eigen::Index>(pos.size() - first), 2);
    Eigen::VectorXd y(X.rows());
    for (std::size_t i = first; i < pos.size(); ++i) {
        X(static_cast<Eigen::Index>(i - first), 0) = 1.0;
        X(static_cast<Eigen::Index>(i - first), 1) = pos[i].first;
        y(static_cast<Eigen::Index>(i - first)) = pos[i].second;
    }
    const Eigen::Vector2d beta = X.colPivHouseholderQr().solve(y);
    const double lambda = -beta(1);
    if (!std::isfinite(lambda) || lambda <= 0.0) fail(ErrorCode::TailUnusable, "tail does not decay");
    return lambda;
}

namespace {

enum class Kind { Density, Ccdf };

FitResult fixed_fit(Kind kind, const std::vector<double>& lambdas, const std::vector<int>& degrees, const FitData& data,
                    const FitConfig& cfg) {
    return kind == Kind::Ccdf ? ccdf_fit_fixed(lambdas, degrees, data, cfg) : solve_sope_c(lambdas, degrees, data, cfg);
}

SparseInitResult sparse_init_impl(const FitData& data, int n, const FitConfig& cfg, Kind kind) {
    cfg.validate();
    data.validate();
    const auto& sp = cfg.sparse;
    require(n >= 1 && sp.N + 1 >= n, "the progression must have at least n terms");
    const double lambda1 = sp.lambda1 > 0.0 ? sp.lambda1 : tail_estimate_lambda1(data);
    const ProgressionFit pf =
        progression_fit(lambda1, sp.q, full_support(sp.N + 1), data, cfg, kind == Kind::Ccdf, sp.beta);
    std::vector<int> order = full_support(sp.N + 1);
    std::vector<double> mag(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        mag[i] = std::abs(pf.alpha(static_cast<Eigen::Index>(i))) / std::max(lambda1 + sp.q * i, sp.q);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mag[a] > mag[b]; });
    if (mag[order[0]] <= 1e-12) fail(ErrorCode::DegenerateSelection, "no significant coefficient in the sparse fit");
    SparseInitResult out;
    out.indices.assign(order.begin(), order.begin() + n);
    std::sort(out.indices.begin(), out.indices.end());
    for (int j : out.indices) out.lambdas.push_back(lambda1 + sp.q * j);
    out.alpha = pf.alpha;
    if (sp.resolve_support) {
        out.resolved = fixed_fit(kind, out.lambdas, std::vector<int>(out.lambdas.size(), 0), data, cfg);
        out.resolved->stats.solves += pf.result.stats.solves;
        out.resolved->stats.iterations += pf.result.stats.iterations;
    }
    return out;
}

bool ordered_positive(const std::vector<double>& l) {
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (!(l[i] > 0.0)) return false;
        if (i > 0 && l[i] - l[i - 1] <= 1e-9 * std::max(1.0, l[i])) return false;
    }
    return true;
}

// Central differences of the optimal criterion of the convex subproblem,
// one-sided next to the positivity and ordering limits.
Eigen::VectorXd reduced_gradient(const FitResult& at, const FitData& data, const FitConfig& cfg, Kind kind,
                                 SolverStats& stats) {
    const std::vector<double> lam = at.model.lambdas();
    const std::vector<int> degrees = at.model.degrees();
    const auto n = static_cast<Eigen::Index>(lam.size());
    Eigen::VectorXd g(n);
    auto one = [&](Eigen::Index i, SolverStats& st) {
        auto value = [&](const std::vector<double>& l) {
            FitResult r = fixed_fit(kind, l, degrees, data, cfg);
            st.solves += r.stats.solves;
            st.iterations += r.stats.iterations;
            if (!usable(r.stats.last_status)) fail(ErrorCode::SolverFailure, "difference solve did not converge");
            return r.J;
        };
        const double h = cfg.fd_step * std::max(1.0, lam[i]);
        std::vector<double> lp = lam, lm = lam;
        lp[i] += h;
        lm[i] -= h;
        const bool up = ordered_positive(lp), down = ordered_positive(lm);
        if (up && down) return (value(lp) - value(lm)) / (2.0 * h);
        if (up) return (value(lp) - at.J) / h;
        if (down) return (at.J - value(lm)) / h;
        return 0.0;
    };
    std::vector<SolverStats> per(n);
    if (cfg.exec == Exec::Serial) {
        for (Eigen::Index i = 0; i < n; ++i) g(i) = one(i, per[i]);
    } else {
        std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
        for (Eigen::Index i = 0; i < n; ++i) {
            try {
                g(i) = one(i, per[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    for (const auto& st : per) {
        stats.solves += st.solves;
        stats.iterations += st.iterations;
    }
    return g;
}

FitResult refine_impl(const FitResult& start, const FitData& data, const FitConfig& cfg, Kind kind) {
    cfg.validate();
    FitResult best = start;
    const std::vector<int> degrees = start.model.degrees();
    const Criterion crit = kind == Kind::Ccdf ? Criterion::LeastSquares : cfg.criterion;
    std::vector<double> lam = start.model.lambdas();
    auto gradient = [&]() -> Eigen::VectorXd {
        if (cfg.gradient == GradientMode::Reduced) {
            try {
                return reduced_gradient(best, data, cfg, kind, best.stats);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::SolverFailure && e.code() != ErrorCode::Infeasible &&
                    e.code() != ErrorCode::CannotCertify)
                    throw;
            }
        }
        return lambda_gradient(best.model, data, crit);
    };
    Eigen::VectorXd g = gradient();
    double gmax = g.lpNorm<Eigen::Infinity>();
    double step = cfg.step_init > 0.0 ? cfg.step_init : (gmax > 0.0 ? 0.1 / gmax : 0.0);
    std::vector<double> history{best.J};
    best.trace.push_back({best.J, step, lam});
    int slow = 0;
    for (int iter = 0; iter < cfg.max_outer_iterations && gmax > 0.0; ++iter) {
        bool accepted = false;
        for (int halving = 0; halving <= cfg.step_halvings_max && slow < 3; ++halving) {
            std::vector<double> cand(lam.size());
            auto propose = [&]() {
                for (std::size_t i = 0; i < lam.size(); ++i) cand[i] = lam[i] - step * g(static_cast<Eigen::Index>(i));
                return ordered_positive(cand);
            };
            while (!propose() && step * gmax >= cfg.step_min) step *= 0.5;
            if (step * gmax < cfg.step_min) break;
            FitResult r;
            try {
                r = fixed_fit(kind, cand, degrees, data, cfg);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::SolverFailure && e.code() != ErrorCode::Infeasible &&
                    e.code() != ErrorCode::CannotCertify)
                    throw;
                step *= 0.5;
                continue;
            }
            best.stats.solves += r.stats.solves;
            best.stats.iterations += r.stats.iterations;
            slow = r.stats.last_status == SolveStatus::SlowProgress ? slow + 1 : 0;
            if (usable(r.stats.last_status) && r.J < best.J) {
                r.stats = best.stats;
                r.trace = std::move(best.trace);
                best = std::move(r);
                lam = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        best.trace.push_back({best.J, step, lam});
        log_line(LogLevel::Info, "refine %3d J %.6e step %.3e solves %d", iter + 1, best.J, step, best.stats.solves);
        history.push_back(best.J);
        const int w = cfg.improvement_window;
        if (static_cast<int>(history.size()) > w) {
            const double old = history[history.size() - 1 - static_cast<std::size_t>(w)];
            if (old - best.J <= cfg.improvement_tol * old) break;
        }
        g = gradient();
        gmax = g.lpNorm<Eigen::Infinity>();
    }
    return best;
}

FitResult general_impl(const FitData& data, const std::vector<int>& degrees, const FitConfig& cfg, Kind kind) {
    require(!degrees.empty(), "structure needs at least one term");
    const int n = static_cast<int>(degrees.size());
    SparseInitResult init = sparse_init_impl(data, n, cfg, kind);
    FitResult start = init.resolved ? *init.resolved
                                    : fixed_fit(kind, init.lambdas, std::vector<int>(init.lambdas.size(), 0), data, cfg);
    FitResult soe = refine_impl(start, data, cfg, kind);
    const bool all_zero = std::all_of(degrees.begin(), degrees.end(), [](int d) { return d == 0; });
    if (all_zero) return soe;
    FitResult sope_start = fixed_fit(kind, soe.model.lambdas(), degrees, data, cfg);
    sope_start.trace = soe.trace;
    sope_start.stats.solves += soe.stats.solves;
    sope_start.stats.iterations += soe.stats.iterations;
    return refine_impl(sope_start, data, cfg, kind);
}

} // namespace

SparseInitResult sparse_init(const FitData& data, int n, const FitConfig& config) {
    return sparse_init_impl(data, n, config, Kind::Density);
}

FitResult refine_exponents(const FitResult& start, const FitData& data, const FitConfig& config) {
    return refine_impl(start, data, config, Kind::Density);
}

FitResult solve_general(const FitData& data, const std::vector<int>& degrees, const FitConfig& config) {
    return general_impl(data, degrees, config, Kind::Density);
}

FitResult ccdf_fit(const FitData& data, const std::vector<int>& degrees, const FitConfig& config) {
    return general_impl(data, degrees, config, Kind::Ccdf);
}

// ---------------------------------------------------------------- model files

void write_model(std::ostream& os, const SopeModel& model) {
    char buf[32];
    os << model.size() << '\n';
    for (const auto& term : model.terms) {
        const Polynomial p = term.p.frame().center == 0.0 ? term.p : to_frame(term.p, Frame{});
        std::snprintf(buf, sizeof buf, "%.17g", term.lambda);
        os << buf << ' ' << std::max(0, p.degree());
        if (p.is_zero()) os << " 0";
        for (double c : p.coeffs()) {
            std::snprintf(buf, sizeof buf, "%.17g", c);
            os << ' ' << buf;
        }
        os << '\n';
    }
}

SopeModel read_model(std::istream& is) {
    std::string line;
    int lineno = 0;
    auto next = [&](std::string& out) {
        while (std::getline(is, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            out = line;
            return true;
        }
        return false;
    };
    auto bad = [&](const std::string& what) {
        fail(ErrorCode::Parse, "model line " + std::to_string(lineno) + ": " + what);
    };
    std::string text;
    if (!next(text)) fail(ErrorCode::Parse, "model file is empty");
    int n = 0;
    {
        std::istringstream ss(text);
        if (!(ss >> n) || n < 1) bad("expected a positive term count");
    }
    SopeModel model;
    for (int i = 0; i < n; ++i) {
        if (!next(text)) fail(ErrorCode::Parse, "model file ends after " + std::to_string(i) + " terms");
        std::istringstream ss(text);
        double lambda = 0.0;
        int deg = 0;
        if (!(ss >> lambda >> deg) || deg < 0) bad("expected exponent and degree");
        std::vector<double> c(static_cast<std::size_t>(deg) + 1);
        for (double& v : c)
            if (!(ss >> v)) bad("expected " + std::to_string(deg + 1) + " coefficients");
        model.terms.push_back({lambda, Polynomial(std::move(c), Frame{})});
    }
    try {
        model.validate();
    } catch (const Error& e) {
        fail(ErrorCode::Parse, e.what());
    }
    return model;
}

void save_model(const SopeModel& model, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp);
        if (!os) fail(ErrorCode::Io, "cannot write " + tmp.string());
        write_model(os, model);
        if (!os) fail(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

SopeModel load_model(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::Io, "cannot open " + path.string());
    return read_model(is);
}

} // namespace sope
