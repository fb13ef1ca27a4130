#include "sope/conicsolve.hpp"

#include "sope/error.hpp"
#include "sope/log.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace sope {

SolverConfig SolverConfig::high_accuracy() {
    SolverConfig c;
    c.max_iterations = 200;
    c.tol_gap = c.tol_primal = c.tol_dual = 1e-11;
    return c;
}

void SolverConfig::validate() const {
    require(max_iterations >= 1, "max_iterations must be >= 1");
    require(tol_gap > 0 && tol_primal > 0 && tol_dual > 0 && tol_inaccurate > 0, "solver tolerances must be positive");
    require(step_fraction_to_boundary > 0 && step_fraction_to_boundary < 1, "step fraction must lie in (0, 1)");
}

double cone_min_eig(const ConeBlock& blk, const Eigen::Ref<const Eigen::VectorXd>& v) {
    switch (blk.kind) {
    case ConeKind::Free: return std::numeric_limits<double>::infinity();
    case ConeKind::Nonneg: return v.minCoeff();
    case ConeKind::SecondOrder: return v.size() == 1 ? v(0) : v(0) - v.tail(v.size() - 1).norm();
    case ConeKind::Psd: {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(smat(v, blk.order), Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }
    }
    return 0.0;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Seg = Eigen::Ref<const VectorXd>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Cone {
    ConeKind kind;
    int off;
    int dim;
    int order;
    std::vector<int> cols; // columns of G with a nonzero in this block
    VectorXd w;            // Nonneg scaling
    MatrixXd W, Winv;      // SecondOrder scaling (symmetric)
    MatrixXd R, Rinv;      // Psd scaling
    VectorXd eig;          // Psd scaled point, diagonal of Lambda
    MatrixXd M;            // W^{-T} G restricted to `cols`
};

VectorXd soc_J(const Seg& v) {
    VectorXd r = -v;
    r(0) = v(0);
    return r;
}

class ConeSet {
public:
    std::vector<Cone> cones;
    int dim = 0;
    int degree = 0;

    VectorXd unit() const {
        VectorXd e = VectorXd::Zero(dim);
        for (const auto& c : cones) {
            switch (c.kind) {
            case ConeKind::Nonneg: e.segment(c.off, c.dim).setOnes(); break;
            case ConeKind::SecondOrder: e(c.off) = 1.0; break;
            case ConeKind::Psd: e.segment(c.off, c.dim) = svec(MatrixXd::Identity(c.order, c.order)); break;
            case ConeKind::Free: break;
            }
        }
        return e;
    }

    double min_eig(const VectorXd& v) const {
        double m = kInf;
        for (const auto& c : cones)
            m = std::min(m, cone_min_eig({c.kind, c.off, c.dim, c.order}, v.segment(c.off, c.dim)));
        return m;
    }

    void set_identity() {
        for (auto& c : cones) {
            switch (c.kind) {
            case ConeKind::Nonneg: c.w = VectorXd::Ones(c.dim); break;
            case ConeKind::SecondOrder: c.W = c.Winv = MatrixXd::Identity(c.dim, c.dim); break;
            case ConeKind::Psd:
                c.R = c.Rinv = MatrixXd::Identity(c.order, c.order);
                c.eig = VectorXd::Ones(c.order);
                break;
            case ConeKind::Free: break;
            }
        }
    }

    // Nesterov-Todd scaling at (s, z); false if either point left the interior.
    bool update(const VectorXd& s, const VectorXd& z) {
        for (auto& c : cones) {
            const VectorXd sb = s.segment(c.off, c.dim);
            const VectorXd zb = z.segment(c.off, c.dim);
            switch (c.kind) {
            case ConeKind::Nonneg:
                if ((sb.array() <= 0).any() || (zb.array() <= 0).any()) return false;
                c.w = (sb.array() / zb.array()).sqrt();
                break;
            case ConeKind::SecondOrder: {
                const double sres = sb(0) * sb(0) - sb.tail(c.dim - 1).squaredNorm();
                const double zres = zb(0) * zb(0) - zb.tail(c.dim - 1).squaredNorm();
                if (!(sb(0) > 0 && zb(0) > 0 && sres > 0 && zres > 0)) return false;
                const double sn = std::sqrt(sres), zn = std::sqrt(zres);
                const VectorXd s_bar = sb / sn, z_bar = zb / zn;
                const double gamma = std::sqrt(0.5 * (1.0 + s_bar.dot(z_bar)));
                const VectorXd w_bar = (s_bar + soc_J(z_bar)) / (2.0 * gamma);
                const double beta = std::sqrt(sn / zn);
                const double w0 = w_bar(0);
                const VectorXd w1 = w_bar.tail(c.dim - 1);
                MatrixXd B = MatrixXd::Identity(c.dim, c.dim);
                B(0, 0) = w0;
                B.bottomRightCorner(c.dim - 1, c.dim - 1) += w1 * w1.transpose() / (1.0 + w0);
                c.W = B;
                c.W.col(0).tail(c.dim - 1) = w1;
                c.W.row(0).tail(c.dim - 1) = w1.transpose();
                c.Winv = B;
                c.Winv.col(0).tail(c.dim - 1) = -w1;
                c.Winv.row(0).tail(c.dim - 1) = -w1.transpose();
                c.W *= beta;
                c.Winv /= beta;
                break;
            }
            case ConeKind::Psd: {
                Eigen::LLT<MatrixXd> ls(smat(sb, c.order)), lz(smat(zb, c.order));
                if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
                const MatrixXd Ls = ls.matrixL(), Lz = lz.matrixL();
                Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
                const VectorXd sv = svd.singularValues();
                if (!(sv.minCoeff() > 0)) return false;
                const VectorXd isq = sv.array().rsqrt();
                c.R = Ls * svd.matrixV() * isq.asDiagonal();
                c.Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
                c.eig = sv;
                break;
            }
            case ConeKind::Free: break;
            }
        }
        return true;
    }

    // Scaled point lambda = W z = W^{-T} s.
    VectorXd lambda(const VectorXd& s, const VectorXd& z) const {
        VectorXd l(dim);
        for (const auto& c : cones) {
            switch (c.kind) {
            case ConeKind::Nonneg:
                l.segment(c.off, c.dim) = (s.segment(c.off, c.dim).array() * z.segment(c.off, c.dim).array()).sqrt();
                break;
            case ConeKind::SecondOrder: l.segment(c.off, c.dim) = c.W * z.segment(c.off, c.dim); break;
            case ConeKind::Psd: l.segment(c.off, c.dim) = svec(MatrixXd(c.eig.asDiagonal())); break;
            case ConeKind::Free: break;
            }
        }
        return l;
    }

    enum class Op { W, WT, Winv, WinvT };

    static VectorXd apply_block(const Cone& c, Op op, const Seg& v) {
        switch (c.kind) {
        case ConeKind::Nonneg:
            return (op == Op::W || op == Op::WT) ? VectorXd(c.w.cwiseProduct(v)) : VectorXd(v.cwiseQuotient(c.w));
        case ConeKind::SecondOrder: return (op == Op::W || op == Op::WT) ? VectorXd(c.W * v) : VectorXd(c.Winv * v);
        case ConeKind::Psd: {
            const MatrixXd V = smat(v, c.order);
            switch (op) {
            case Op::W: return svec(c.R.transpose() * V * c.R);
            case Op::WT: return svec(c.R * V * c.R.transpose());
            case Op::Winv: return svec(c.Rinv.transpose() * V * c.Rinv);
            case Op::WinvT: return svec(c.Rinv * V * c.Rinv.transpose());
            }
            break;
        }
        case ConeKind::Free: break;
        }
        return v;
    }

    VectorXd apply(Op op, const VectorXd& v) const {
        VectorXd r(dim);
        for (const auto& c : cones) r.segment(c.off, c.dim) = apply_block(c, op, v.segment(c.off, c.dim));
        return r;
    }

    // Jordan product u o v.
    VectorXd circ(const VectorXd& u, const VectorXd& v) const {
        VectorXd r(dim);
        for (const auto& c : cones) {
            const auto ub = u.segment(c.off, c.dim), vb = v.segment(c.off, c.dim);
            switch (c.kind) {
            case ConeKind::Nonneg: r.segment(c.off, c.dim) = ub.cwiseProduct(vb); break;
            case ConeKind::SecondOrder:
                r(c.off) = ub.dot(vb);
                r.segment(c.off + 1, c.dim - 1) = ub(0) * vb.tail(c.dim - 1) + vb(0) * ub.tail(c.dim - 1);
                break;
            case ConeKind::Psd: {
                const MatrixXd U = smat(ub, c.order), V = smat(vb, c.order);
                r.segment(c.off, c.dim) = svec(0.5 * (U * V + V * U));
                break;
            }
            case ConeKind::Free: break;
            }
        }
        return r;
    }

    // Solves lambda o x = v for x, with lambda the current scaled point.
    VectorXd lambda_div(const VectorXd& lam, const VectorXd& v) const {
        VectorXd r(dim);
        for (const auto& c : cones) {
            const auto lb = lam.segment(c.off, c.dim), vb = v.segment(c.off, c.dim);
            switch (c.kind) {
            case ConeKind::Nonneg: r.segment(c.off, c.dim) = vb.cwiseQuotient(lb); break;
            case ConeKind::SecondOrder: {
                const double l0 = lb(0);
                const auto l1 = lb.tail(c.dim - 1);
                const double det = l0 * l0 - l1.squaredNorm();
                const double x0 = (l0 * vb(0) - l1.dot(vb.tail(c.dim - 1))) / det;
                r(c.off) = x0;
                r.segment(c.off + 1, c.dim - 1) = (vb.tail(c.dim - 1) - x0 * l1) / l0;
                break;
            }
            case ConeKind::Psd: {
                int k = 0;
                for (int j = 0; j < c.order; ++j)
                    for (int i = j; i < c.order; ++i, ++k)
                        r(c.off + k) = 2.0 * vb(k) / (c.eig(i) + c.eig(j));
                break;
            }
            case ConeKind::Free: break;
            }
        }
        return r;
    }

    // Largest alpha with lam + alpha d inside the cone (lam in the interior).
    double max_step(const VectorXd& lam, const VectorXd& d) const {
        double alpha = kInf;
        for (const auto& c : cones) {
            const auto lb = lam.segment(c.off, c.dim), db = d.segment(c.off, c.dim);
            switch (c.kind) {
            case ConeKind::Nonneg:
                for (int i = 0; i < c.dim; ++i)
                    if (db(i) < 0) alpha = std::min(alpha, -lb(i) / db(i));
                break;
            case ConeKind::SecondOrder: {
                if (c.dim == 1) {
                    if (db(0) < 0) alpha = std::min(alpha, -lb(0) / db(0));
                    break;
                }
                const double lk = std::sqrt(std::max(lb(0) * lb(0) - lb.tail(c.dim - 1).squaredNorm(), 0.0));
                if (lk <= 0) return 0.0;
                const VectorXd lbar = lb / lk;
                const double rho0 = (lbar(0) * db(0) - lbar.tail(c.dim - 1).dot(db.tail(c.dim - 1))) / lk;
                const double factor = (rho0 + db(0) / lk) / (lbar(0) + 1.0);
                const VectorXd rho1 = db.tail(c.dim - 1) / lk - factor * lbar.tail(c.dim - 1);
                const double t = rho1.norm() - rho0;
                if (t > 0) alpha = std::min(alpha, 1.0 / t);
                break;
            }
            case ConeKind::Psd: {
                const VectorXd isq = c.eig.array().rsqrt();
                const MatrixXd B = isq.asDiagonal() * smat(db, c.order) * isq.asDiagonal();
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(B, Eigen::EigenvaluesOnly);
                const double emin = es.eigenvalues()(0);
                if (emin < 0) alpha = std::min(alpha, -1.0 / emin);
                break;
            }
            case ConeKind::Free: break;
            }
        }
        return alpha;
    }
};

// Problem in the solver's internal form:
//   min c'x  s.t.  A x = b,  G x + s = h,  s in K.
struct Internal {
    MatrixXd A, G;
    VectorXd b, c, h;
    ConeSet K;
    int n = 0, p = 0;
};

class Kkt {
public:
    Kkt(const Internal& P) : P_(P) {}

    void factor(ConeSet& K) {
        const int n = P_.n, p = P_.p;
        H_ = MatrixXd::Zero(n, n);
        for (auto& c : K.cones) {
            c.M.resize(c.dim, static_cast<Eigen::Index>(c.cols.size()));
            for (std::size_t j = 0; j < c.cols.size(); ++j)
                c.M.col(static_cast<Eigen::Index>(j)) =
                    ConeSet::apply_block(c, ConeSet::Op::WinvT, P_.G.block(c.off, c.cols[j], c.dim, 1));
            const MatrixXd HB = c.M.transpose() * c.M;
            for (std::size_t a = 0; a < c.cols.size(); ++a)
                for (std::size_t b = 0; b < c.cols.size(); ++b) H_(c.cols[a], c.cols[b]) += HB(a, b);
        }
        const double scale = n > 0 ? std::max(1.0, H_.diagonal().cwiseAbs().maxCoeff()) : 1.0;
        const double delta = 1e-13 * scale + 1e-14;
        const double delta_eq = 1e-12;
        MatrixXd Kr(n + p, n + p);
        Kr.topLeftCorner(n, n) = H_;
        Kr.topLeftCorner(n, n).diagonal().array() += delta;
        Kr.topRightCorner(n, p) = P_.A.transpose();
        Kr.bottomLeftCorner(p, n) = P_.A;
        Kr.bottomRightCorner(p, p) = -delta_eq * MatrixXd::Identity(p, p);
        lu_.compute(Kr);
    }

    // Solves [0 A' G'; A 0 0; G 0 -W'W] [dx; dy; dz] = [rx; ry; rz], refining
    // against the unreduced system.
    void solve(const ConeSet& K, const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, VectorXd& dx,
               VectorXd& dy, VectorXd& dz) const {
        reduced_solve(K, rx, ry, rz, dx, dy, dz);
        const double scale = 1.0 + std::max({rx.lpNorm<Eigen::Infinity>(), ry.lpNorm<Eigen::Infinity>(),
                                             rz.size() ? rz.lpNorm<Eigen::Infinity>() : 0.0});
        double prev = kInf;
        for (int it = 0; it < 5; ++it) {
            const VectorXd e1 = rx - P_.A.transpose() * dy - P_.G.transpose() * dz;
            const VectorXd e2 = ry - P_.A * dx;
            const VectorXd e3 = rz - P_.G * dx + K.apply(ConeSet::Op::WT, K.apply(ConeSet::Op::W, dz));
            const double err = std::max({e1.size() ? e1.lpNorm<Eigen::Infinity>() : 0.0,
                                         e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0,
                                         e3.size() ? e3.lpNorm<Eigen::Infinity>() : 0.0});
            if (!std::isfinite(err) || err <= 1e-15 * scale || err >= 0.5 * prev) break;
            prev = err;
            VectorXd cx, cy, cz;
            reduced_solve(K, e1, e2, e3, cx, cy, cz);
            dx += cx;
            dy += cy;
            dz += cz;
        }
    }

private:
    void reduced_solve(const ConeSet& K, const VectorXd& rx, const VectorXd& ry, const VectorXd& rz, VectorXd& dx,
                       VectorXd& dy, VectorXd& dz) const {
        const int n = P_.n, p = P_.p;
        VectorXd rhs(n + p);
        rhs.head(n) = rx;
        rhs.tail(p) = ry;
        for (const auto& c : K.cones) {
            const VectorXd t = ConeSet::apply_block(c, ConeSet::Op::WinvT, rz.segment(c.off, c.dim));
            const VectorXd g = c.M.transpose() * t;
            for (std::size_t j = 0; j < c.cols.size(); ++j) rhs(c.cols[j]) += g(static_cast<Eigen::Index>(j));
        }
        VectorXd sol = lu_.solve(rhs);
        for (int it = 0; it < 2; ++it) {
            VectorXd res(n + p);
            res.head(n) = rhs.head(n) - H_ * sol.head(n) - P_.A.transpose() * sol.tail(p);
            res.tail(p) = rhs.tail(p) - P_.A * sol.head(n);
            if (!res.allFinite()) break;
            sol += lu_.solve(res);
        }
        dx = sol.head(n);
        dy = sol.tail(p);
        dz = K.apply(ConeSet::Op::Winv, K.apply(ConeSet::Op::WinvT, P_.G * dx - rz));
    }

    const Internal& P_;
    MatrixXd H_;
    Eigen::PartialPivLU<MatrixXd> lu_;
};

struct Iterate {
    VectorXd x, y, z, s;
    double tau = 1.0, kappa = 1.0;
};

struct Scaling {
    VectorXd row;   // row equilibration of the user's A
    double sb = 1.0; // b divided by sb
    double sc = 1.0; // c divided by sc
};

struct Mapping {
    std::vector<int> free_vars;     // user index of each free variable
    std::vector<int> cone_var_user; // user index of each internal cone coordinate
};

Internal dualize(const ConicProgram& prog, Scaling& sc, Mapping& map) {
    const int m = prog.num_equalities();
    Eigen::SparseMatrix<double, Eigen::RowMajor> A = prog.A;
    sc.row = VectorXd::Ones(m);
    for (int i = 0; i < m; ++i) {
        double mx = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, i); it; ++it)
            mx = std::max(mx, std::abs(it.value()));
        if (mx > 0) sc.row(i) = 1.0 / mx;
    }
    const VectorXd bt0 = sc.row.cwiseProduct(prog.b);
    sc.sb = std::max(1.0, bt0.lpNorm<Eigen::Infinity>());
    sc.sc = std::max(1.0, prog.c.lpNorm<Eigen::Infinity>());

    Internal P;
    std::vector<int> where(static_cast<std::size_t>(prog.num_vars), -1); // internal row index
    std::vector<bool> is_free(static_cast<std::size_t>(prog.num_vars), false);
    int off = 0;
    for (const auto& blk : prog.blocks) {
        if (blk.kind == ConeKind::Free) {
            for (int i = 0; i < blk.size; ++i) {
                where[blk.offset + i] = static_cast<int>(map.free_vars.size());
                is_free[blk.offset + i] = true;
                map.free_vars.push_back(blk.offset + i);
            }
            continue;
        }
        P.K.cones.push_back({blk.kind, off, blk.size, blk.order, {}, {}, {}, {}, {}, {}, {}, {}});
        for (int i = 0; i < blk.size; ++i) {
            where[blk.offset + i] = off + i;
            map.cone_var_user.push_back(blk.offset + i);
        }
        off += blk.size;
        P.K.degree += blk.kind == ConeKind::Nonneg ? blk.size : blk.kind == ConeKind::Psd ? blk.order : 1;
    }
    P.K.dim = off;
    P.n = m;
    P.p = static_cast<int>(map.free_vars.size());
    P.A = MatrixXd::Zero(P.p, m);
    P.G = MatrixXd::Zero(off, m);
    for (int i = 0; i < m; ++i)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, i); it; ++it) {
            const int u = static_cast<int>(it.col());
            const double v = it.value() * sc.row(i);
            if (is_free[u])
                P.A(where[u], i) += v;
            else
                P.G(where[u], i) += v;
        }
    P.c = -bt0 / sc.sb;
    P.b.resize(P.p);
    for (int k = 0; k < P.p; ++k) P.b(k) = prog.c(map.free_vars[k]) / sc.sc;
    P.h.resize(off);
    for (int k = 0; k < off; ++k) P.h(k) = prog.c(map.cone_var_user[k]) / sc.sc;
    for (auto& c : P.K.cones)
        for (int j = 0; j < m; ++j)
            if (P.G.block(c.off, j, c.dim, 1).cwiseAbs().maxCoeff() > 0) c.cols.push_back(j);
    return P;
}

double rel(double a, double b) { return a / (1.0 + b); }

} // namespace

ConicSolution InteriorPointSolver::solve(const ConicProgram& prog, const SolverConfig& cfg) const {
    prog.validate();
    cfg.validate();
    Scaling sc;
    Mapping map;
    Internal P = dualize(prog, sc, map);
    ConeSet& K = P.K;
    const int n = P.n, p = P.p, D = K.dim;
    const VectorXd e = K.unit();
    const double nb = P.b.norm(), nc = P.c.norm(), nh = P.h.norm();

    Kkt kkt(P);
    Iterate it;
    {
        // Least-norm primal and dual starts, shifted into the interior.
        K.set_identity();
        kkt.factor(K);
        VectorXd x, y, z;
        kkt.solve(K, VectorXd::Zero(n), P.b, P.h, x, y, z);
        it.x = x;
        VectorXd s = -z;
        double a = -K.min_eig(s);
        if (D > 0 && a >= 0) s += (1.0 + a) * e;
        it.s = s;
        kkt.solve(K, -P.c, VectorXd::Zero(p), VectorXd::Zero(D), x, y, z);
        it.y = y;
        a = -K.min_eig(z);
        if (D > 0 && a >= 0) z += (1.0 + a) * e;
        it.z = z;
    }

    ConicSolution out;
    enum class Outcome { None, Optimal, EcosPrimalInfeasible, EcosDualInfeasible };
    Outcome outcome = Outcome::None;
    std::optional<Iterate> best;
    double best_metric = kInf;
    double best_raw = kInf;
    int iter = 0;

    for (;; ++iter) {
        const VectorXd rx = P.A.transpose() * it.y + P.G.transpose() * it.z + P.c * it.tau;
        const VectorXd ry = -P.A * it.x + P.b * it.tau;
        const VectorXd rz = -P.G * it.x + P.h * it.tau - it.s;
        const double cx = P.c.dot(it.x), by = P.b.dot(it.y), hz = P.h.dot(it.z);
        const double rt = -cx - by - hz - it.kappa;
        const double mu = (it.s.dot(it.z) + it.tau * it.kappa) / (K.degree + 1);
        out.mu_trace.push_back(mu);

        const double pres = std::max(rel(ry.norm(), nb), rel(rz.norm(), nh)) / it.tau;
        const double dres = rel(rx.norm(), nc) / it.tau;
        const double pcost = cx / it.tau, dcost = -(by + hz) / it.tau;
        const double gap = it.s.dot(it.z) / (it.tau * it.tau);
        const double relgap = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
        const double metric = std::max({pres / cfg.tol_dual, dres / cfg.tol_primal, relgap / cfg.tol_gap});
        if (std::isfinite(metric) && metric < best_metric) {
            best_metric = metric;
            best_raw = std::max({pres, dres, relgap});
            best = it;
        }
        log_line(LogLevel::Debug, "ipm %3d pres %.2e dres %.2e gap %.2e pcost %.6e dcost %.6e tau %.2e kappa %.2e mu %.2e",
                 iter, pres, dres, gap, pcost, dcost, it.tau, it.kappa, mu);
        if (metric <= 1.0) {
            outcome = Outcome::Optimal;
            break;
        }
        if (it.kappa > it.tau) {
            const double yz = std::sqrt(it.y.squaredNorm() + it.z.squaredNorm());
            if (by + hz < 0) {
                const double r = (P.A.transpose() * it.y + P.G.transpose() * it.z).norm() / (-(by + hz));
                if (r < cfg.tol_primal && -(by + hz) > 1e-14 * yz) {
                    outcome = Outcome::EcosPrimalInfeasible;
                    break;
                }
            }
            if (cx < 0) {
                const double r = std::max((P.A * it.x).norm(), (P.G * it.x + it.s).norm()) / (-cx);
                if (r < cfg.tol_dual) {
                    outcome = Outcome::EcosDualInfeasible;
                    break;
                }
            }
        }
        if (iter >= cfg.max_iterations) break;

        if (!K.update(it.s, it.z)) break;
        const VectorXd lam = K.lambda(it.s, it.z);
        kkt.factor(K);
        VectorXd x1, y1, z1;
        kkt.solve(K, -P.c, P.b, P.h, x1, y1, z1);
        const double denom = it.kappa / it.tau - P.c.dot(x1) - P.b.dot(y1) - P.h.dot(z1);

        struct Dir {
            VectorXd dx, dy, dz, ds;
            double dtau = 0, dkappa = 0;
        };
        auto direction = [&](double sigma, const VectorXd& d_s, double d_kappa) {
            const double f = 1.0 - sigma;
            Dir d;
            VectorXd x2, y2, z2;
            const VectorXd q3 = -f * rz;
            kkt.solve(K, -f * rx, f * ry, -q3 - K.apply(ConeSet::Op::WT, K.lambda_div(lam, d_s)), x2, y2, z2);
            const double q4 = -f * rt;
            d.dtau = (q4 + d_kappa / it.tau + P.c.dot(x2) + P.b.dot(y2) + P.h.dot(z2)) / denom;
            d.dx = x2 + d.dtau * x1;
            d.dy = y2 + d.dtau * y1;
            d.dz = z2 + d.dtau * z1;
            // From the linearized residual row; keeps G x + s - h tau shrinking exactly.
            d.ds = -P.G * d.dx + P.h * d.dtau - q3;
            d.dkappa = (d_kappa - it.kappa * d.dtau) / it.tau;
            return d;
        };
        auto step_to_boundary = [&](const Dir& d) {
            double a = std::min(K.max_step(lam, K.apply(ConeSet::Op::WinvT, d.ds)),
                                K.max_step(lam, K.apply(ConeSet::Op::W, d.dz)));
            if (d.dtau < 0) a = std::min(a, -it.tau / d.dtau);
            if (d.dkappa < 0) a = std::min(a, -it.kappa / d.dkappa);
            return a;
        };

        const VectorXd ll = K.circ(lam, lam);
        Dir dir;
        if (cfg.predictor_corrector) {
            const Dir aff = direction(0.0, -ll, -it.kappa * it.tau);
            const double a_aff = std::min(1.0, step_to_boundary(aff));
            const double sigma = std::pow(1.0 - a_aff, 3);
            const VectorXd cross = K.circ(K.apply(ConeSet::Op::WinvT, aff.ds), K.apply(ConeSet::Op::W, aff.dz));
            dir = direction(sigma, -ll - cross + sigma * mu * e, -it.kappa * it.tau - aff.dkappa * aff.dtau + sigma * mu);
        } else {
            const double sigma = 0.1;
            dir = direction(sigma, -ll + sigma * mu * e, -it.kappa * it.tau + sigma * mu);
        }
        const double alpha = std::min(1.0, cfg.step_fraction_to_boundary * step_to_boundary(dir));
        if (!(alpha > 1e-12) || !dir.dx.allFinite() || !dir.dz.allFinite() || !std::isfinite(dir.dtau)) break;
        it.x += alpha * dir.dx;
        it.y += alpha * dir.dy;
        it.z += alpha * dir.dz;
        it.s += alpha * dir.ds;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
    }

    out.iterations = iter;
    const int N = prog.num_vars;
    out.x = VectorXd::Zero(N);
    out.y = VectorXd::Zero(n);
    out.s = VectorXd::Zero(N);
    auto scatter_x = [&](const VectorXd& yE, const VectorXd& zE, double f) {
        for (int k = 0; k < p; ++k) out.x(map.free_vars[k]) = f * yE(k);
        for (int k = 0; k < D; ++k) out.x(map.cone_var_user[k]) = f * zE(k);
    };
    if (outcome == Outcome::EcosPrimalInfeasible) {
        out.status = SolveStatus::DualInfeasible;
        scatter_x(it.y, it.z, 1.0);
        const double cxv = prog.c.dot(out.x);
        if (cxv < 0) out.x /= -cxv;
    } else if (outcome == Outcome::EcosDualInfeasible) {
        out.status = SolveStatus::PrimalInfeasible;
        out.y = sc.row.cwiseProduct(it.x);
        const double byv = prog.b.dot(out.y);
        if (byv > 0) out.y /= byv;
        out.s = -(prog.A.transpose() * out.y);
    } else {
        out.status = outcome == Outcome::Optimal           ? SolveStatus::Optimal
                     : best_raw <= cfg.tol_inaccurate ? SolveStatus::OptimalInaccurate
                                                      : SolveStatus::SlowProgress;
        const Iterate& src = (outcome == Outcome::Optimal || !best) ? it : *best;
        scatter_x(src.y, src.z, sc.sb / src.tau);
        out.y = (sc.sc / src.tau) * sc.row.cwiseProduct(src.x);
        for (int k = 0; k < D; ++k) out.s(map.cone_var_user[k]) = sc.sc * src.s(k) / src.tau;
    }
    out.primal_objective = prog.c.dot(out.x) + prog.objective_offset;
    out.dual_objective = prog.b.dot(out.y) + prog.objective_offset;
    const Residuals abs = kkt_residuals(prog, out);
    out.residuals = {abs.primal / (1.0 + prog.b.norm()), abs.dual / (1.0 + prog.c.norm()),
                     abs.gap / (1.0 + std::abs(prog.c.dot(out.x)) + std::abs(prog.b.dot(out.y)))};
    return out;
}

ConicSolution solve(const ConicProgram& program, const SolverConfig& config) {
    return InteriorPointSolver{}.solve(program, config);
}

Residuals kkt_residuals(const ConicProgram& prog, const ConicSolution& sol) {
    require(sol.x.size() == prog.num_vars && sol.s.size() == prog.num_vars && sol.y.size() == prog.num_equalities(),
            "solution dimensions do not match the program");
    Residuals r;
    double xviol = 0.0, sviol = 0.0, sfree = 0.0;
    for (const auto& blk : prog.blocks) {
        const auto xs = sol.x.segment(blk.offset, blk.size);
        const auto ss = sol.s.segment(blk.offset, blk.size);
        if (blk.kind == ConeKind::Free) {
            sfree += ss.squaredNorm();
            continue;
        }
        xviol = std::max(xviol, -cone_min_eig(blk, xs));
        sviol = std::max(sviol, -cone_min_eig(blk, ss));
    }
    r.primal = (prog.A * sol.x - prog.b).norm() + xviol;
    r.dual = (prog.c - prog.A.transpose() * sol.y - sol.s).norm() + std::sqrt(sfree) + sviol;
    r.gap = std::abs(prog.c.dot(sol.x) - prog.b.dot(sol.y));
    return r;
}

} // namespace sope
