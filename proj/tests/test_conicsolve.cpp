#include "sope/conicsolve.hpp"
#include "sope/error.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace sope;

TEST_CASE("LP: min x s.t. x >= 1") {
    ProgramBuilder b;
    auto x = b.add_free("x");
    auto s = b.add_nonneg("s");
    b.add_equality(x.expr() - s.expr() - 1.0);
    b.add_objective(x.expr());
    auto sol = solve(b.build());
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x(x.index) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(sol.primal_objective == doctest::Approx(sol.dual_objective).epsilon(1e-8));
}

TEST_CASE("SDP: largest eigenvalue through t I - A psd") {
    std::mt19937 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 2 + trial % 4;
        Eigen::MatrixXd A(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j <= i; ++j) A(i, j) = A(j, i) = g(rng);
        ProgramBuilder b;
        auto t = b.add_free("t");
        auto X = b.add_psd(m);
        for (int j = 0; j < m; ++j)
            for (int i = j; i < m; ++i) b.add_equality(X.entry(i, j) - (i == j ? t.expr() : LinearExpr(0.0)) + A(i, j));
        b.add_objective(t.expr());
        auto sol = solve(b.build());
        REQUIRE(sol.status == SolveStatus::Optimal);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        CHECK(sol.x(t.index) == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-7));
    }
}

TEST_CASE("SOCP: distance to a half-space") {
    std::mt19937 rng(6);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 2 + trial % 3;
        Eigen::VectorXd a(d), c(d);
        for (int i = 0; i < d; ++i) a(i) = g(rng), c(i) = g(rng);
        const double beta = g(rng);
        ProgramBuilder b;
        auto x = b.add_free(d, "x");
        auto cone = b.add_soc(d + 1, "q");
        auto slack = b.add_nonneg("slack");
        LinearExpr ax = slack.expr() - beta;
        for (int i = 0; i < d; ++i) {
            b.add_equality(cone[i + 1].expr() - x[i].expr() + c(i));
            ax += a(i) * x[i].expr();
        }
        b.add_equality(ax);
        b.add_objective(cone[0].expr());
        auto sol = solve(b.build());
        REQUIRE(sol.status == SolveStatus::Optimal);
        const double oracle = std::max(0.0, (a.dot(c) - beta) / a.norm());
        CHECK(sol.primal_objective == doctest::Approx(oracle).epsilon(1e-7).scale(1.0));
    }
}

TEST_CASE("infeasibility detection") {
    {
        ProgramBuilder b;
        auto x = b.add_nonneg("x");
        b.add_equality(x.expr() + 1.0);
        b.add_objective(x.expr());
        auto prog = b.build();
        auto sol = solve(prog);
        CHECK(sol.status == SolveStatus::PrimalInfeasible);
        // Farkas ray: b'y = 1 with -A'y in the dual cone.
        CHECK(prog.b.dot(sol.y) == doctest::Approx(1.0));
        CHECK(-(prog.A.transpose() * sol.y)(0) >= -1e-8);
    }
    {
        ProgramBuilder b;
        auto x = b.add_free("x");
        auto y = b.add_nonneg("y");
        b.add_equality(x.expr() + y.expr());
        b.add_objective(x.expr());
        auto prog = b.build();
        auto sol = solve(prog);
        CHECK(sol.status == SolveStatus::DualInfeasible);
        CHECK(prog.c.dot(sol.x) == doctest::Approx(-1.0));
        CHECK((prog.A * sol.x).norm() <= 1e-7);
    }
}

TEST_CASE("kkt_residuals examples") {
    ProgramBuilder b;
    auto x = b.add_nonneg(2, "x");
    b.add_equality(x[0].expr() + x[1].expr() - 1.0);
    b.add_objective(x[0].expr() + 2.0 * x[1].expr());
    auto prog = b.build();
    ConicSolution s;
    s.x = Eigen::Vector2d(1.0, 0.0);
    s.y = Eigen::VectorXd::Constant(1, 1.0);
    s.s = Eigen::Vector2d(0.0, 1.0);
    auto r = kkt_residuals(prog, s);
    CHECK(r.primal <= 1e-12);
    CHECK(r.dual <= 1e-12);
    CHECK(r.gap <= 1e-12);
    s.x(0) += 1e-3;
    CHECK(kkt_residuals(prog, s).primal == doctest::Approx(1e-3 * 1.0));
    s.x.setZero();
    s.y.setZero();
    s.s.setZero();
    CHECK(kkt_residuals(prog, s).primal == doctest::Approx(prog.b.norm()));
}

namespace {

// Random program with a planted complementary optimal pair.
ConicProgram planted(std::mt19937& rng, double& opt) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.5, 2.0);
    ProgramBuilder b;
    auto fr = b.add_free(2, "f");
    auto nn = b.add_nonneg(4, "l");
    auto so = b.add_soc(4, "q");
    auto ps = b.add_psd(3);
    const int N = b.num_vars();
    Eigen::VectorXd xs = Eigen::VectorXd::Zero(N), ss = Eigen::VectorXd::Zero(N);
    for (auto& v : fr) xs(v.index) = g(rng);
    for (int i = 0; i < 4; ++i) (i % 2 ? xs : ss)(nn[i].index) = u(rng);
    {
        Eigen::Vector3d d(g(rng), g(rng), g(rng));
        d.normalize();
        const double tx = u(rng), ts = u(rng);
        xs(so[0].index) = tx;
        ss(so[0].index) = ts;
        for (int i = 0; i < 3; ++i) {
            xs(so[i + 1].index) = tx * d(i);
            ss(so[i + 1].index) = -ts * d(i);
        }
    }
    {
        Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(3, 3)).householderQ();
        Eigen::Vector3d ex(u(rng), 0, 0), es(0, u(rng), u(rng));
        xs.segment(ps.offset, 6) = svec(Q * ex.asDiagonal() * Q.transpose());
        ss.segment(ps.offset, 6) = svec(Q * es.asDiagonal() * Q.transpose());
    }
    const int m = 12;
    Eigen::MatrixXd A(m, N);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < N; ++j) A(i, j) = g(rng);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) y(i) = g(rng);
    const Eigen::VectorXd bvec = A * xs;
    const Eigen::VectorXd cvec = A.transpose() * y + ss;
    for (int i = 0; i < m; ++i) {
        LinearExpr e(-bvec(i));
        for (int j = 0; j < N; ++j) e += LinearExpr::var(j, A(i, j));
        b.add_equality(e);
    }
    LinearExpr obj;
    for (int j = 0; j < N; ++j) obj += LinearExpr::var(j, cvec(j));
    b.add_objective(obj);
    opt = cvec.dot(xs);
    return b.build();
}

} // namespace

TEST_CASE("property: planted optimal pairs") {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        double opt = 0.0;
        auto prog = planted(rng, opt);
        auto sol = solve(prog);
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(sol.primal_objective == doctest::Approx(opt).epsilon(1e-7));
        CHECK(sol.dual_objective == doctest::Approx(opt).epsilon(1e-7));
        CHECK(sol.residuals.primal <= 1e-8);
        CHECK(sol.residuals.dual <= 1e-8);
    }
}

TEST_CASE("property: deterministic and monotone complementarity") {
    std::mt19937 rng(78);
    double opt = 0.0;
    auto prog = planted(rng, opt);
    auto a = solve(prog);
    auto b = solve(prog);
    CHECK(a.iterations == b.iterations);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    for (std::size_t i = 1; i < a.mu_trace.size(); ++i) CHECK(a.mu_trace[i] <= a.mu_trace[i - 1] * (1 + 1e-12));
}

TEST_CASE("configuration") {
    SolverConfig bad;
    bad.tol_gap = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    auto hi = SolverConfig::high_accuracy();
    CHECK(hi.max_iterations == 200);
    CHECK(hi.tol_gap == 1e-11);
    std::mt19937 rng(79);
    double opt = 0.0;
    auto prog = planted(rng, opt);
    SolverConfig few;
    few.max_iterations = 2;
    CHECK(solve(prog, few).status == SolveStatus::SlowProgress);
    auto sol = solve(prog, hi);
    CHECK(sol.status == SolveStatus::Optimal);
    CHECK(sol.primal_objective == doctest::Approx(opt).epsilon(1e-9));
}
