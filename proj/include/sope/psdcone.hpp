#ifndef SOPE_PSDCONE_HPP
#define SOPE_PSDCONE_HPP

#include "sope/polynomial.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace sope {

/// Cone of a contiguous slice of the decision vector. Free variables are
/// unconstrained; their dual slack must vanish (the zero cone).
enum class ConeKind { Free, Nonneg, SecondOrder, Psd };

/// `size` is the slice length; for Psd, `order` is the matrix order and the
/// slice holds svec(X): column-major lower triangle with off-diagonals scaled
/// by sqrt(2), so that <X, Y> = svec(X)' svec(Y).
struct ConeBlock {
    ConeKind kind = ConeKind::Free;
    int offset = 0;
    int size = 0;
    int order = 0;

    bool operator==(const ConeBlock&) const = default;
};

/// min c'x + objective_offset  s.t.  A x = b,  x in K1 x K2 x ...
struct ConicProgram {
    int num_vars = 0;
    std::vector<ConeBlock> blocks;
    Eigen::VectorXd c;
    Eigen::SparseMatrix<double> A;
    Eigen::VectorXd b;
    double objective_offset = 0.0;

    int num_equalities() const noexcept { return static_cast<int>(b.size()); }
    void validate() const; // throws InvalidArgument
};

/// OptimalInaccurate: the iteration stalled but the best iterate meets the
/// reduced tolerance SolverConfig::tol_inaccurate.
enum class SolveStatus { Optimal, OptimalInaccurate, PrimalInfeasible, DualInfeasible, SlowProgress };
std::string_view to_string(SolveStatus status) noexcept;

struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

/// x primal, y equality multipliers, s = c - A'y dual slack (zero on free
/// blocks). For infeasible statuses x or y holds a normalized Farkas ray.
struct ConicSolution {
    SolveStatus status = SolveStatus::SlowProgress;
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd s;
    Residuals residuals; // relative: primal/(1+|b|), dual/(1+|c|), gap/(1+|c'x|+|b'y|)
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    std::vector<double> mu_trace;
};

int svec_size(int order) noexcept;
int svec_index(int order, int i, int j) noexcept; // i, j in either order
Eigen::VectorXd svec(const Eigen::MatrixXd& m);
Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int order);

/// Sparse affine form constant + sum coef * x[index].
struct LinearExpr {
    double constant = 0.0;
    std::vector<std::pair<int, double>> terms;

    LinearExpr() = default;
    LinearExpr(double c) : constant(c) {}
    static LinearExpr var(int index, double coef = 1.0);

    LinearExpr& operator+=(const LinearExpr& o);
    LinearExpr& operator-=(const LinearExpr& o);
    LinearExpr& operator*=(double k);
    double eval(const Eigen::VectorXd& x) const;
    void compress(); // merges duplicate indices, drops zeros
};

LinearExpr operator+(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a, const LinearExpr& b);
LinearExpr operator*(double k, LinearExpr a);

struct VarRef {
    int index = -1;
    std::string name;

    LinearExpr expr() const { return LinearExpr::var(index); }
};

/// Polynomial whose coefficients (in the frame variable s = t - center) are
/// affine in the decision variables.
class AffinePolynomial {
public:
    AffinePolynomial() = default;
    AffinePolynomial(std::vector<LinearExpr> coeffs, Frame frame = {});
    static AffinePolynomial constant(const Polynomial& p);

    int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    const std::vector<LinearExpr>& coeffs() const noexcept { return coeffs_; }
    LinearExpr& coeff(int j);
    const Frame& frame() const noexcept { return frame_; }

    AffinePolynomial& operator+=(const AffinePolynomial& o); // frames must agree
    AffinePolynomial& operator-=(const AffinePolynomial& o);
    AffinePolynomial& operator*=(double k);

    /// Product with a fixed polynomial expressed in the same frame.
    AffinePolynomial times(const Polynomial& q) const;
    /// Re-expresses in `frame` (q(s) = p(s + new_center - old_center)).
    AffinePolynomial to_frame(Frame frame) const;
    /// Affine form of the value at raw time t.
    LinearExpr at_time(double t) const;
    Polynomial evaluate(const Eigen::VectorXd& x) const;

private:
    std::vector<LinearExpr> coeffs_;
    Frame frame_;
};

/// Handle to a PSD block; entry(i, j) is the affine form of X_ij.
struct PsdRef {
    int offset = -1;
    int order = 0;

    LinearExpr entry(int i, int j) const;
    Eigen::MatrixXd value(const Eigen::VectorXd& x) const;
};

/// Single-writer assembler for a ConicProgram.
class ProgramBuilder {
public:
    VarRef add_free(std::string name = {});
    std::vector<VarRef> add_free(int count, const std::string& name = {});
    VarRef add_nonneg(std::string name = {});
    std::vector<VarRef> add_nonneg(int count, const std::string& name = {});
    /// Slice (t, x1..x_{dim-1}) with |x| <= t.
    std::vector<VarRef> add_soc(int dim, const std::string& name = {});
    PsdRef add_psd(int order);

    /// expr == 0.
    void add_equality(const LinearExpr& expr);
    void add_objective(const LinearExpr& expr);

    int num_vars() const noexcept { return num_vars_; }
    int num_equalities() const noexcept { return static_cast<int>(rhs_.size()); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    ConicProgram build() const;

private:
    int grow(ConeKind kind, int size, int order, const std::string& name);

    int num_vars_ = 0;
    std::vector<ConeBlock> blocks_;
    std::vector<std::string> names_;
    std::vector<Eigen::Triplet<double>> triplets_;
    std::vector<double> rhs_;
    LinearExpr objective_;
};

/// Chebyshev-basis Markov-Lukacs certificate that p >= 0 on `iv` (raw time).
void nonneg_on_interval(ProgramBuilder& builder, const AffinePolynomial& p, const Interval& iv);
void nonpos_on_interval(ProgramBuilder& builder, const AffinePolynomial& p, const Interval& iv);

/// Coefficients of s^j (s = mid + halfwidth*u) in the Chebyshev basis T_k(u):
/// column j holds the expansion of s^j.
Eigen::MatrixXd monomial_to_chebyshev(int degree, double mid, double halfwidth);

struct LsqRow {
    LinearExpr residual; // r_m(x)
    double target = 0.0; // h_m
    double weight = 1.0; // w_m
};

/// Adds u >= (1/M) sum w_m (r_m - h_m)^2 through a rotated second-order cone
/// and adds u to the objective. Returns u.
LinearExpr lsq_epigraph(ProgramBuilder& builder, const std::vector<LsqRow>& rows);

/// Adds beta * sum weight_i |alpha_i| via alpha_i = a_i+ - a_i-.
void l1_penalty(ProgramBuilder& builder, const std::vector<LinearExpr>& alphas, const std::vector<double>& weights,
                double beta);

/// Text serialization; values are written with 17 significant digits so a
/// dump/load/dump cycle is byte-identical.
void write_program(std::ostream& os, const ConicProgram& program);
ConicProgram read_program(std::istream& is);
void save_program(const ConicProgram& program, const std::filesystem::path& path);
ConicProgram load_program(const std::filesystem::path& path);

} // namespace sope

#endif
