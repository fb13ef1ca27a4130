#include "sope/psdcone.hpp"

#include "sope/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace sope {

std::string_view to_string(SolveStatus status) noexcept {
    switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::OptimalInaccurate: return "OptimalInaccurate";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::SlowProgress: return "SlowProgress";
    }
    return "Unknown";
}

void ConicProgram::validate() const {
    require(num_vars >= 1, "program needs at least one variable");
    require(c.size() == num_vars, "objective size mismatch");
    require(A.cols() == num_vars && A.rows() == b.size(), "constraint matrix size mismatch");
    int at = 0;
    for (const auto& blk : blocks) {
        require(blk.offset == at, "cone blocks must tile the variables in order");
        require(blk.size >= 1, "empty cone block");
        if (blk.kind == ConeKind::Psd) require(blk.order >= 1 && blk.size == svec_size(blk.order), "bad PSD block");
        at += blk.size;
    }
    require(at == num_vars, "cone blocks do not cover all variables");
}

int svec_size(int order) noexcept { return order * (order + 1) / 2; }

int svec_index(int order, int i, int j) noexcept {
    if (i < j) std::swap(i, j);
    return j * order - j * (j - 1) / 2 + (i - j);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    Eigen::VectorXd v(svec_size(n));
    int k = 0;
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i) v(k++) = i == j ? m(i, j) : M_SQRT2 * 0.5 * (m(i, j) + m(j, i));
    return v;
}

Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, int order) {
    Eigen::MatrixXd m(order, order);
    int k = 0;
    for (int j = 0; j < order; ++j)
        for (int i = j; i < order; ++i) {
            const double x = i == j ? v(k) : v(k) / M_SQRT2;
            m(i, j) = x;
            m(j, i) = x;
            ++k;
        }
    return m;
}

LinearExpr LinearExpr::var(int index, double coef) {
    LinearExpr e;
    e.terms.emplace_back(index, coef);
    return e;
}

LinearExpr& LinearExpr::operator+=(const LinearExpr& o) {
    constant += o.constant;
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& o) {
    constant -= o.constant;
    for (auto [i, v] : o.terms) terms.emplace_back(i, -v);
    return *this;
}

LinearExpr& LinearExpr::operator*=(double k) {
    constant *= k;
    for (auto& t : terms) t.second *= k;
    return *this;
}

double LinearExpr::eval(const Eigen::VectorXd& x) const {
    double v = constant;
    for (auto [i, c] : terms) v += c * x(i);
    return v;
}

void LinearExpr::compress() {
    std::map<int, double> acc;
    for (auto [i, v] : terms) acc[i] += v;
    terms.clear();
    for (auto [i, v] : acc)
        if (v != 0.0) terms.emplace_back(i, v);
}

LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
LinearExpr operator*(double k, LinearExpr a) { return a *= k; }

AffinePolynomial::AffinePolynomial(std::vector<LinearExpr> coeffs, Frame frame)
    : coeffs_(std::move(coeffs)), frame_(frame) {}

AffinePolynomial AffinePolynomial::constant(const Polynomial& p) {
    std::vector<LinearExpr> c;
    for (double v : p.coeffs()) c.emplace_back(v);
    return AffinePolynomial(std::move(c), p.frame());
}

LinearExpr& AffinePolynomial::coeff(int j) {
    if (j >= static_cast<int>(coeffs_.size())) coeffs_.resize(static_cast<std::size_t>(j) + 1);
    return coeffs_[static_cast<std::size_t>(j)];
}

AffinePolynomial& AffinePolynomial::operator+=(const AffinePolynomial& o) {
    if (!o.coeffs_.empty() && !coeffs_.empty())
        require(o.frame_.center == frame_.center, "affine polynomials in different frames");
    if (coeffs_.empty()) frame_ = o.frame_;
    for (int j = 0; j <= o.degree(); ++j) coeff(j) += o.coeffs_[j];
    return *this;
}

AffinePolynomial& AffinePolynomial::operator-=(const AffinePolynomial& o) {
    AffinePolynomial neg = o;
    neg *= -1.0;
    return *this += neg;
}

AffinePolynomial& AffinePolynomial::operator*=(double k) {
    for (auto& c : coeffs_) c *= k;
    return *this;
}

AffinePolynomial AffinePolynomial::times(const Polynomial& q) const {
    if (coeffs_.empty() || q.is_zero()) return AffinePolynomial({}, frame_);
    require(q.degree() == 0 || q.frame().center == frame_.center, "product of polynomials in different frames");
    std::vector<LinearExpr> r(coeffs_.size() + q.coeffs().size() - 1);
    for (std::size_t i = 0; i < coeffs_.size(); ++i)
        for (std::size_t j = 0; j < q.coeffs().size(); ++j)
            if (q.coeffs()[j] != 0.0) r[i + j] += q.coeffs()[j] * coeffs_[i];
    for (auto& e : r) e.compress();
    return AffinePolynomial(std::move(r), frame_);
}

AffinePolynomial AffinePolynomial::to_frame(Frame frame) const {
    const double theta = frame.center - frame_.center;
    const int d = degree();
    std::vector<LinearExpr> r(coeffs_.size());
    std::vector<double> pw(coeffs_.size(), 1.0);
    for (int j = 1; j <= d; ++j) pw[j] = pw[j - 1] * theta;
    for (int j = 0; j <= d; ++j)
        for (int k = 0; k <= j; ++k) r[k] += (binomial(j, k) * pw[j - k]) * coeffs_[j];
    for (auto& e : r) e.compress();
    return AffinePolynomial(std::move(r), frame);
}

LinearExpr AffinePolynomial::at_time(double t) const {
    const double s = t - frame_.center;
    LinearExpr acc;
    double pw = 1.0;
    for (const auto& c : coeffs_) {
        acc += pw * c;
        pw *= s;
    }
    acc.compress();
    return acc;
}

Polynomial AffinePolynomial::evaluate(const Eigen::VectorXd& x) const {
    std::vector<double> v;
    for (const auto& c : coeffs_) v.push_back(c.eval(x));
    return Polynomial(std::move(v), frame_);
}

LinearExpr PsdRef::entry(int i, int j) const {
    return LinearExpr::var(offset + svec_index(order, i, j), i == j ? 1.0 : 1.0 / M_SQRT2);
}

Eigen::MatrixXd PsdRef::value(const Eigen::VectorXd& x) const { return smat(x.segment(offset, svec_size(order)), order); }

int ProgramBuilder::grow(ConeKind kind, int size, int order, const std::string& name) {
    const int first = num_vars_;
    const bool mergeable = kind == ConeKind::Free || kind == ConeKind::Nonneg;
    if (mergeable && !blocks_.empty() && blocks_.back().kind == kind)
        blocks_.back().size += size;
    else
        blocks_.push_back({kind, first, size, order});
    num_vars_ += size;
    for (int i = 0; i < size; ++i) names_.push_back(size == 1 ? name : name + "[" + std::to_string(i) + "]");
    return first;
}

VarRef ProgramBuilder::add_free(std::string name) {
    const int i = grow(ConeKind::Free, 1, 0, name);
    return {i, std::move(name)};
}

std::vector<VarRef> ProgramBuilder::add_free(int count, const std::string& name) {
    std::vector<VarRef> r;
    for (int i = 0; i < count; ++i) r.push_back(add_free(name + "[" + std::to_string(i) + "]"));
    return r;
}

VarRef ProgramBuilder::add_nonneg(std::string name) {
    const int i = grow(ConeKind::Nonneg, 1, 0, name);
    return {i, std::move(name)};
}

std::vector<VarRef> ProgramBuilder::add_nonneg(int count, const std::string& name) {
    std::vector<VarRef> r;
    for (int i = 0; i < count; ++i) r.push_back(add_nonneg(name + "[" + std::to_string(i) + "]"));
    return r;
}

std::vector<VarRef> ProgramBuilder::add_soc(int dim, const std::string& name) {
    require(dim >= 1, "second-order cone needs dimension >= 1");
    const int first = grow(ConeKind::SecondOrder, dim, 0, name);
    std::vector<VarRef> r;
    for (int i = 0; i < dim; ++i) r.push_back({first + i, names_[static_cast<std::size_t>(first + i)]});
    return r;
}

PsdRef ProgramBuilder::add_psd(int order) {
    require(order >= 1, "PSD block order must be >= 1");
    const int first = grow(ConeKind::Psd, svec_size(order), order, "psd");
    return {first, order};
}

void ProgramBuilder::add_equality(const LinearExpr& expr) {
    LinearExpr e = expr;
    e.compress();
    const int row = num_equalities();
    for (auto [i, v] : e.terms) {
        require(i >= 0 && i < num_vars_, "equality references an unknown variable");
        triplets_.emplace_back(row, i, v);
    }
    rhs_.push_back(-e.constant);
}

void ProgramBuilder::add_objective(const LinearExpr& expr) { objective_ += expr; }

ConicProgram ProgramBuilder::build() const {
    ConicProgram p;
    p.num_vars = num_vars_;
    p.blocks = blocks_;
    p.c = Eigen::VectorXd::Zero(num_vars_);
    LinearExpr obj = objective_;
    obj.compress();
    for (auto [i, v] : obj.terms) {
        require(i >= 0 && i < num_vars_, "objective references an unknown variable");
        p.c(i) = v;
    }
    p.objective_offset = obj.constant;
    p.A.resize(num_equalities(), num_vars_);
    p.A.setFromTriplets(triplets_.begin(), triplets_.end());
    p.A.makeCompressed();
    p.b = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), static_cast<Eigen::Index>(rhs_.size()));
    p.validate();
    return p;
}

Eigen::MatrixXd monomial_to_chebyshev(int degree, double mid, double halfwidth) {
    const int n = degree + 1;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    if (n == 0) return M;
    M(0, 0) = 1.0;
    for (int j = 1; j < n; ++j) {
        const auto prev = M.col(j - 1);
        Eigen::VectorXd next = mid * prev;
        for (int k = 0; k < j; ++k) {
            const double c = halfwidth * prev(k);
            if (c == 0.0) continue;
            if (k == 0) {
                next(1) += c;
            } else {
                next(k + 1) += 0.5 * c;
                next(k - 1) += 0.5 * c;
            }
        }
        M.col(j) = next;
    }
    return M;
}

namespace {

// Adds coef * T_i T_j (both Chebyshev) times a multiplier given as a list of
// (shift-kind) Chebyshev terms into `out`.
void add_product(std::vector<LinearExpr>& out, int i, int j, const LinearExpr& q) {
    const LinearExpr half = 0.5 * q;
    out[static_cast<std::size_t>(i + j)] += half;
    out[static_cast<std::size_t>(std::abs(i - j))] += half;
}

// Multiplies a Chebyshev series by a low-degree Chebyshev polynomial.
std::vector<LinearExpr> cheb_times(const std::vector<LinearExpr>& a, const std::vector<double>& m) {
    std::vector<LinearExpr> out(a.size() + m.size() - 1);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (m[j] == 0.0) continue;
            add_product(out, static_cast<int>(i), static_cast<int>(j), m[j] * a[i]);
        }
    return out;
}

std::vector<LinearExpr> gram_series(const PsdRef& q) {
    std::vector<LinearExpr> out(static_cast<std::size_t>(2 * q.order - 1));
    for (int j = 0; j < q.order; ++j)
        for (int i = j; i < q.order; ++i) add_product(out, i, j, (i == j ? 1.0 : 2.0) * q.entry(i, j));
    return out;
}

} // namespace

void nonneg_on_interval(ProgramBuilder& builder, const AffinePolynomial& p, const Interval& iv) {
    const int d = p.degree();
    if (d < 0) return;
    if (d == 0) {
        auto v = builder.add_nonneg("nonneg_const");
        builder.add_equality(p.coeffs()[0] - v.expr());
        return;
    }
    const double hw = 0.5 * iv.width();
    const Eigen::MatrixXd M = monomial_to_chebyshev(d, iv.mid() - p.frame().center, hw);
    std::vector<LinearExpr> target(static_cast<std::size_t>(d) + 1);
    for (int k = 0; k <= d; ++k)
        for (int j = k; j <= d; ++j)
            if (M(k, j) != 0.0) target[k] += M(k, j) * p.coeffs()[j];

    std::vector<LinearExpr> cert(static_cast<std::size_t>(d) + 1);
    auto accumulate = [&](const std::vector<LinearExpr>& series) {
        for (std::size_t k = 0; k < series.size() && k < cert.size(); ++k) cert[k] += series[k];
    };
    if (d % 2 == 0) {
        const int m = d / 2;
        accumulate(gram_series(builder.add_psd(m + 1)));
        accumulate(cheb_times(gram_series(builder.add_psd(m)), {0.5, 0.0, -0.5}));
    } else {
        const int m = (d - 1) / 2;
        accumulate(cheb_times(gram_series(builder.add_psd(m + 1)), {1.0, 1.0}));
        accumulate(cheb_times(gram_series(builder.add_psd(m + 1)), {1.0, -1.0}));
    }
    for (int k = 0; k <= d; ++k) builder.add_equality(target[k] - cert[k]);
}

void nonpos_on_interval(ProgramBuilder& builder, const AffinePolynomial& p, const Interval& iv) {
    AffinePolynomial neg = p;
    neg *= -1.0;
    nonneg_on_interval(builder, neg, iv);
}

LinearExpr lsq_epigraph(ProgramBuilder& builder, const std::vector<LsqRow>& rows) {
    require(!rows.empty(), "least-squares objective needs at least one row");
    const double M = static_cast<double>(rows.size());
    auto cone = builder.add_soc(static_cast<int>(rows.size()) + 2, "lsq");
    // |(2z, u-1)| <= u+1  <=>  |z|^2 <= u, with cone[0] = u+1, cone[1] = u-1.
    builder.add_equality(cone[1].expr() - cone[0].expr() + 2.0);
    for (std::size_t m = 0; m < rows.size(); ++m) {
        require(rows[m].weight > 0.0, "least-squares weights must be positive");
        const double k = 2.0 * std::sqrt(rows[m].weight / M);
        builder.add_equality(cone[m + 2].expr() - k * (rows[m].residual - rows[m].target));
    }
    LinearExpr u = cone[0].expr() - 1.0;
    builder.add_objective(u);
    return u;
}

void l1_penalty(ProgramBuilder& builder, const std::vector<LinearExpr>& alphas, const std::vector<double>& weights,
                double beta) {
    require(alphas.size() == weights.size(), "one weight per penalized variable");
    require(beta >= 0.0, "penalty weight must be non-negative");
    if (beta == 0.0) return;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        require(weights[i] > 0.0, "penalty weights must be positive");
        auto plus = builder.add_nonneg("l1_plus");
        auto minus = builder.add_nonneg("l1_minus");
        builder.add_equality(alphas[i] - plus.expr() + minus.expr());
        builder.add_objective((beta * weights[i]) * (plus.expr() + minus.expr()));
    }
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string_view kind_name(ConeKind k) {
    switch (k) {
    case ConeKind::Free: return "free";
    case ConeKind::Nonneg: return "nonneg";
    case ConeKind::SecondOrder: return "soc";
    case ConeKind::Psd: return "psd";
    }
    return "?";
}

ConeKind parse_kind(const std::string& s) {
    if (s == "free") return ConeKind::Free;
    if (s == "nonneg") return ConeKind::Nonneg;
    if (s == "soc") return ConeKind::SecondOrder;
    if (s == "psd") return ConeKind::Psd;
    fail(ErrorCode::Parse, "unknown cone kind '" + s + "'");
}

double parse_num(const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(ErrorCode::Parse, "bad number '" + s + "'");
    return v;
}

void expect(std::istream& is, const char* word) {
    std::string w;
    if (!(is >> w) || w != word) fail(ErrorCode::Parse, std::string("expected '") + word + "' in program file");
}

template <class T>
T read_value(std::istream& is) {
    T v{};
    if (!(is >> v)) fail(ErrorCode::Parse, "truncated program file");
    return v;
}

double read_num(std::istream& is) { return parse_num(read_value<std::string>(is)); }

} // namespace

void write_program(std::ostream& os, const ConicProgram& p) {
    os << "sope-conic-program 1\n";
    os << "vars " << p.num_vars << "\nequalities " << p.num_equalities() << "\nblocks " << p.blocks.size() << "\n";
    for (const auto& b : p.blocks) os << kind_name(b.kind) << ' ' << b.offset << ' ' << b.size << ' ' << b.order << "\n";
    os << "offset " << fmt(p.objective_offset) << "\n";
    int nnz = 0;
    for (Eigen::Index i = 0; i < p.c.size(); ++i) nnz += p.c(i) != 0.0;
    os << "c " << nnz << "\n";
    for (Eigen::Index i = 0; i < p.c.size(); ++i)
        if (p.c(i) != 0.0) os << i << ' ' << fmt(p.c(i)) << "\n";
    os << "b\n";
    for (Eigen::Index i = 0; i < p.b.size(); ++i) os << fmt(p.b(i)) << "\n";
    std::vector<std::tuple<int, int, double>> entries;
    for (int k = 0; k < p.A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(p.A, k); it; ++it)
            entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    std::sort(entries.begin(), entries.end());
    os << "A " << entries.size() << "\n";
    for (auto [r, c, v] : entries) os << r << ' ' << c << ' ' << fmt(v) << "\n";
}

ConicProgram read_program(std::istream& is) {
    expect(is, "sope-conic-program");
    if (read_value<int>(is) != 1) fail(ErrorCode::Parse, "unsupported program version");
    ConicProgram p;
    expect(is, "vars");
    p.num_vars = read_value<int>(is);
    expect(is, "equalities");
    const int m = read_value<int>(is);
    expect(is, "blocks");
    const int nb = read_value<int>(is);
    if (p.num_vars < 0 || m < 0 || nb < 0) fail(ErrorCode::Parse, "negative size in program file");
    for (int i = 0; i < nb; ++i) {
        ConeBlock b;
        b.kind = parse_kind(read_value<std::string>(is));
        b.offset = read_value<int>(is);
        b.size = read_value<int>(is);
        b.order = read_value<int>(is);
        p.blocks.push_back(b);
    }
    expect(is, "offset");
    p.objective_offset = read_num(is);
    expect(is, "c");
    const int nc = read_value<int>(is);
    p.c = Eigen::VectorXd::Zero(p.num_vars);
    for (int i = 0; i < nc; ++i) {
        const int idx = read_value<int>(is);
        if (idx < 0 || idx >= p.num_vars) fail(ErrorCode::Parse, "objective index out of range");
        p.c(idx) = read_num(is);
    }
    expect(is, "b");
    p.b.resize(m);
    for (int i = 0; i < m; ++i) p.b(i) = read_num(is);
    expect(is, "A");
    const int na = read_value<int>(is);
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < na; ++i) {
        const int r = read_value<int>(is);
        const int c = read_value<int>(is);
        if (r < 0 || r >= m || c < 0 || c >= p.num_vars) fail(ErrorCode::Parse, "matrix index out of range");
        trip.emplace_back(r, c, read_num(is));
    }
    p.A.resize(m, p.num_vars);
    p.A.setFromTriplets(trip.begin(), trip.end());
    p.A.makeCompressed();
    try {
        p.validate();
    } catch (const Error& e) {
        fail(ErrorCode::Parse, std::string("invalid program: ") + e.what());
    }
    return p;
}

void save_program(const ConicProgram& program, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) fail(ErrorCode::Io, "cannot write " + path.string());
    write_program(f, program);
    if (!f) fail(ErrorCode::Io, "write failed for " + path.string());
}

ConicProgram load_program(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string());
    return read_program(f);
}

} // namespace sope
