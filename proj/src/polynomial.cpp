#include "sope/polynomial.hpp"

#include "sope/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace sope {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::CannotCertify: return "CannotCertify";
    case ErrorCode::NoFeasibleLength: return "NoFeasibleLength";
    case ErrorCode::ExponentCollision: return "ExponentCollision";
    case ErrorCode::DegenerateSelection: return "DegenerateSelection";
    case ErrorCode::TailUnusable: return "TailUnusable";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MissingFixture: return "MissingFixture";
    }
    return "Unknown";
}

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    require(std::isfinite(lo) && std::isfinite(hi), "interval endpoints must be finite");
    require(lo < hi, "interval requires lo < hi");
}

Polynomial::Polynomial(std::vector<double> coeffs, Frame frame)
    : coeffs_(std::move(coeffs)), frame_(frame) {
    trim();
}

Polynomial::Polynomial(std::initializer_list<double> coeffs) : coeffs_(coeffs) { trim(); }

Polynomial Polynomial::constant(double c, Frame frame) { return Polynomial({c}, frame); }

Polynomial Polynomial::monomial(int degree, double c, Frame frame) {
    std::vector<double> v(static_cast<std::size_t>(degree) + 1, 0.0);
    v.back() = c;
    return Polynomial(std::move(v), frame);
}

double Polynomial::coeff(int j) const noexcept {
    if (j < 0 || j >= static_cast<int>(coeffs_.size())) return 0.0;
    return coeffs_[static_cast<std::size_t>(j)];
}

Polynomial Polynomial::with_frame(Frame frame) const {
    Polynomial q = *this;
    q.frame_ = frame;
    return q;
}

double Polynomial::operator()(double s) const noexcept {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * s + *it;
    return acc;
}

Polynomial Polynomial::operator-() const { return scale(*this, -1.0); }

Polynomial& Polynomial::operator*=(double c) {
    for (double& v : coeffs_) v *= c;
    trim();
    return *this;
}

void Polynomial::trim() {
    while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
}

double eval(const Polynomial& p, double s) noexcept { return p(s); }

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

Polynomial shift(const Polynomial& p, double theta) {
    const int d = p.degree();
    if (d <= 0 || theta == 0.0) return p;
    std::vector<double> pw(static_cast<std::size_t>(d) + 1, 1.0);
    for (int j = 1; j <= d; ++j) pw[j] = pw[j - 1] * theta;
    std::vector<double> q(static_cast<std::size_t>(d) + 1, 0.0);
    const auto c = p.coeffs();
    for (int j = 0; j <= d; ++j) {
        if (c[j] == 0.0) continue;
        for (int k = 0; k <= j; ++k) q[k] += c[j] * binomial(j, k) * pw[j - k];
    }
    return Polynomial(std::move(q), p.frame());
}

Polynomial to_frame(const Polynomial& p, Frame frame) {
    return shift(p, frame.center - p.frame().center).with_frame(frame);
}

Polynomial add(const Polynomial& p, const Polynomial& q) {
    std::vector<double> r(std::max(p.coeffs().size(), q.coeffs().size()), 0.0);
    for (std::size_t j = 0; j < p.coeffs().size(); ++j) r[j] += p.coeffs()[j];
    for (std::size_t j = 0; j < q.coeffs().size(); ++j) r[j] += q.coeffs()[j];
    return Polynomial(std::move(r), p.is_zero() ? q.frame() : p.frame());
}

Polynomial sub(const Polynomial& p, const Polynomial& q) { return add(p, -q); }

Polynomial mul(const Polynomial& p, const Polynomial& q) {
    if (p.is_zero() || q.is_zero()) return Polynomial({}, p.frame());
    std::vector<double> r(p.coeffs().size() + q.coeffs().size() - 1, 0.0);
    for (std::size_t i = 0; i < p.coeffs().size(); ++i)
        for (std::size_t j = 0; j < q.coeffs().size(); ++j) r[i + j] += p.coeffs()[i] * q.coeffs()[j];
    return Polynomial(std::move(r), p.frame());
}

Polynomial scale(const Polynomial& p, double c) {
    std::vector<double> r(p.coeffs().begin(), p.coeffs().end());
    for (double& v : r) v *= c;
    return Polynomial(std::move(r), p.frame());
}

Polynomial scale_arg(const Polynomial& p, double c) {
    std::vector<double> r(p.coeffs().begin(), p.coeffs().end());
    double f = 1.0;
    for (double& v : r) {
        v *= f;
        f *= c;
    }
    return Polynomial(std::move(r), p.frame());
}

Polynomial derivative(const Polynomial& p) {
    if (p.degree() <= 0) return Polynomial({}, p.frame());
    std::vector<double> r(p.coeffs().size() - 1);
    for (std::size_t j = 1; j < p.coeffs().size(); ++j) r[j - 1] = static_cast<double>(j) * p.coeffs()[j];
    return Polynomial(std::move(r), p.frame());
}

Polynomial antiderivative(const Polynomial& p, double constant) {
    std::vector<double> r(p.coeffs().size() + 1, 0.0);
    r[0] = constant;
    for (std::size_t j = 0; j < p.coeffs().size(); ++j) r[j + 1] = p.coeffs()[j] / static_cast<double>(j + 1);
    return Polynomial(std::move(r), p.frame());
}

std::vector<double> real_roots(const Polynomial& p) {
    std::vector<double> roots;
    const int d = p.degree();
    if (d <= 0) return roots;
    const auto c = p.coeffs();
    if (d == 1) {
        roots.push_back(-c[0] / c[1]);
        return roots;
    }
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(d, d);
    for (int i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < d; ++i) comp(i, d - 1) = -c[i] / c[d];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    const auto ev = es.eigenvalues();
    for (int i = 0; i < d; ++i) {
        const double re = ev[i].real();
        const double im = ev[i].imag();
        if (std::abs(im) <= 1e-9 * std::max(1.0, std::abs(re))) roots.push_back(re);
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

} // namespace sope
