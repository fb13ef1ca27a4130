#ifndef SOPE_POLYNOMIAL_HPP
#define SOPE_POLYNOMIAL_HPP

#include <initializer_list>
#include <span>
#include <vector>

namespace sope {

/// Declares which variable a polynomial's coefficients refer to: the stored
/// variable is `t - center`. `halfwidth` records the half-length of the
/// interval the polynomial was built for; arithmetic ignores it.
struct Frame {
    double center = 0.0;
    double halfwidth = 1.0;

    bool operator==(const Frame&) const = default;
};

/// Closed finite interval [lo, hi] with lo < hi.
struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    Interval() = default;
    Interval(double lo_, double hi_);

    double width() const noexcept { return hi - lo; }
    double mid() const noexcept { return 0.5 * (lo + hi); }
    bool contains(double t) const noexcept { return t >= lo && t <= hi; }
};

/// Real polynomial in the monomial basis, ascending order: coeffs()[j]
/// multiplies s^j where s is the frame variable. Trailing exact zeros are
/// trimmed; the zero polynomial has no coefficients and degree -1.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coeffs, Frame frame = {});
    Polynomial(std::initializer_list<double> coeffs);

    static Polynomial constant(double c, Frame frame = {});
    static Polynomial monomial(int degree, double c = 1.0, Frame frame = {});

    std::span<const double> coeffs() const noexcept { return coeffs_; }
    double coeff(int j) const noexcept;
    int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_zero() const noexcept { return coeffs_.empty(); }

    const Frame& frame() const noexcept { return frame_; }
    Polynomial with_frame(Frame frame) const;

    /// Value at the stored variable s.
    double operator()(double s) const noexcept;
    /// Value at raw time t, i.e. at s = t - center.
    double at_time(double t) const noexcept { return (*this)(t - frame_.center); }

    Polynomial operator-() const;
    Polynomial& operator*=(double c);

    bool operator==(const Polynomial&) const = default;

private:
    void trim();

    std::vector<double> coeffs_;
    Frame frame_;
};

double eval(const Polynomial& p, double s) noexcept;

/// q(s) = p(s + theta).
Polynomial shift(const Polynomial& p, double theta);

/// Re-expresses a raw-time polynomial in the centered frame: the result q
/// satisfies q(s) = p(s + center) and carries `frame`.
Polynomial to_frame(const Polynomial& p, Frame frame);

Polynomial add(const Polynomial& p, const Polynomial& q);
Polynomial sub(const Polynomial& p, const Polynomial& q);
Polynomial mul(const Polynomial& p, const Polynomial& q);
Polynomial scale(const Polynomial& p, double c);
/// q(s) = p(c s).
Polynomial scale_arg(const Polynomial& p, double c);
Polynomial derivative(const Polynomial& p);
Polynomial antiderivative(const Polynomial& p, double constant);

inline Polynomial operator+(const Polynomial& p, const Polynomial& q) { return add(p, q); }
inline Polynomial operator-(const Polynomial& p, const Polynomial& q) { return sub(p, q); }
inline Polynomial operator*(const Polynomial& p, const Polynomial& q) { return mul(p, q); }
inline Polynomial operator*(double c, const Polynomial& p) { return scale(p, c); }

/// Real roots of p (companion-matrix eigenvalues whose imaginary part is
/// negligible), ascending.
std::vector<double> real_roots(const Polynomial& p);

/// Binomial coefficient as a double; exact for the small arguments used here.
double binomial(int n, int k);

} // namespace sope

#endif
