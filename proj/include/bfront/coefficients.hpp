#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace bfront {

/** @brief Smooth scalar field from a fixed whitelist: const, tanh, sin.
 *
 *  tanh(base, amp, axis, center, scale) = base + amp * tanh((x_axis - center) / scale)
 *  sin(base, amp, axis, center, scale)  = base + amp * sin((x_axis - center) / scale)
 */
struct Expr {
    enum class Kind { constant, tanh, sine };

    Kind kind = Kind::constant;
    double base = 0.0;
    double amp = 0.0;
    int axis = 0;
    double center = 0.0;
    double scale = 1.0;

    static Expr constant(double v) { Expr e; e.base = v; return e; }
    static Expr tanh_profile(double base, double amp, int axis, double center, double scale) {
        return {Kind::tanh, base, amp, axis, center, scale};
    }
    static Expr sine(double base, double amp, int axis, double center, double scale) {
        return {Kind::sine, base, amp, axis, center, scale};
    }

    double operator()(Vec2 x) const {
        if (kind == Kind::constant) return base;
        const double z = ((axis == 0 ? x.x : x.y) - center) / scale;
        return base + amp * (kind == Kind::tanh ? std::tanh(z) : std::sin(z));
    }

    // Partial derivative with respect to coordinate dir (0 = x, 1 = y).
    double derivative(Vec2 x, int dir) const {
        if (kind == Kind::constant || dir != axis) return 0.0;
        const double z = ((axis == 0 ? x.x : x.y) - center) / scale;
        if (kind == Kind::tanh) {
            const double t = std::tanh(z);
            return amp * (1.0 - t * t) / scale;
        }
        return amp * std::cos(z) / scale;
    }

    bool is_constant() const { return kind == Kind::constant || amp == 0.0; }
    double lower() const { return kind == Kind::constant ? base : base - std::abs(amp); }
    double upper() const { return kind == Kind::constant ? base : base + std::abs(amp); }
    double sup_abs() const { return std::max(std::abs(lower()), std::abs(upper())); }

    std::string to_string() const;
    static Expr parse(std::string_view text);
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ArgumentError("not a number: '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

inline std::string Expr::to_string() const {
    using detail::format_double;
    if (kind == Kind::constant) return "const(" + format_double(base) + ")";
    std::string s = kind == Kind::tanh ? "tanh(" : "sin(";
    s += format_double(base) + ", " + format_double(amp) + ", " + (axis == 0 ? "x" : "y") + ", " +
         format_double(center) + ", " + format_double(scale) + ")";
    return s;
}

inline Expr Expr::parse(std::string_view text) {
    text = detail::trim(text);
    const auto open = text.find('(');
    if (open == std::string_view::npos) return constant(detail::parse_double(text));
    if (text.back() != ')') throw ArgumentError("expression missing ')': " + std::string(text));
    const auto name = detail::trim(text.substr(0, open));
    const auto args = detail::split(text.substr(open + 1, text.size() - open - 2), ',');
    if (name == "const") {
        if (args.size() != 1) throw ArgumentError("const() takes one argument");
        return constant(detail::parse_double(args[0]));
    }
    if (name != "tanh" && name != "sin")
        throw ArgumentError("expression kind '" + std::string(name) + "' not in {const, tanh, sin}");
    if (args.size() != 5) throw ArgumentError(std::string(name) + "() takes (base, amp, axis, center, scale)");
    int axis = 0;
    if (args[2] == "x") axis = 0;
    else if (args[2] == "y") axis = 1;
    else throw ArgumentError("axis must be x or y");
    const double scale = detail::parse_double(args[4]);
    if (!(scale > 0.0)) throw ArgumentError("expression scale must be positive");
    Expr e{name == "tanh" ? Kind::tanh : Kind::sine, detail::parse_double(args[0]), detail::parse_double(args[1]),
           axis, detail::parse_double(args[3]), scale};
    return e;
}

/** @brief Cubic bistable reaction f(x,u) = rho(x) u (1 - u) (u - theta). */
struct Nonlinearity {
    double theta = 0.5;
    Expr rho = Expr::constant(1.0);

    double cubic(double u) const { return u * (1.0 - u) * (u - theta); }
    double cubic_du(double u) const { return -3.0 * u * u + 2.0 * (1.0 + theta) * u - theta; }

    double operator()(Vec2 x, double u) const { return rho(x) * cubic(u); }
    double du(Vec2 x, double u) const { return rho(x) * cubic_du(u); }

    bool homogeneous() const { return rho.is_constant(); }
    double rho_min() const { return rho.lower(); }
    double rho_max() const { return rho.upper(); }

    // Reaction for the reflected unknown 1 - u: -f(1 - u) is the cubic with threshold 1 - theta.
    Nonlinearity reflected() const { return {1.0 - theta, rho}; }

    void validate() const {
        if (!(theta > 0.0 && theta < 1.0)) throw ModelError("threshold outside (0,1)");
        if (!(rho_min() > 0.0)) throw ModelError("reaction modulation must stay positive");
    }
};

struct StabilityConstants {
    double gamma = 0.0;
    double sigma = 0.0;
};

inline StabilityConstants derive_stability_constants(const Nonlinearity& nl) {
    nl.validate();
    const double th = nl.theta;
    const double disc = std::sqrt((1.0 + th) * (1.0 + th) - 3.0 * th);
    const double u_minus = (1.0 + th - disc) / 3.0;
    const double u_plus = (1.0 + th + disc) / 3.0;
    StabilityConstants out;
    out.sigma = 0.99 * std::min({u_minus, 1.0 - u_plus, 0.5 - 1e-6});
    const int n = 2000;
    double g = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= n; ++k) {
        const double u = out.sigma * k / n;
        g = std::min(g, (1.0 - u) * (th - u));
        const double v = 1.0 - u;
        g = std::min(g, v * (v - th));
    }
    out.gamma = g * nl.rho_min();
    return out;
}

namespace detail {

template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace detail

// Integral of the homogeneous reaction over [0,1].
inline double integral_f(const Nonlinearity& nl) {
    const double r = nl.rho.base;
    auto f = [&](double u) { return r * nl.cubic(u); };
    const double fa = f(0.0), fm = f(0.5), fb = f(1.0);
    const double whole = (fa + 4.0 * fm + fb) / 6.0;
    return detail::adaptive_simpson(f, 0.0, 1.0, fa, fm, fb, whole, 1e-15, 40);
}

inline double lipschitz_bound(const Nonlinearity& nl) {
    const int n = 4000;
    double m = 0.0;
    for (int k = 0; k <= n; ++k) m = std::max(m, std::abs(nl.cubic_du(static_cast<double>(k) / n)));
    const double vertex = (1.0 + nl.theta) / 3.0;
    if (vertex > 0.0 && vertex < 1.0) m = std::max(m, std::abs(nl.cubic_du(vertex)));
    return 1.05 * m * std::max(std::abs(nl.rho.lower()), std::abs(nl.rho.upper()));
}

/** @brief Diagonal diffusion tensor diag(a1(x), a2(x)). */
struct DiffusionModel {
    Expr a1 = Expr::constant(1.0);
    Expr a2 = Expr::constant(1.0);
    double a12 = 0.0;

    double beta1() const { return std::min(a1.lower(), a2.lower()); }
    double beta2() const { return std::max(a1.upper(), a2.upper()); }
    bool isotropic_constant() const {
        return a1.is_constant() && a2.is_constant() && a1.base == a2.base;
    }

    void validate() const {
        if (a12 != 0.0) throw ModelError("off-diagonal diffusion not supported by the flux stencil");
        if (!(beta1() > 0.0)) throw ModelError("diffusion must be uniformly positive");
    }
};

struct AdvectionModel {
    Expr q1 = Expr::constant(0.0);
    Expr q2 = Expr::constant(0.0);

    Vec2 operator()(Vec2 x) const { return {q1(x), q2(x)}; }
    double bound() const { return std::hypot(q1.sup_abs(), q2.sup_abs()); }
    bool zero() const { return q1.is_constant() && q1.base == 0.0 && q2.is_constant() && q2.base == 0.0; }
};

struct Models {
    Nonlinearity f;
    DiffusionModel A;
    AdvectionModel q;

    void validate() const {
        f.validate();
        A.validate();
    }
};

}  // namespace bfront
