#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "coefficients.hpp"

namespace bfront {

/** @brief Planar traveling wave c phi' + phi'' + f(phi) = 0, phi(-inf) = 1, phi(+inf) = 0. */
struct WaveProfile {
    double c = 0.0;
    double h = 0.05;
    double X = 0.0;
    std::vector<double> xi;
    std::vector<double> phi;
    std::vector<double> dphi;
    double r_minus = 0.0;  // 1 - phi ~ exp(r_minus * xi) as xi -> -inf
    double r_plus = 0.0;   // phi ~ exp(-r_plus * xi) as xi -> +inf
    double residual = 0.0;
    double theta = 0.5;
    double rho = 1.0;

    double f(double u) const { return rho * u * (1.0 - u) * (u - theta); }
    double f_u(double u) const { return rho * (-3.0 * u * u + 2.0 * (1.0 + theta) * u - theta); }

    // Cubic Hermite interpolation on the nodes, exponential tails outside.
    double value(double z) const {
        const std::size_t n = xi.size();
        if (z <= xi.front()) return 1.0 - (1.0 - phi.front()) * std::exp(r_minus * (z - xi.front()));
        if (z >= xi.back()) return phi.back() * std::exp(-r_plus * (z - xi.back()));
        std::size_t j = std::min(n - 2, static_cast<std::size_t>((z - xi.front()) / h));
        const double t = (z - xi[j]) / h;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
        return h00 * phi[j] + h10 * h * dphi[j] + h01 * phi[j + 1] + h11 * h * dphi[j + 1];
    }

    double slope(double z) const {
        const std::size_t n = xi.size();
        if (z <= xi.front()) return -r_minus * (1.0 - phi.front()) * std::exp(r_minus * (z - xi.front()));
        if (z >= xi.back()) return -r_plus * phi.back() * std::exp(-r_plus * (z - xi.back()));
        std::size_t j = std::min(n - 2, static_cast<std::size_t>((z - xi.front()) / h));
        const double t = (z - xi[j]) / h;
        const double d00 = 6 * t * t - 6 * t, d10 = 3 * t * t - 4 * t + 1;
        const double d01 = -6 * t * t + 6 * t, d11 = 3 * t * t - 2 * t;
        return (d00 * phi[j] + d01 * phi[j + 1]) / h + d10 * dphi[j] + d11 * dphi[j + 1];
    }

    // Second derivative from the ODE itself.
    double curvature(double z) const { return -c * slope(z) - f(value(z)); }
};

struct WaveOptions {
    double X = 0.0;        // half window; 0 selects 20 / min(r-, r+), clipped at tails of 1e-10
    double h = 0.05;
    double phase_at = 0.0; // phi(phase_at) = 1/2, snapped to the node grid
    double tol_res = 1e-6;
};

namespace detail {

inline double linear_rate_plus(double c, double fu0) { return 0.5 * (c + std::sqrt(c * c + 4.0 * std::abs(fu0))); }
inline double linear_rate_minus(double c, double fu1) { return 0.5 * (-c + std::sqrt(c * c + 4.0 * std::abs(fu1))); }

// Shooting from the unstable manifold of 1. Returns +1 when the orbit turns back
// before reaching 0 (speed too large), -1 when it crosses 0 (speed too small).
template <class F>
int shoot(const F& f, double fu1, double c, double h, double max_len, std::vector<double>* trace = nullptr) {
    const double lam = linear_rate_minus(c, fu1);
    const double eps0 = 1e-7;
    double p = 1.0 - eps0, q = -lam * eps0;
    auto rhs = [&](double pp, double qq, double& dp, double& dq) {
        dp = qq;
        dq = -c * qq - f(pp);
    };
    const int steps = static_cast<int>(max_len / h);
    if (trace) { trace->clear(); trace->push_back(p); }
    for (int k = 0; k < steps; ++k) {
        double k1p, k1q, k2p, k2q, k3p, k3q, k4p, k4q;
        rhs(p, q, k1p, k1q);
        rhs(p + 0.5 * h * k1p, q + 0.5 * h * k1q, k2p, k2q);
        rhs(p + 0.5 * h * k2p, q + 0.5 * h * k2q, k3p, k3q);
        rhs(p + h * k3p, q + h * k3q, k4p, k4q);
        p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
        q += h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
        if (trace) trace->push_back(p);
        if (p < 0.0) return -1;
        if (q >= 0.0) return +1;
    }
    return +1;
}

}  // namespace detail

inline WaveProfile solve_profile(const Nonlinearity& nl, const WaveOptions& opt = {}) {
    nl.validate();
    if (!nl.homogeneous()) throw ArgumentError("planar profile requires a homogeneous reaction");
    if (!(opt.h > 0.0 && opt.h <= 0.05)) throw ArgumentError("profile step must lie in (0, 0.05]");
    WaveProfile P;
    P.theta = nl.theta;
    P.rho = nl.rho.base;
    P.h = opt.h;
    auto f = [&](double u) { return P.f(u); };
    auto fu = [&](double u) { return P.f_u(u); };
    const double fu0 = fu(0.0), fu1 = fu(1.0);
    const double M = lipschitz_bound(nl);
    const double cmax = 2.0 * std::sqrt(M);  // beta2 = 1 in one dimension

    const double r_est = std::min(detail::linear_rate_plus(0.0, fu0), detail::linear_rate_minus(0.0, fu1));
    const double X0 = opt.X > 0.0 ? opt.X : 20.0 / r_est;
    const double shoot_len = 8.0 * X0;

    double lo = -cmax, hi = cmax;
    if (detail::shoot(f, fu1, lo, opt.h, shoot_len) != -1 || detail::shoot(f, fu1, hi, opt.h, shoot_len) != +1)
        throw SolverError("speed bracket not found in [-2 sqrt(beta2 M), 2 sqrt(beta2 M)]");
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::shoot(f, fu1, mid, opt.h, shoot_len) < 0) lo = mid;
        else hi = mid;
    }
    double c = 0.5 * (lo + hi);

    // Node grid symmetric about the phase point, clipped where a tail would drop below 1e-10.
    const double h = opt.h;
    const double X = std::min(X0, 23.0 / std::max(detail::linear_rate_plus(c, fu0), detail::linear_rate_minus(c, fu1)));
    const long half = static_cast<long>(std::ceil(X / h));
    const long n_nodes = 2 * half + 1;
    const double x0 = std::round(opt.phase_at / h) * h;
    P.X = half * h;
    P.xi.resize(n_nodes);
    for (long j = 0; j < n_nodes; ++j) P.xi[j] = x0 + (j - half) * h;

    // Initial guess from the shooting orbit at the bisected speed.
    std::vector<double> trace;
    detail::shoot(f, fu1, c, h, shoot_len, &trace);
    std::size_t jm = 0;
    while (jm + 1 < trace.size() && trace[jm + 1] > 0.5) ++jm;
    double xi_half = jm * h;
    if (jm + 1 < trace.size()) xi_half += h * (trace[jm] - 0.5) / (trace[jm] - trace[jm + 1]);
    std::vector<double> u(n_nodes);
    const double rp = detail::linear_rate_plus(c, fu0), rm = detail::linear_rate_minus(c, fu1);
    std::size_t good_end = 0;
    while (good_end + 1 < trace.size() && trace[good_end + 1] > 1e-4 && trace[good_end + 1] < trace[good_end])
        ++good_end;
    for (long j = 0; j < n_nodes; ++j) {
        const double s = P.xi[j] - x0 + xi_half;  // position along the orbit
        if (s <= 0.0) {
            u[j] = 1.0 - (1.0 - trace[0]) * std::exp(rm * s);
        } else if (s >= good_end * h) {
            u[j] = trace[good_end] * std::exp(-rp * (s - good_end * h));
        } else {
            const std::size_t k = static_cast<std::size_t>(s / h);
            const double t = s / h - k;
            u[j] = (1 - t) * trace[k] + t * trace[k + 1];
        }
    }

    // Newton on the bordered collocation system: unknowns u_0..u_{N-1}, c.
    const long N = n_nodes;
    const long n_unk = N + 1;
    const long mid = half;
    auto residuals = [&](const std::vector<double>& v, double cc, Eigen::VectorXd& R, std::vector<double>* dv) {
        R.resize(n_unk);
        const double lm = detail::linear_rate_minus(cc, fu1), lp = detail::linear_rate_plus(cc, fu0);
        R[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h) + lm * (1.0 - v[0]);
        R[N - 1] = (3 * v[N - 1] - 4 * v[N - 2] + v[N - 3]) / (2 * h) + lp * v[N - 1];
        if (dv) {
            dv->assign(N, 0.0);
            (*dv)[0] = -lm * (1.0 - v[0]);
            (*dv)[N - 1] = -lp * v[N - 1];
        }
        for (long j = 1; j < N - 1; ++j) {
            double d1, d2;
            if (j >= 2 && j <= N - 3) {
                d1 = (v[j - 2] - 8 * v[j - 1] + 8 * v[j + 1] - v[j + 2]) / (12 * h);
                d2 = (-v[j - 2] + 16 * v[j - 1] - 30 * v[j] + 16 * v[j + 1] - v[j + 2]) / (12 * h * h);
            } else {
                d1 = (v[j + 1] - v[j - 1]) / (2 * h);
                d2 = (v[j + 1] - 2 * v[j] + v[j - 1]) / (h * h);
            }
            if (dv) (*dv)[j] = d1;
            R[j] = cc * d1 + d2 + f(v[j]);
        }
        R[N] = v[mid] - 0.5;
    };

    Eigen::VectorXd R;
    std::vector<double> dv;
    double res_inf = 0.0;
    for (int iter = 0; iter < 40; ++iter) {
        residuals(u, c, R, &dv);
        res_inf = R.lpNorm<Eigen::Infinity>();
        if (res_inf < 1e-13) break;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(6 * n_unk);
        const double lm = detail::linear_rate_minus(c, fu1), lp = detail::linear_rate_plus(c, fu0);
        const double dc = 1e-7;
        const double dlm = (detail::linear_rate_minus(c + dc, fu1) - detail::linear_rate_minus(c - dc, fu1)) / (2 * dc);
        const double dlp = (detail::linear_rate_plus(c + dc, fu0) - detail::linear_rate_plus(c - dc, fu0)) / (2 * dc);
        trip.emplace_back(0, 0, -3 / (2 * h) - lm);
        trip.emplace_back(0, 1, 4 / (2 * h));
        trip.emplace_back(0, 2, -1 / (2 * h));
        trip.emplace_back(0, N, dlm * (1.0 - u[0]));
        trip.emplace_back(N - 1, N - 1, 3 / (2 * h) + lp);
        trip.emplace_back(N - 1, N - 2, -4 / (2 * h));
        trip.emplace_back(N - 1, N - 3, 1 / (2 * h));
        trip.emplace_back(N - 1, N, dlp * u[N - 1]);
        for (long j = 1; j < N - 1; ++j) {
            if (j >= 2 && j <= N - 3) {
                const double a1 = c / (12 * h), a2 = 1.0 / (12 * h * h);
                trip.emplace_back(j, j - 2, a1 * 1 - a2);
                trip.emplace_back(j, j - 1, a1 * -8 + a2 * 16);
                trip.emplace_back(j, j, -30 * a2 + fu(u[j]));
                trip.emplace_back(j, j + 1, a1 * 8 + a2 * 16);
                trip.emplace_back(j, j + 2, a1 * -1 - a2);
            } else {
                trip.emplace_back(j, j - 1, -c / (2 * h) + 1 / (h * h));
                trip.emplace_back(j, j, -2 / (h * h) + fu(u[j]));
                trip.emplace_back(j, j + 1, c / (2 * h) + 1 / (h * h));
            }
            trip.emplace_back(j, N, dv[j]);
        }
        trip.emplace_back(N, mid, 1.0);
        Eigen::SparseMatrix<double> J(n_unk, n_unk);
        J.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(J);
        if (lu.info() != Eigen::Success) throw ConvergenceError("profile Newton system is singular");
        Eigen::VectorXd step = lu.solve(-R);
        for (long j = 0; j < N; ++j) u[j] += step[j];
        c += step[N];
        if (step.lpNorm<Eigen::Infinity>() < 1e-14) {
            residuals(u, c, R, &dv);
            res_inf = R.lpNorm<Eigen::Infinity>();
            break;
        }
    }
    residuals(u, c, R, &dv);
    double interior = 0.0;
    for (long j = 1; j < N - 1; ++j) interior = std::max(interior, std::abs(R[j]));
    P.residual = interior;
    P.c = c;
    P.phi = u;
    P.dphi = dv;
    if (!(P.residual <= opt.tol_res)) throw ConvergenceError("profile residual above tolerance");
    for (long j = 0; j + 1 < N; ++j)
        if (!(u[j + 1] < u[j])) throw ConvergenceError("polished profile is not strictly decreasing");
    P.r_plus = detail::linear_rate_plus(c, fu0);
    P.r_minus = detail::linear_rate_minus(c, fu1);
    return P;
}

inline double profile_width(const WaveProfile& p, double eps) {
    if (!(eps > 0.0 && eps <= 0.5)) throw ArgumentError("width level must lie in (0, 1/2]");
    auto solve_level = [&](double level) {
        double a = p.xi.front(), b = p.xi.back();
        while (p.value(a) < level) a -= 10.0;
        while (p.value(b) > level) b += 10.0;
        for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
            const double m = 0.5 * (a + b);
            if (p.value(m) > level) a = m;
            else b = m;
        }
        return 0.5 * (a + b);
    };
    const double x0 = solve_level(0.5);
    const double left = x0 - solve_level(1.0 - eps);
    const double right = solve_level(eps) - x0;
    const double m = std::max({left, right, 0.0});
    return m < 1e-9 ? 0.0 : m;
}

// Centre of the profile (phi = 1/2) on its own axis.
inline double profile_center(const WaveProfile& p) {
    double a = p.xi.front(), b = p.xi.back();
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        if (p.value(m) > 0.5) a = m;
        else b = m;
    }
    return 0.5 * (a + b);
}

inline double min_slope(const WaveProfile& p, double M) {
    if (!(M > 0.0)) throw ArgumentError("slope window must be positive");
    if (std::abs(p.c) < 1e-9) throw InfeasibleError("degenerate speed: time monotonicity requires c != 0");
    const double x0 = profile_center(p);
    double m = std::min(std::abs(p.slope(x0 - M)), std::abs(p.slope(x0 + M)));
    for (std::size_t j = 0; j < p.xi.size(); ++j)
        if (std::abs(p.xi[j] - x0) <= M) m = std::min(m, std::abs(p.slope(p.xi[j])));
    return std::abs(p.c) * m;
}

struct TailRates {
    double r_minus = 0.0;
    double r_plus = 0.0;
    double r2_minus = 0.0;
    double r2_plus = 0.0;
};

namespace detail {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit out;
    out.n = x.size();
    if (x.size() < 2) return out;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
    mx /= x.size();
    my /= y.size();
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    out.slope = sxx > 0 ? sxy / sxx : 0.0;
    out.intercept = my - out.slope * mx;
    out.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return out;
}

}  // namespace detail

inline TailRates tail_rates(const WaveProfile& p) {
    std::vector<double> xl, yl, xr, yr;
    for (std::size_t j = 0; j < p.xi.size(); ++j) {
        const double a = 1.0 - p.phi[j], b = p.phi[j];
        if (a >= 1e-8 && a <= 1e-3) { xl.push_back(p.xi[j]); yl.push_back(std::log(a)); }
        if (b >= 1e-8 && b <= 1e-3) { xr.push_back(p.xi[j]); yr.push_back(std::log(b)); }
    }
    const auto fl = detail::least_squares(xl, yl), fr = detail::least_squares(xr, yr);
    if (fl.n < 10 || fr.n < 10 || fl.r2 < 0.999 || fr.r2 < 0.999)
        throw ConvergenceError("tail resolution insufficient; enlarge the window X");
    return {fl.slope, -fr.slope, fl.r2, fr.r2};
}

inline void write_profile(const WaveProfile& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write profile to " + path);
    out.precision(17);
    out << "# c " << p.c << "\n# r_minus " << p.r_minus << "\n# r_plus " << p.r_plus << "\n# tol_res " << p.residual
        << "\n# theta " << p.theta << "\n";
    for (std::size_t j = 0; j < p.xi.size(); ++j) out << p.xi[j] << ' ' << p.phi[j] << '\n';
    if (!out) throw IoError("write failed for " + path);
}

/** @brief A planar front phi(z) with its first two derivatives, evaluated by callables. */
struct PlanarFront {
    double c = 0.0;
    std::function<double(double)> phi;
    std::function<double(double)> dphi;
    std::function<double(double)> ddphi;

    static PlanarFront from_profile(const WaveProfile& p) {
        auto shared = std::make_shared<WaveProfile>(p);
        const double x0 = profile_center(p);
        return {p.c, [shared, x0](double z) { return shared->value(z + x0); },
                [shared, x0](double z) { return shared->slope(z + x0); },
                [shared, x0](double z) { return shared->curvature(z + x0); }};
    }

    // Closed form for the cubic with constant modulation rho:
    // phi = 1 / (1 + exp(a z)), a = sqrt(rho / 2), c = sqrt(rho / 2) (1 - 2 theta).
    static PlanarFront cubic_closed_form(double theta, double rho = 1.0) {
        const double a = std::sqrt(rho / 2.0);
        auto phi = [a](double z) {
            if (a * z > 0) { const double e = std::exp(-a * z); return e / (1.0 + e); }
            return 1.0 / (1.0 + std::exp(a * z));
        };
        return {a * (1.0 - 2.0 * theta), phi,
                [a, phi](double z) { const double p = phi(z); return -a * p * (1.0 - p); },
                [a, phi](double z) { const double p = phi(z); return a * a * p * (1.0 - p) * (1.0 - 2.0 * p); }};
    }
};

}  // namespace bfront
