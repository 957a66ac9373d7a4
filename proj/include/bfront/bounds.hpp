#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "geometry.hpp"
#include "solver.hpp"
#include "wave1d.hpp"

namespace bfront {

/** @brief Positive weight psi with decay lambda making exp(-lambda (s - L)) psi a boundary-compatible barrier.
 *
 *  General form: psi = psi~ + C with psi~(s, tau) = m(tau) - w(s)/2 and m(tau) = sqrt(tau^2 + rho^2) - rho,
 *  a smoothed negated distance to the wall. The constant pair is psi = 1.
 */
struct AuxWeight {
    ExtendedChannelSpec channel;
    double lambda = 0.0;
    double C = 1.0;
    double radius = 0.0;
    bool constant = true;
    double speed_shift = 0.0;  // optional extra -r c term in the interior inequality
    double sampling = 0.1;

    double psi_tilde(double s, double tau) const {
        if (constant) return 0.0;
        return std::sqrt(tau * tau + radius * radius) - radius - channel.width(s) / 2.0;
    }
    double operator()(double s, double tau) const { return constant ? 1.0 : psi_tilde(s, tau) + C; }
    double at(Vec2 x) const { return (*this)(channel.base.axial(x), channel.base.transverse(x)); }

    double psi_tilde_sup() const {
        if (constant) return 0.0;
        return std::max(channel.base.width.max_width(), channel.extension.max_width()) / 2.0;
    }
    double inf() const { return constant ? 1.0 : C - psi_tilde_sup(); }
    double sup() const {
        if (constant) return 1.0;
        const double w = std::min(channel.base.width.min_width(), channel.extension.min_width());
        return C + std::sqrt(w * w / 4.0 + radius * radius) - radius - w / 2.0;
    }

    // Axial window [s_lo, s_hi] on which the inequalities are sampled.
    std::pair<double, double> window() const {
        double ext = 5.0;
        const auto& w = channel.extension;
        if (w.kind == WidthProfile::Kind::asymptotic) ext = std::max(ext, 4.0 * w.ell);
        double lo = -ext;
        if (channel.base.width.kind == WidthProfile::Kind::table) lo = std::min(lo, channel.base.width.table.front().first - 5.0);
        return {lo, channel.base.length};
    }
};

struct WeightReport {
    double margin = std::numeric_limits<double>::infinity();  // most negative normalized margin
    double interior = std::numeric_limits<double>::infinity();
    double boundary = std::numeric_limits<double>::infinity();
    double worst_s = 0.0;
    double worst_tau = 0.0;
    bool worst_on_boundary = false;
    std::size_t samples = 0;

    bool pass(double tol = 1e-6) const { return margin >= -tol; }
};

// Interior: -div(A grad psi) + lambda (div(A e psi) + e.A grad psi) + q.grad psi - lambda (q.e) psi
//           - lambda^2 (e.A e) psi + beta psi >= 0, by centred differences of step h.
// Boundary: nu.A (lambda psi e + grad psi) >= 0, by one-sided differences into the channel.
// Both margins are divided by psi.
inline WeightReport verify_weight(const AuxWeight& w, double beta, const Models& m, double h = 0.0) {
    if (h <= 0.0) h = w.sampling;
    const auto& br = w.channel.base;
    const Vec2 e = br.direction(), n = perp(e);
    const double lam = w.lambda;
    auto world = [&](double s, double tau) { return br.shift + s * e + tau * n; };
    auto psi = [&](Vec2 x) { return w.at(x); };
    auto a = [&](int k, Vec2 x) { return k == 0 ? m.A.a1(x) : m.A.a2(x); };
    const Vec2 ax[2] = {{1.0, 0.0}, {0.0, 1.0}};
    const double ec[2] = {e.x, e.y};

    WeightReport rep;
    auto record = [&](double margin, double s, double tau, bool bnd) {
        ++rep.samples;
        if (bnd) rep.boundary = std::min(rep.boundary, margin);
        else rep.interior = std::min(rep.interior, margin);
        if (margin < rep.margin) {
            rep.margin = margin;
            rep.worst_s = s;
            rep.worst_tau = tau;
            rep.worst_on_boundary = bnd;
        }
    };

    const auto [s_lo, s_hi] = w.window();
    const int ns = static_cast<int>(std::ceil((s_hi - s_lo) / h));
    for (int is = 0; is <= ns; ++is) {
        const double s = s_lo + (s_hi - s_lo) * is / ns;
        const double half = w.channel.width(s) / 2.0;
        const int nt = std::max(2, static_cast<int>(std::ceil(2.0 * half / h)));
        for (int it = 1; it < nt; ++it) {
            const double tau = -half + 2.0 * half * it / nt;
            const Vec2 x = world(s, tau);
            const double p = psi(x);
            double div_agrad = 0.0, div_aepsi = 0.0, ea_grad = 0.0, q_grad = 0.0, eae = 0.0;
            const Vec2 q = m.q(x);
            const double qc[2] = {q.x, q.y};
            for (int k = 0; k < 2; ++k) {
                const Vec2 xp = x + h * ax[k], xm = x - h * ax[k];
                const double pp = psi(xp), pm = psi(xm);
                const double ap = a(k, x + 0.5 * h * ax[k]), am = a(k, x - 0.5 * h * ax[k]);
                div_agrad += (ap * (pp - p) - am * (p - pm)) / (h * h);
                div_aepsi += ec[k] * (a(k, xp) * pp - a(k, xm) * pm) / (2.0 * h);
                const double grad = (pp - pm) / (2.0 * h);
                ea_grad += ec[k] * a(k, x) * grad;
                q_grad += qc[k] * grad;
                eae += ec[k] * ec[k] * a(k, x);
            }
            const double lhs = -div_agrad + lam * (div_aepsi + ea_grad) + q_grad - lam * dot(q, e) * p -
                               lam * lam * eae * p - w.speed_shift * p + beta * p;
            record(lhs / p, s, tau, false);
        }
        const double dw = w.channel.width_derivative(s);
        for (int side : {-1, 1}) {
            const double tau = side * half;
            const Vec2 x = world(s, tau);
            Vec2 nu = side * n - (dw / 2.0) * e;
            nu = (1.0 / norm(nu)) * nu;
            const double p = psi(x);
            const double nc[2] = {nu.x, nu.y};
            double flux = 0.0;
            for (int k = 0; k < 2; ++k) {
                if (nc[k] == 0.0) continue;
                const double step = nc[k] > 0 ? h : -h;
                const double grad = (p - psi(x - step * ax[k])) / step;
                flux += nc[k] * a(k, x) * (lam * p * ec[k] + grad);
            }
            record(flux / p, s, tau, true);
        }
    }
    return rep;
}

namespace detail {

inline bool axis_aligned(Vec2 e) { return std::abs(e.x * e.y) < 1e-14; }

}  // namespace detail

// For a straight constant-width channel with constant diagonal A and q = 0 (and nu.A e = 0 on the walls)
// this is the constant pair psi = 1, lambda = sqrt(beta / beta2); otherwise a search over lambda on the
// fixed ladder 2^(-k/4) below sqrt(beta / beta2), with C = 1/lambda - sup|psi~|.
inline AuxWeight build_weight(const ExtendedChannelSpec& ch, double beta, const Models& m, double h = 0.1,
                              double radius = 0.0) {
    if (!(beta > 0.0)) throw ArgumentError("weight rate beta must be positive");
    if (!(h > 0.0)) throw ArgumentError("weight sampling must be positive");
    ch.validate();
    m.A.validate();
    const double beta2 = m.A.beta2();
    const double cap = std::sqrt(beta / beta2);
    AuxWeight w;
    w.channel = ch;
    w.sampling = h;
    const bool straight = ch.base.width.kind == WidthProfile::Kind::constant &&
                          ch.extension.kind == WidthProfile::Kind::constant &&
                          ch.extension.w0 == ch.base.width.w0;
    const bool flat_flux = m.A.isotropic_constant() ||
                           (m.A.a1.is_constant() && m.A.a2.is_constant() && detail::axis_aligned(ch.base.direction()));
    if (straight && flat_flux && m.q.zero()) {
        w.constant = true;
        w.lambda = cap;
        w.C = 0.0;
        return w;
    }
    w.constant = false;
    w.radius = radius > 0.0 ? radius : 3.0 * h;
    const double sup_t = w.psi_tilde_sup();
    WeightReport best;
    best.margin = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 400; ++k) {
        const double lam = std::pow(2.0, -k / 4.0);
        if (lam > cap) continue;
        if (lam < 1e-8) break;
        w.lambda = lam;
        w.C = 1.0 / lam - sup_t;
        if (!(w.C > sup_t)) continue;
        const auto rep = verify_weight(w, beta, m, h);
        if (rep.pass()) return w;
        if (rep.margin > best.margin) best = rep;
    }
    throw ConstructionError("weight search exhausted: worst margin " + std::to_string(best.margin) + " at s = " +
                            std::to_string(best.worst_s) + ", tau = " + std::to_string(best.worst_tau) +
                            (best.worst_on_boundary ? " (boundary)" : " (interior)"));
}

enum class BoundKind { emanation_sub, emanation_super, convergence_lower, convergence_upper, junction_lower };

inline std::string to_string(BoundKind k) {
    switch (k) {
        case BoundKind::emanation_sub: return "emanation-sub";
        case BoundKind::emanation_super: return "emanation-super";
        case BoundKind::convergence_lower: return "convergence-lower";
        case BoundKind::convergence_upper: return "convergence-upper";
        case BoundKind::junction_lower: return "junction-lower";
    }
    return {};
}

inline bool is_lower(BoundKind k) {
    return k == BoundKind::emanation_sub || k == BoundKind::convergence_lower || k == BoundKind::junction_lower;
}

struct BoundParams {
    double delta = 0.0;
    double delta_tilde = 0.0;
    double delta_prime = 0.0;
    double omega = 0.0;
    double M_delta = 0.0;
    double k = 0.0;
    double T = 0.0;        // validity horizon (upper for emanation kinds, lower bound of time otherwise)
    double L = 0.0;
    double lambda = 0.0;
    double c = 0.0;
    double gamma = 0.0;
    double sigma = 0.0;
    double M = 0.0;        // Lipschitz bound of f on [0,1]
    // emanation-super
    double eps = 0.0;
    double L_eps = 0.0;
    // convergence kinds
    double L1 = 0.0;
    double R = 0.0;
    double t0 = 0.0;       // t1 or t2
    double tau = 0.0;      // tau1 or tau2
    // junction-lower
    double L_i = 0.0;
    double tau2 = 0.0;
    double A = 0.0;
};

struct ParamOptions {
    double factor = 0.9;  // delta as a fraction of its cap
    double eps = 0.0;     // emanation-super level; 0 selects delta'/2
    double L1 = 0.0;      // convergence kinds; 0 selects L
    double R = 0.0;       // convergence: 0 selects c omega; junction-lower: slab half-length
    double t0 = 0.0;
    double L_i = 0.0;     // junction-lower slab centre
};

inline BoundParams choose_parameters(BoundKind kind, const WaveProfile& p, const AuxWeight& w, const Nonlinearity& nl,
                                     double L, const ParamOptions& opt = {}) {
    if (!(p.c > 0.0)) throw InfeasibleError(to_string(kind) + " requires a positive front speed");
    if (!(opt.factor > 0.0 && opt.factor <= 1.0)) throw ArgumentError("delta factor must lie in (0, 1]");
    const auto sc = derive_stability_constants(nl);
    BoundParams b;
    b.c = p.c;
    b.lambda = w.lambda;
    b.gamma = sc.gamma;
    b.sigma = sc.sigma;
    b.M = lipschitz_bound(nl);
    b.L = L;
    const double c = p.c, lam = w.lambda;
    switch (kind) {
        case BoundKind::emanation_sub:
        case BoundKind::emanation_super:
            b.delta = opt.factor * std::min(sc.sigma / 2.0, lam * c);
            break;
        case BoundKind::convergence_lower:
        case BoundKind::convergence_upper:
            b.delta = opt.factor * std::min({lam * c, sc.gamma, sc.sigma / 3.0});
            break;
        case BoundKind::junction_lower:
            b.delta = opt.factor * std::min({sc.gamma, sc.sigma / 4.0, lam * c / 2.0, p.r_minus * c / 2.0});
            break;
    }
    b.delta_tilde = b.delta / w.sup();
    b.delta_prime = b.delta_tilde * w.inf();
    b.M_delta = profile_width(p, b.delta);
    b.k = min_slope(p, b.M_delta);
    const double Mdp = profile_width(p, std::min(b.delta_prime, 0.5));
    switch (kind) {
        case BoundKind::emanation_sub:
            b.omega = 1.1 * (b.gamma + b.M) * std::exp(lam * (b.M_delta + L + 1.0)) / b.k;
            b.T = -(L + Mdp) / c - 1.0;
            break;
        case BoundKind::emanation_super: {
            b.omega = 1.1 * (b.gamma + b.M) * std::exp(lam * (b.M_delta + L + 1.0)) / b.k;
            b.eps = opt.eps > 0.0 ? opt.eps : b.delta_prime / 2.0;
            if (!(b.eps < b.delta_prime)) throw ArgumentError("emanation-super level must lie below delta'");
            b.L_eps = L + std::log(2.0 * b.delta / b.eps) / lam;
            const double T_sub = -(L + Mdp) / c - 1.0;
            b.T = std::min({T_sub, std::log(1.0 / (c * b.omega)) / b.delta,
                            -(b.L_eps + profile_width(p, b.eps / 2.0) + 1.0) / c});
            break;
        }
        case BoundKind::convergence_lower:
        case BoundKind::convergence_upper:
            b.omega = 1.1 * (b.delta + b.gamma + 2.0 * b.M) / b.k;
            b.L1 = opt.L1 > 0.0 ? opt.L1 : L;
            b.R = opt.R > 0.0 ? opt.R : c * b.omega;
            b.t0 = opt.t0;
            b.T = opt.t0;
            b.tau = kind == BoundKind::convergence_lower ? (b.L1 + b.M_delta + b.R) / c : (b.L1 + Mdp) / c;
            break;
        case BoundKind::junction_lower: {
            b.omega = 1.1 * (b.delta + 4.0 * b.M) / b.k;
            b.A = b.M_delta;
            b.R = opt.R > 0.0 ? opt.R : 2.0 * b.A;
            b.L_i = opt.L_i > 0.0 ? opt.L_i : L + 3.0 * b.R + 1.0;
            b.tau = (b.R - b.L_i - b.A) / c - b.omega;
            b.tau2 = (b.L_i + b.R - b.A) / c - b.omega;
            b.T = (b.L_i - 2.0 * b.R - L) / c;
            if (!(b.T > 0.0)) throw ArgumentError("junction-lower slab leaves no validity window");
            break;
        }
    }
    return b;
}

/** @brief Evaluable sub/supersolution built from a planar front composed with a branch axis. */
struct CandidateBound {
    BoundKind kind = BoundKind::emanation_sub;
    PlanarFront front;
    bool closed_form = false;
    AuxWeight weight;
    BoundParams params;
    BranchSpec branch;
    double anchor = 0.0;

    struct Eval {
        double value = 0.0;  // after clamping/gluing
        double raw = 0.0;    // active smooth piece
        bool active = false; // strictly between clamps, on the smooth piece
        int piece = 0;       // 0 formula, 1 constant level (emanation-super)
    };

    double t_min() const {
        switch (kind) {
            case BoundKind::convergence_lower:
            case BoundKind::convergence_upper: return params.t0;
            case BoundKind::junction_lower: return 0.0;
            default: return -std::numeric_limits<double>::infinity();
        }
    }
    double t_max() const {
        switch (kind) {
            case BoundKind::emanation_sub:
            case BoundKind::emanation_super:
            case BoundKind::junction_lower: return params.T;
            default: return std::numeric_limits<double>::infinity();
        }
    }
    bool valid_time(double t) const { return t >= t_min() - 1e-12 && t <= t_max() + 1e-12; }

    // Spatial validity: convergence kinds live on {s >= L1} of the branch.
    bool valid_point(Vec2 x) const {
        if (kind == BoundKind::convergence_lower || kind == BoundKind::convergence_upper)
            return in_branch(x) && branch.axial(x) >= params.L1 - 1e-12;
        return true;
    }

    bool in_branch(Vec2 x) const {
        const double s = branch.axial(x);
        return s >= 0.0 && std::abs(branch.transverse(x)) <= weight.channel.width(s) / 2.0 + 1e-9;
    }

    // Smooth piece g(t, x) as a function of (t, s, psi).
    double smooth(double t, double s, double psi) const {
        const auto& b = params;
        const double c = front.c;
        switch (kind) {
            case BoundKind::emanation_sub: {
                const double zeta = t - b.omega * std::exp(b.delta * t);
                return front.phi(-s - c * zeta + anchor) - b.delta_tilde * std::exp(-b.lambda * (s - b.L)) * psi;
            }
            case BoundKind::emanation_super: {
                const double zeta = t + b.omega * std::exp(b.delta * t);
                return front.phi(-s - c * zeta + anchor) + b.delta_tilde * std::exp(-b.lambda * (s - b.L)) * psi;
            }
            case BoundKind::convergence_lower: {
                const double d = t - b.t0;
                const double zeta = d + b.omega * std::exp(-b.delta * d) - b.omega + b.tau;
                return front.phi(s - c * zeta + anchor) - b.delta * std::exp(-b.delta * d) -
                       b.delta_tilde * std::exp(-b.lambda * (s - b.L1)) * psi;
            }
            case BoundKind::convergence_upper: {
                const double d = t - b.t0;
                const double zeta = d - b.omega * std::exp(-b.delta * d) + b.omega + b.tau;
                return front.phi(s - c * zeta + anchor) + b.delta * std::exp(-b.delta * d) +
                       b.delta_tilde * std::exp(-b.lambda * (s - b.L1)) * psi;
            }
            case BoundKind::junction_lower: {
                const double z1 = t + b.tau + b.omega * std::exp(-b.delta * t);
                const double z2 = t + b.tau2 + b.omega * std::exp(-b.delta * t);
                return front.phi(-s - c * z1 + anchor) + front.phi(s - c * z2 + anchor) - 1.0 -
                       b.delta * std::exp(-b.delta * t);
            }
        }
        return 0.0;
    }

    Eval evaluate(double t, Vec2 x) const {
        if (!valid_time(t)) throw RegionError(to_string(kind) + " evaluated outside its validity window");
        if (!valid_point(x)) throw RegionError(to_string(kind) + " evaluated outside its spatial region");
        const double s = branch.axial(x);
        const double psi = weight.at(x);
        Eval e;
        switch (kind) {
            case BoundKind::emanation_sub:
                if (!(in_branch(x) && s >= params.L)) return e;
                e.raw = smooth(t, s, psi);
                e.value = std::max(e.raw, 0.0);
                e.active = e.raw > 0.0;
                return e;
            case BoundKind::emanation_super: {
                const double eps = params.eps;
                const bool far = in_branch(x) && s >= params.L_eps;
                const bool mid = in_branch(x) && s >= params.L && !far;
                if (far || mid) e.raw = smooth(t, s, psi);
                if (far || (mid && e.raw <= eps)) {
                    e.value = e.raw;
                    e.active = true;
                    return e;
                }
                e.raw = e.value = eps;
                e.piece = 1;
                e.active = true;
                return e;
            }
            case BoundKind::convergence_lower:
            case BoundKind::junction_lower:
                e.raw = smooth(t, s, psi);
                e.value = std::max(e.raw, 0.0);
                e.active = e.raw > 0.0;
                return e;
            case BoundKind::convergence_upper:
                e.raw = smooth(t, s, psi);
                e.value = std::min(e.raw, 1.0);
                e.active = e.raw < 1.0;
                return e;
        }
        return e;
    }

    double operator()(double t, Vec2 x) const { return evaluate(t, x).value; }
};

inline CandidateBound build_candidate(BoundKind kind, const PlanarFront& front, const AuxWeight& w,
                                      const BoundParams& params, const BranchSpec& branch, double anchor = 0.0,
                                      bool closed_form = false) {
    if (!(params.delta > 0.0 && params.omega > 0.0)) throw ArgumentError("parameters not set for " + to_string(kind));
    if (kind == BoundKind::emanation_super && !(params.eps > 0.0)) throw ArgumentError("emanation-super needs eps");
    CandidateBound cb;
    cb.kind = kind;
    cb.front = front;
    cb.closed_form = closed_form;
    cb.weight = w;
    cb.params = params;
    cb.branch = branch;
    cb.anchor = anchor;
    return cb;
}

struct ResidualReport {
    double worst = 0.0;  // max N for lower kinds, min N for upper kinds
    double worst_t = 0.0;
    Vec2 worst_x{};
    std::size_t evaluated = 0;
    bool analytic = false;
    double tol = 0.0;
    bool pass = true;
};

namespace detail {

// Analytic N for candidates depending on (t, s) only: constant weight, diagonal A.
inline double analytic_residual(const CandidateBound& cb, const Models& m, double t, Vec2 x) {
    const auto& b = cb.params;
    const auto& F = cb.front;
    const double c = F.c;
    const Vec2 e = cb.branch.direction();
    const double s = cb.branch.axial(x);
    double g = 0, gt = 0, gs = 0, gss = 0;
    switch (cb.kind) {
        case BoundKind::emanation_sub: {
            const double ex = b.omega * std::exp(b.delta * t);
            const double z = -s - c * (t - ex) + cb.anchor;
            const double E = b.delta_tilde * std::exp(-b.lambda * (s - b.L));
            g = F.phi(z) - E;
            gt = -c * F.dphi(z) * (1.0 - b.delta * ex);
            gs = -F.dphi(z) + b.lambda * E;
            gss = F.ddphi(z) - b.lambda * b.lambda * E;
            break;
        }
        case BoundKind::emanation_super: {
            const double ex = b.omega * std::exp(b.delta * t);
            const double z = -s - c * (t + ex) + cb.anchor;
            const double E = b.delta_tilde * std::exp(-b.lambda * (s - b.L));
            g = F.phi(z) + E;
            gt = -c * F.dphi(z) * (1.0 + b.delta * ex);
            gs = -F.dphi(z) - b.lambda * E;
            gss = F.ddphi(z) + b.lambda * b.lambda * E;
            break;
        }
        case BoundKind::convergence_lower:
        case BoundKind::convergence_upper: {
            const double sg = cb.kind == BoundKind::convergence_lower ? 1.0 : -1.0;
            const double d = t - b.t0;
            const double ex = b.omega * std::exp(-b.delta * d);
            const double z = s - c * (d + sg * (ex - b.omega) + b.tau) + cb.anchor;
            const double D = b.delta * std::exp(-b.delta * d);
            const double E = b.delta_tilde * std::exp(-b.lambda * (s - b.L1));
            g = F.phi(z) - sg * (D + E);
            gt = -c * F.dphi(z) * (1.0 - sg * b.delta * ex) + sg * b.delta * D;
            gs = F.dphi(z) + sg * b.lambda * E;
            gss = F.ddphi(z) - sg * b.lambda * b.lambda * E;
            break;
        }
        case BoundKind::junction_lower: {
            const double ex = b.omega * std::exp(-b.delta * t);
            const double z1 = -s - c * (t + b.tau + ex) + cb.anchor;
            const double z2 = s - c * (t + b.tau2 + ex) + cb.anchor;
            const double D = b.delta * std::exp(-b.delta * t);
            g = F.phi(z1) + F.phi(z2) - 1.0 - D;
            gt = -c * (F.dphi(z1) + F.dphi(z2)) * (1.0 - b.delta * ex) + b.delta * D;
            gs = -F.dphi(z1) + F.dphi(z2);
            gss = F.ddphi(z1) + F.ddphi(z2);
            break;
        }
    }
    const double aee = m.A.a1(x) * e.x * e.x + m.A.a2(x) * e.y * e.y;
    const double da = m.A.a1.derivative(x, 0) * e.x + m.A.a2.derivative(x, 1) * e.y;
    return gt - (gss * aee + gs * da) + gs * dot(m.q(x), e) - m.f(x, g);
}

inline double fd_residual(const CandidateBound& cb, const Models& m, double t, Vec2 x, double h, double ht) {
    auto g = [&](double tt, Vec2 y) { return cb.smooth(tt, cb.branch.axial(y), cb.weight.at(y)); };
    const double u = g(t, x);
    const double ut = (g(t + ht, x) - g(t - ht, x)) / (2.0 * ht);
    const Vec2 ax[2] = {{1.0, 0.0}, {0.0, 1.0}};
    double div = 0.0, adv = 0.0;
    const Vec2 q = m.q(x);
    for (int k = 0; k < 2; ++k) {
        const auto& a = k == 0 ? m.A.a1 : m.A.a2;
        const double up = g(t, x + h * ax[k]), um = g(t, x - h * ax[k]);
        div += (a(x + 0.5 * h * ax[k]) * (up - u) - a(x - 0.5 * h * ax[k]) * (u - um)) / (h * h);
        adv += (k == 0 ? q.x : q.y) * (up - um) / (2.0 * h);
    }
    return ut - div + adv - m.f(x, u);
}

}  // namespace detail

// Worst signed residual over the samples where the candidate is strictly between its clamps.
// The analytic path applies to constant weights; otherwise centred differences of step fd_h.
inline ResidualReport verify_residual(const CandidateBound& cb, const Models& m, const std::vector<double>& times,
                                      const std::vector<Vec2>& points, double fd_h = 1e-3) {
    ResidualReport rep;
    const bool lower = is_lower(cb.kind);
    rep.analytic = cb.weight.constant;
    rep.tol = rep.analytic && cb.closed_form ? 1e-8 : 5e-3;
    rep.worst = lower ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    for (double t : times) {
        if (!cb.valid_time(t)) throw RegionError("residual sample time outside the validity window");
        for (const Vec2& x : points) {
            if (!cb.valid_point(x)) continue;
            const auto ev = cb.evaluate(t, x);
            if (!ev.active) continue;
            double N;
            if (ev.piece == 1) N = -m.f(x, ev.value);
            else if (rep.analytic) N = detail::analytic_residual(cb, m, t, x);
            else N = detail::fd_residual(cb, m, t, x, fd_h, fd_h);
            ++rep.evaluated;
            if (lower ? N > rep.worst : N < rep.worst) {
                rep.worst = N;
                rep.worst_t = t;
                rep.worst_x = x;
            }
        }
    }
    if (rep.evaluated == 0) rep.worst = 0.0;
    rep.pass = lower ? rep.worst <= rep.tol : rep.worst >= -rep.tol;
    return rep;
}

// Sample points on the straight part of a branch: ns axial stations in [sa, sb], nt transverse stations.
inline std::vector<Vec2> channel_samples(const BranchSpec& b, double sa, double sb, int ns, int nt) {
    std::vector<Vec2> pts;
    const Vec2 e = b.direction(), n = perp(e);
    for (int i = 0; i < ns; ++i) {
        const double s = ns == 1 ? sa : sa + (sb - sa) * i / (ns - 1);
        const double half = b.width(s) / 2.0;
        for (int j = 0; j < nt; ++j) {
            const double tau = nt == 1 ? 0.0 : -half + 2.0 * half * j / (nt - 1);
            pts.push_back(b.shift + s * e + tau * n);
        }
    }
    return pts;
}

struct ResidualSamples {
    std::vector<double> times;
    std::vector<Vec2> points;
};

// Space-time samples covering the moving front of a candidate; the branch is lengthened to hold them.
inline ResidualSamples residual_samples(CandidateBound& cb, int n_times = 10, int n_axial = 400, int n_trans = 3) {
    const auto& par = cb.params;
    const double c = cb.front.c;
    double t0 = 0.0, t1 = 0.0, sa = 0.0, sb = 0.0;
    switch (cb.kind) {
        case BoundKind::emanation_sub:
        case BoundKind::emanation_super:
            t1 = par.T;
            t0 = par.T - 20.0;
            sa = par.L;
            sb = -c * t0 + 40.0;
            break;
        case BoundKind::junction_lower:
            t1 = par.T;
            sb = par.L_i + par.R + c * par.T + 10.0;
            break;
        default:
            t0 = par.t0;
            t1 = par.t0 + 60.0;
            sa = par.L1;
            sb = par.L1 + c * (par.tau + 60.0 + par.omega) + 20.0;
    }
    ResidualSamples out;
    for (int i = 0; i < n_times; ++i) out.times.push_back(n_times == 1 ? t0 : t0 + (t1 - t0) * i / (n_times - 1));
    cb.branch.length = std::max(cb.branch.length, sb + 10.0);
    cb.weight.channel.base.length = cb.branch.length;
    out.points = channel_samples(cb.branch, sa, sb, n_axial, n_trans);
    return out;
}

enum class Direction { lower, upper };

struct OrderingReport {
    double margin = std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
    std::size_t worst_cell = 0;
    std::size_t compared = 0;

    bool pass(double tol = 1e-8) const { return margin >= -tol; }
};

using BoundFunction = std::function<std::optional<double>(std::size_t frame, std::size_t cell)>;

// min over frames and cells of u - b (lower) or b - u (upper); cells where b is undefined are skipped.
inline OrderingReport check_ordering(const std::vector<ScalarField>& traj, const BoundFunction& bound,
                                     Direction dir) {
    OrderingReport rep;
    for (std::size_t f = 0; f < traj.size(); ++f) {
        const auto& u = traj[f];
        for (std::size_t k = 0; k < u.size(); ++k) {
            const auto b = bound(f, k);
            if (!b) continue;
            const double m = dir == Direction::lower ? u.v[k] - *b : *b - u.v[k];
            ++rep.compared;
            if (m < rep.margin) {
                rep.margin = m;
                rep.worst_t = u.t;
                rep.worst_cell = k;
            }
        }
    }
    return rep;
}

// Candidate evaluated at t + time_offset on the cell centres.
inline OrderingReport check_ordering(const std::vector<ScalarField>& traj, const MaskedGrid& g,
                                     const CandidateBound& cb, Direction dir, double time_offset = 0.0) {
    return check_ordering(
        traj,
        [&](std::size_t f, std::size_t k) -> std::optional<double> {
            const double t = traj[f].t + time_offset;
            const Vec2 x = g.center(k);
            if (!cb.valid_time(t) || !cb.valid_point(x)) return std::nullopt;
            return cb(t, x);
        },
        dir);
}

}  // namespace bfront
