#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "geometry.hpp"
#include "wave1d.hpp"

namespace bfront {

struct ScalarField {
    std::vector<double> v;
    double t = 0.0;

    std::size_t size() const { return v.size(); }
    double operator[](std::size_t k) const { return v[k]; }
    double& operator[](std::size_t k) { return v[k]; }
    double min() const { return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end()); }
    double max() const { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }
};

enum class Scheme { explicit_euler, imex };

inline std::string to_string(Scheme s) { return s == Scheme::explicit_euler ? "explicit" : "imex"; }

struct SimConfig {
    double dt = 0.0;  // 0 selects 0.9 of the monotonicity bound
    double t_end = 0.0;
    Scheme scheme = Scheme::explicit_euler;
    double output_every = 1.0;
    double tol_ss = 1e-6;
    double lin_tol = 1e-13;
    int max_lin_iter = 1000;
};

namespace detail {

// Fixed block size for reductions: sums are independent of the thread count.
constexpr std::size_t kReduceBlock = 4096;

template <class F>
double blocked_sum(std::size_t n, const F& term) {
    const std::size_t nb = (n + kReduceBlock - 1) / kReduceBlock;
    std::vector<double> part(nb, 0.0);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < static_cast<long>(nb); ++b) {
        double acc = 0.0;
        const std::size_t end = std::min(n, (b + 1) * kReduceBlock);
        for (std::size_t k = b * kReduceBlock; k < end; ++k) acc += term(k);
        part[b] = acc;
    }
    double total = 0.0;
    for (double p : part) total += p;
    return total;
}

}  // namespace detail

/** @brief Precomputed stencil weights of the masked-grid operator. */
class Discretization {
public:
    Discretization(const MaskedGrid& g, const Models& m) : grid_(&g), models_(m) {
        m.validate();
        const std::size_t n = g.size();
        const double h = g.h, h2 = h * h;
        d_.assign(n, {0, 0, 0, 0});
        qx_.resize(n);
        qy_.resize(n);
        rho_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const Vec2 x = g.center(k);
            const Vec2 fe = x + Vec2{h / 2, 0}, fw = x - Vec2{h / 2, 0};
            const Vec2 fn = x + Vec2{0, h / 2}, fs = x - Vec2{0, h / 2};
            if (g.nbr[k][MaskedGrid::E] >= 0) d_[k][MaskedGrid::E] = m.A.a1(fe) / h2;
            if (g.nbr[k][MaskedGrid::W] >= 0) d_[k][MaskedGrid::W] = m.A.a1(fw) / h2;
            if (g.nbr[k][MaskedGrid::N] >= 0) d_[k][MaskedGrid::N] = m.A.a2(fn) / h2;
            if (g.nbr[k][MaskedGrid::S] >= 0) d_[k][MaskedGrid::S] = m.A.a2(fs) / h2;
            const Vec2 q = m.q(x);
            qx_[k] = q.x / h;
            qy_[k] = q.y / h;
            rho_[k] = m.f.rho(x);
        }
        beta2_ = m.A.beta2();
        qmax_ = m.q.bound();
        M_ = lipschitz_bound(m.f);
    }

    const MaskedGrid& grid() const { return *grid_; }
    const Models& models() const { return models_; }
    std::size_t size() const { return grid_->size(); }
    double beta2() const { return beta2_; }
    double lipschitz() const { return M_; }

    double dt_bound(Scheme s) const {
        const double h = grid_->h;
        const double adv = 2.0 * qmax_ / h;
        if (s == Scheme::explicit_euler) return 1.0 / (4.0 * beta2_ / (h * h) + adv + M_);
        return 1.0 / (adv + M_);
    }

    double reaction(std::size_t k, double u) const { return rho_[k] * models_.f.cubic(u); }

    double diffusion(const std::vector<double>& u, std::size_t k) const {
        const auto& nb = grid_->nbr[k];
        const auto& d = d_[k];
        const double uk = u[k];
        double acc = 0.0;
        for (int dir = 0; dir < 4; ++dir)
            if (nb[dir] >= 0) acc += d[dir] * (u[nb[dir]] - uk);
        return acc;
    }

    // Upwind q . grad u; a closed upwind face contributes no gradient.
    double advection(const std::vector<double>& u, std::size_t k) const {
        const auto& nb = grid_->nbr[k];
        const double uk = u[k];
        double acc = 0.0;
        if (qx_[k] > 0) { if (nb[MaskedGrid::W] >= 0) acc += qx_[k] * (uk - u[nb[MaskedGrid::W]]); }
        else if (qx_[k] < 0) { if (nb[MaskedGrid::E] >= 0) acc += qx_[k] * (u[nb[MaskedGrid::E]] - uk); }
        if (qy_[k] > 0) { if (nb[MaskedGrid::S] >= 0) acc += qy_[k] * (uk - u[nb[MaskedGrid::S]]); }
        else if (qy_[k] < 0) { if (nb[MaskedGrid::N] >= 0) acc += qy_[k] * (u[nb[MaskedGrid::N]] - uk); }
        return acc;
    }

    double diagonal_weight(std::size_t k) const { return d_[k][0] + d_[k][1] + d_[k][2] + d_[k][3]; }

private:
    const MaskedGrid* grid_;
    Models models_;
    std::vector<std::array<double, 4>> d_;
    std::vector<double> qx_, qy_, rho_;
    double beta2_ = 1.0, qmax_ = 0.0, M_ = 0.0;
};

inline double resolve_dt(const SimConfig& cfg, const Discretization& D) {
    const double bound = D.dt_bound(cfg.scheme);
    const double dt = cfg.dt > 0.0 ? cfg.dt : 0.9 * bound;
    if (dt > bound * (1.0 + 1e-12))
        throw ArgumentError("time step " + std::to_string(dt) + " exceeds the monotonicity bound " +
                            std::to_string(bound) + " for the " + to_string(cfg.scheme) + " scheme");
    return dt;
}

/** @brief Reusable workspace for time stepping. */
class Stepper {
public:
    Stepper(const Discretization& D, const SimConfig& cfg) : D_(&D), cfg_(cfg), dt_(resolve_dt(cfg, D)) {
        const std::size_t n = D.size();
        next_.resize(n);
        if (cfg.scheme == Scheme::imex) {
            r_.resize(n);
            p_.resize(n);
            Ap_.resize(n);
        }
    }

    double dt() const { return dt_; }
    int last_iterations() const { return iters_; }

    void step(ScalarField& u) { step(u, dt_); }

    void step(ScalarField& u, double dt) {
        const auto& D = *D_;
        const std::size_t n = u.size();
        const auto& v = u.v;
        if (cfg_.scheme == Scheme::explicit_euler) {
#pragma omp parallel for schedule(static)
            for (long k = 0; k < static_cast<long>(n); ++k)
                next_[k] = v[k] + dt * (D.diffusion(v, k) - D.advection(v, k) + D.reaction(k, v[k]));
        } else {
#pragma omp parallel for schedule(static)
            for (long k = 0; k < static_cast<long>(n); ++k)
                next_[k] = v[k] + dt * (D.reaction(k, v[k]) - D.advection(v, k));
            solve_implicit(u.v, dt);
        }
        u.v.swap(next_);
        u.t += dt;
        bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
        for (long k = 0; k < static_cast<long>(n); ++k)
            if (!std::isfinite(u.v[k])) bad = true;
        if (bad) throw SolverError("non-finite value at t = " + std::to_string(u.t));
    }

private:
    // Solves (I - dt D) x = next_ in place with conjugate gradients, starting from next_.
    void solve_implicit(const std::vector<double>&, double dt) {
        const auto& D = *D_;
        const std::size_t n = next_.size();
        std::vector<double>& x = next_;
        const std::vector<double> b = next_;
        auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
#pragma omp parallel for schedule(static)
            for (long k = 0; k < static_cast<long>(n); ++k) out[k] = in[k] - dt * D.diffusion(in, k);
        };
        apply(x, Ap_);
        for (std::size_t k = 0; k < n; ++k) r_[k] = b[k] - Ap_[k];
        p_ = r_;
        double rr = detail::blocked_sum(n, [&](std::size_t k) { return r_[k] * r_[k]; });
        const double tol2 = cfg_.lin_tol * cfg_.lin_tol;
        iters_ = 0;
        while (rr > tol2) {
            if (iters_ >= cfg_.max_lin_iter)
                throw SolverError("conjugate-gradient solve did not converge in " + std::to_string(cfg_.max_lin_iter) +
                                  " iterations");
            apply(p_, Ap_);
            const double pAp = detail::blocked_sum(n, [&](std::size_t k) { return p_[k] * Ap_[k]; });
            const double alpha = rr / pAp;
#pragma omp parallel for schedule(static)
            for (long k = 0; k < static_cast<long>(n); ++k) {
                x[k] += alpha * p_[k];
                r_[k] -= alpha * Ap_[k];
            }
            const double rr_new = detail::blocked_sum(n, [&](std::size_t k) { return r_[k] * r_[k]; });
            const double beta = rr_new / rr;
#pragma omp parallel for schedule(static)
            for (long k = 0; k < static_cast<long>(n); ++k) p_[k] = r_[k] + beta * p_[k];
            rr = rr_new;
            ++iters_;
        }
    }

    const Discretization* D_;
    SimConfig cfg_;
    double dt_;
    std::vector<double> next_, r_, p_, Ap_;
    int iters_ = 0;
};

inline ScalarField step(const ScalarField& u, const SimConfig& cfg, const Discretization& D) {
    Stepper st(D, cfg);
    ScalarField out = u;
    st.step(out);
    return out;
}

struct RunSummary {
    ScalarField final;
    std::size_t steps = 0;
    double min_value = 0.0;
    double max_value = 0.0;
    std::vector<double> probe_times;
};

using Probe = std::function<void(const ScalarField&)>;

// Probes fire at t0 and after every output_every (rounded to whole steps), and at t_end.
inline RunSummary run(ScalarField u0, const SimConfig& cfg, const Discretization& D, const Probe& probe = {}) {
    if (u0.size() != D.size()) throw ArgumentError("field size does not match the grid");
    RunSummary out;
    out.min_value = u0.min();
    out.max_value = u0.max();
    if (probe) probe(u0);
    out.probe_times.push_back(u0.t);
    if (cfg.t_end <= u0.t) {
        out.final = std::move(u0);
        return out;
    }
    Stepper st(D, cfg);
    const double dt = st.dt();
    const double t0 = u0.t;
    const long n_steps = static_cast<long>(std::ceil((cfg.t_end - t0) / dt - 1e-9));
    const long every = std::max(1L, static_cast<long>(std::llround(cfg.output_every / dt)));
    ScalarField u = std::move(u0);
    for (long s = 1; s <= n_steps; ++s) {
        const double this_dt = s < n_steps ? dt : (cfg.t_end - t0) - (n_steps - 1) * dt;
        st.step(u, this_dt);
        if (s == n_steps) u.t = cfg.t_end;
        out.min_value = std::min(out.min_value, u.min());
        out.max_value = std::max(out.max_value, u.max());
        if (s % every == 0 || s == n_steps) {
            if (probe) probe(u);
            out.probe_times.push_back(u.t);
        }
    }
    out.steps = static_cast<std::size_t>(n_steps);
    out.final = std::move(u);
    return out;
}

struct SteadyState {
    ScalarField p;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

// Integrates in chunks of output_every until the time-derivative norm falls below tol_ss or t_end.
inline SteadyState steady_state(ScalarField u0, const SimConfig& cfg, const Discretization& D) {
    Stepper st(D, cfg);
    const double dt = st.dt();
    const long chunk = std::max(1L, static_cast<long>(std::llround(cfg.output_every / dt)));
    SteadyState out;
    ScalarField u = std::move(u0);
    std::vector<double> prev;
    while (u.t < cfg.t_end - 1e-12) {
        prev = u.v;
        const double t_start = u.t;
        for (long s = 0; s < chunk && u.t < cfg.t_end - 1e-12; ++s) st.step(u, std::min(dt, cfg.t_end - u.t));
        double diff = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) diff = std::max(diff, std::abs(u.v[k] - prev[k]));
        out.residual = diff / (u.t - t_start);
        if (out.residual <= cfg.tol_ss) {
            out.converged = true;
            break;
        }
    }
    out.p = std::move(u);
    return out;
}

enum class Facing { inward, outward };

inline std::string to_string(Facing f) { return f == Facing::inward ? "inward" : "outward"; }

// Planar profile composed with the axial coordinate of branch i; the mouth value elsewhere.
inline ScalarField initial_front(const MaskedGrid& g, const DomainSpec& spec, int i, double s0, const WaveProfile& p,
                                 Facing facing) {
    if (i < 0 || i >= static_cast<int>(spec.size())) throw ArgumentError("no such branch");
    const double m = profile_width(p, 0.01);
    const double smax = spec.branches[i].length;
    if (!(s0 > m && s0 < smax - m)) throw ArgumentError("front position outside (M_0.01, S_max - M_0.01)");
    const double x0 = profile_center(p);
    auto phi = [&](double z) { return std::clamp(p.value(z + x0), 0.0, 1.0); };
    const double sign = facing == Facing::inward ? -1.0 : 1.0;
    ScalarField u;
    u.v.assign(g.size(), phi(sign * (0.0 - s0)));
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.tag[k] == i) u.v[k] = phi(sign * (g.s[k] - s0));
    return u;
}

/** @brief Exponential barriers subtracted from an inward front so it becomes a discrete subsolution. */
struct SeedFloor {
    double amplitude = 0.0;  // delta~ in front of exp(-lambda (s - L))
    double decay = 0.0;      // lambda
    double L = 0.0;
    double wall_amplitude = 0.0;
    double wall_decay = 0.0;

    // The wall term compensates the zero-flux truncation, where the planar profile still has slope.
    static SeedFloor make(const WaveProfile& p, double delta_tilde, double lambda, double L, double s0,
                          double s_max) {
        SeedFloor f{delta_tilde, lambda, L, 0.0, 0.0};
        const double fu1 = std::abs(p.f_u(1.0));
        f.wall_decay = 0.5 * std::sqrt(fu1);
        const double x0 = profile_center(p);
        const double gap = 1.0 - p.value(s0 - s_max + x0);
        f.wall_amplitude = 4.0 * p.r_minus * gap / f.wall_decay;
        return f;
    }

    double operator()(double s, double s_max) const {
        return amplitude * std::exp(-decay * (s - L)) + wall_amplitude * std::exp(-wall_decay * (s_max - s));
    }
};

// max(phi(s0 - s) - floor(s), 0) on branch i beyond the junction disc, 0 elsewhere.
inline ScalarField initial_seed(const MaskedGrid& g, const DomainSpec& spec, int i, double s0, const WaveProfile& p,
                                const SeedFloor& floor) {
    if (i < 0 || i >= static_cast<int>(spec.size())) throw ArgumentError("no such branch");
    const double smax = spec.branches[i].length;
    const double x0 = profile_center(p);
    ScalarField u;
    u.v.assign(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.tag[k] != i || g.s[k] < floor.L) continue;
        const double val = std::min(1.0, p.value(s0 - g.s[k] + x0)) - floor(g.s[k], smax);
        u.v[k] = std::max(val, 0.0);
    }
    return u;
}

inline ScalarField initial_block(const MaskedGrid& g, const DomainSpec& spec, int i, double sa, double sb,
                                 double level, double floor_value = 0.0) {
    if (i < 0 || i >= static_cast<int>(spec.size())) throw ArgumentError("no such branch");
    if (!(sb > sa)) throw ArgumentError("empty slab interval");
    ScalarField u;
    u.v.assign(g.size(), floor_value);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.tag[k] == i && g.s[k] >= sa && g.s[k] <= sb) u.v[k] = level;
    return u;
}

// Level 1 on the far parts {s >= L_i} of the listed branches, floor elsewhere.
inline ScalarField initial_plateau(const MaskedGrid& g, const std::vector<std::pair<int, double>>& far_parts,
                                   double floor_value) {
    ScalarField u;
    u.v.assign(g.size(), floor_value);
    for (std::size_t k = 0; k < g.size(); ++k)
        for (const auto& [b, Lb] : far_parts)
            if (g.tag[k] == b && g.s[k] >= Lb) u.v[k] = 1.0;
    return u;
}

inline double total_mass(const ScalarField& u, const MaskedGrid& g) {
    return detail::blocked_sum(u.size(), [&](std::size_t k) { return u.v[k]; }) * g.h * g.h;
}

}  // namespace bfront
