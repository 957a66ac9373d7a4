#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "solver.hpp"
#include "wave1d.hpp"

namespace bfront {

enum class BranchState { fronted, invaded, clear };

inline std::string to_string(BranchState s) {
    switch (s) {
        case BranchState::fronted: return "fronted";
        case BranchState::invaded: return "invaded";
        case BranchState::clear: return "clear";
    }
    return {};
}

/** @brief Cross-sectional mean of a field along one branch, on axial bins of width h. */
struct AxialProfile {
    std::vector<double> s;
    std::vector<double> mean;
};

inline AxialProfile axial_mean(const ScalarField& u, const MaskedGrid& g, int branch) {
    std::vector<double> sum, ssum;
    std::vector<int> cnt;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.tag[k] != branch) continue;
        const auto bin = static_cast<std::size_t>(std::floor(g.s[k] / g.h));
        if (bin >= cnt.size()) {
            sum.resize(bin + 1, 0.0);
            ssum.resize(bin + 1, 0.0);
            cnt.resize(bin + 1, 0);
        }
        sum[bin] += u.v[k];
        ssum[bin] += g.s[k];
        ++cnt[bin];
    }
    AxialProfile out;
    for (std::size_t b = 0; b < cnt.size(); ++b) {
        if (!cnt[b]) continue;
        out.s.push_back(ssum[b] / cnt[b]);
        out.mean.push_back(sum[b] / cnt[b]);
    }
    return out;
}

inline std::vector<double> level_crossings(const AxialProfile& a, double level = 0.5) {
    std::vector<double> out;
    for (std::size_t j = 0; j + 1 < a.s.size(); ++j) {
        const double u0 = a.mean[j] - level, u1 = a.mean[j + 1] - level;
        if ((u0 < 0) != (u1 < 0)) out.push_back(a.s[j] + (a.s[j + 1] - a.s[j]) * u0 / (u0 - u1));
    }
    return out;
}

struct InterfaceEntry {
    double t = 0.0;
    std::vector<std::vector<double>> crossings;  // per branch, increasing
    std::vector<BranchState> state;
    std::vector<double> branch_mean;             // ordering side at each branch mouth
    double junction_mean = 0.0;
    bool junction_crossing = false;
    bool cap_exceeded = false;
};

using InterfaceTrack = std::vector<InterfaceEntry>;

inline InterfaceEntry interfaces(const ScalarField& u, const MaskedGrid& g, const DomainSpec& spec, int cap = 4) {
    InterfaceEntry e;
    e.t = u.t;
    const int m = static_cast<int>(spec.size());
    e.crossings.resize(m);
    e.state.resize(m);
    e.branch_mean.resize(m);
    for (int b = 0; b < m; ++b) {
        const auto a = axial_mean(u, g, b);
        e.crossings[b] = level_crossings(a);
        if (static_cast<int>(e.crossings[b].size()) > cap) e.cap_exceeded = true;
        double mean = 0.0;
        for (double v : a.mean) mean += v;
        e.branch_mean[b] = a.mean.empty() ? 0.0 : mean / a.mean.size();
        if (!e.crossings[b].empty()) e.state[b] = BranchState::fronted;
        else e.state[b] = (!a.mean.empty() && a.mean.front() >= 0.5) ? BranchState::invaded : BranchState::clear;
    }
    double jsum = 0.0;
    int jcnt = 0;
    bool above = false, below = false;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.tag[k] >= 0) continue;
        jsum += u.v[k];
        ++jcnt;
        (u.v[k] >= 0.5 ? above : below) = true;
    }
    e.junction_mean = jcnt ? jsum / jcnt : 0.0;
    e.junction_crossing = above && below;
    return e;
}

struct SpeedFit {
    double speed = 0.0;
    double r2 = 0.0;
    std::size_t samples = 0;
};

inline SpeedFit mean_speed(const InterfaceTrack& track, int branch, double ta, double tb) {
    std::vector<double> t, x;
    for (const auto& e : track) {
        if (e.t < ta - 1e-12 || e.t > tb + 1e-12) continue;
        if (branch < 0 || branch >= static_cast<int>(e.crossings.size())) throw ArgumentError("no such branch");
        if (e.crossings[branch].size() != 1)
            throw DiagnosticError("branch " + std::to_string(branch + 1) + " has " +
                                  std::to_string(e.crossings[branch].size()) + " crossings at t = " +
                                  std::to_string(e.t));
        t.push_back(e.t);
        x.push_back(e.crossings[branch][0]);
    }
    if (t.size() < 2) throw DiagnosticError("fewer than two probe times in the speed window");
    const auto fit = detail::least_squares(t, x);
    return {fit.slope, fit.r2, t.size()};
}

struct CertificationLevel {
    double eps = 0.0;
    double measured = 0.0;  // smallest band M with the level conditions outside it
    double limit = 0.0;
    bool pass = false;
    double witness_t = 0.0;
    Vec2 witness_x{};
    double witness_u = 0.0;
    int witness_branch = -1;
};

struct CertificationReport {
    std::vector<CertificationLevel> levels;
    double junction_slack = 0.0;  // skeleton distance error bound (junction diameter)
    std::size_t frames = 0;

    bool pass() const {
        return std::all_of(levels.begin(), levels.end(), [](const auto& l) { return l.pass; });
    }
};

/** @brief Accumulates the transition-front band measurement over probe times. */
class FrontCertifier {
public:
    // band_limit <= 0 selects half of the shortest branch beyond the junction disc.
    FrontCertifier(const MaskedGrid& g, const DomainSpec& spec, std::vector<double> eps, double band_limit = 0.0)
        : g_(&g), spec_(&spec) {
        double shortest = std::numeric_limits<double>::infinity();
        for (const auto& b : spec.branches) shortest = std::min(shortest, b.length - spec.junction_radius);
        const double limit = band_limit > 0.0 ? band_limit : shortest / 2.0;
        for (double e : eps) {
            if (!(e > 0.0 && e <= 0.5)) throw ArgumentError("certification level must lie in (0, 1/2]");
            CertificationLevel l;
            l.eps = e;
            l.limit = limit;
            report_.levels.push_back(l);
        }
        report_.junction_slack = 2.0 * spec.junction_radius;
        pos_.resize(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            const Vec2 x = g.center(k);
            if (g.tag[k] >= 0) pos_[k] = {g.tag[k], g.s[k] + norm(spec.branches[g.tag[k]].shift), x};
            else pos_[k] = {-1, norm(x), x};
        }
    }

    void add(const ScalarField& u) {
        const auto& g = *g_;
        const auto& spec = *spec_;
        const auto e = interfaces(u, g, spec);
        std::vector<SkeletonPos> gamma;
        for (std::size_t b = 0; b < e.crossings.size(); ++b)
            for (double xi : e.crossings[b]) {
                const auto& br = spec.branches[b];
                gamma.push_back({static_cast<int>(b), xi + norm(br.shift), br.shift + xi * br.direction()});
            }
        if (gamma.empty() || e.junction_crossing) gamma.push_back({-1, 0.0, {0.0, 0.0}});

        std::vector<AxialProfile> prof(spec.size());
        for (std::size_t b = 0; b < spec.size(); ++b) prof[b] = axial_mean(u, g, static_cast<int>(b));
        auto plus_side = [&](std::size_t k) {
            if (g.tag[k] < 0) return e.junction_mean >= 0.5;
            const auto& a = prof[g.tag[k]];
            const auto it = std::lower_bound(a.s.begin(), a.s.end(), g.s[k] - 0.5 * g.h);
            std::size_t j = std::min<std::size_t>(it - a.s.begin(), a.s.size() - 1);
            if (j + 1 < a.s.size() && std::abs(a.s[j + 1] - g.s[k]) < std::abs(a.s[j] - g.s[k])) ++j;
            return a.mean[j] >= 0.5;
        };
        for (std::size_t k = 0; k < g.size(); ++k) {
            const bool plus = plus_side(k);
            double d = std::numeric_limits<double>::infinity();
            for (const auto& p : gamma) d = std::min(d, skeleton_distance(pos_[k], p));
            for (auto& l : report_.levels) {
                const bool bad = plus ? u.v[k] < 1.0 - l.eps : u.v[k] > l.eps;
                if (bad && d > l.measured) {
                    l.measured = d;
                    l.witness_t = u.t;
                    l.witness_x = g.center(k);
                    l.witness_u = u.v[k];
                    l.witness_branch = g.tag[k];
                }
            }
        }
        ++report_.frames;
    }

    CertificationReport report() const {
        auto r = report_;
        for (auto& l : r.levels) l.pass = l.measured <= l.limit;
        return r;
    }

private:
    const MaskedGrid* g_;
    const DomainSpec* spec_;
    std::vector<SkeletonPos> pos_;
    CertificationReport report_;
};

inline CertificationReport certify_transition_front(const std::vector<ScalarField>& trajectory, const MaskedGrid& g,
                                                    const DomainSpec& spec, const std::vector<double>& eps,
                                                    double band_limit = 0.0) {
    FrontCertifier c(g, spec, eps, band_limit);
    for (const auto& u : trajectory) c.add(u);
    return c.report();
}

enum class Outcome { invaded, blocked, indeterminate };

inline std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::invaded: return "invaded";
        case Outcome::blocked: return "blocked";
        case Outcome::indeterminate: return "indeterminate";
    }
    return {};
}

struct BranchOutcome {
    Outcome outcome = Outcome::indeterminate;
    double min_value = 0.0;
    double max_value = 0.0;
    double s_from = 0.0;
    double s_to = 0.0;
};

// Probe region: the far third of each branch beyond the junction disc.
inline std::vector<BranchOutcome> blocking_report(const ScalarField& p, const MaskedGrid& g, const DomainSpec& spec,
                                                  double eps_block) {
    std::vector<BranchOutcome> out(spec.size());
    const double L = spec.junction_radius;
    for (std::size_t b = 0; b < spec.size(); ++b) {
        auto& o = out[b];
        const double smax = spec.branches[b].length;
        o.s_from = L + 2.0 * (smax - L) / 3.0;
        o.s_to = smax;
        o.min_value = std::numeric_limits<double>::infinity();
        o.max_value = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.tag[k] != static_cast<int>(b) || g.s[k] < o.s_from) continue;
            o.min_value = std::min(o.min_value, p.v[k]);
            o.max_value = std::max(o.max_value, p.v[k]);
        }
        if (o.min_value >= 1.0 - eps_block) o.outcome = Outcome::invaded;
        else if (o.max_value <= 1.0 - eps_block) o.outcome = Outcome::blocked;
        else o.outcome = Outcome::indeterminate;
    }
    return out;
}

struct FrontFit {
    double shift = 0.0;     // axial position s* of the fitted planar front
    double tau = 0.0;       // time shift s* / c
    double distance = 0.0;  // sup distance of the mean profile to the fitted front
};

// Fits phi(s - s*) (outward) or phi(s* - s) (inward) to the mean profile on s >= L + 2.
inline FrontFit front_distance(const ScalarField& u, const MaskedGrid& g, const DomainSpec& spec, int branch,
                               const WaveProfile& p, Facing facing) {
    if (branch < 0 || branch >= static_cast<int>(spec.size())) throw ArgumentError("no such branch");
    const auto a = axial_mean(u, g, branch);
    const auto xs = level_crossings(a);
    if (xs.size() != 1)
        throw DiagnosticError("front_distance needs a single crossing in branch " + std::to_string(branch + 1) +
                              " (found " + std::to_string(xs.size()) + ")");
    const double x0 = profile_center(p);
    const double lo_s = spec.junction_radius + 2.0;
    auto objective = [&](double shift) {
        double d = 0.0;
        for (std::size_t j = 0; j < a.s.size(); ++j) {
            if (a.s[j] < lo_s) continue;
            const double z = facing == Facing::outward ? a.s[j] - shift : shift - a.s[j];
            d = std::max(d, std::abs(a.mean[j] - p.value(z + x0)));
        }
        return d;
    };
    double lo = xs[0] - 3.0, hi = xs[0] + 3.0;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c1 = hi - gr * (hi - lo), c2 = lo + gr * (hi - lo);
    double f1 = objective(c1), f2 = objective(c2);
    while (hi - lo > 1e-9) {
        if (f1 < f2) {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - gr * (hi - lo);
            f1 = objective(c1);
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + gr * (hi - lo);
            f2 = objective(c2);
        }
    }
    FrontFit fit;
    fit.shift = 0.5 * (lo + hi);
    fit.distance = objective(fit.shift);
    fit.tau = p.c != 0.0 ? fit.shift / p.c : std::numeric_limits<double>::quiet_NaN();
    return fit;
}

enum class TailSide { toward_one, toward_zero };

struct TailFit {
    double rate = 0.0;
    double r2 = 1.0;
    std::size_t samples = 0;
};

// Exponential rate of approach of the mean profile to 1 (or 0) on bins where the gap lies in [lo, hi].
inline TailFit tail_fit(const ScalarField& u, const MaskedGrid& g, int branch, TailSide side, double lo = 1e-9,
                        double hi = 1e-2) {
    const auto a = axial_mean(u, g, branch);
    std::vector<double> s, y;
    bool any_gap = false;
    for (std::size_t j = 0; j < a.s.size(); ++j) {
        const double gap = side == TailSide::toward_one ? 1.0 - a.mean[j] : a.mean[j];
        if (std::abs(gap) >= 1e-14) any_gap = true;
        if (gap >= lo && gap <= hi) {
            s.push_back(a.s[j]);
            y.push_back(std::log(gap));
        }
    }
    if (!any_gap) return {std::numeric_limits<double>::infinity(), 1.0, 0};
    if (s.size() < 5) throw DiagnosticError("too few bins in the tail range");
    const bool up = y.back() > y.front();
    for (std::size_t j = 1; j < y.size(); ++j)
        if (s[j] - s[j - 1] < 1.5 * g.h && ((y[j] > y[j - 1]) != up))
            throw DiagnosticError("mean profile is not monotone on the tail range");
    const auto fit = detail::least_squares(s, y);
    if (fit.r2 < 0.99) throw DiagnosticError("tail fit quality below R^2 = 0.99");
    return {std::abs(fit.slope), fit.r2, s.size()};
}

}  // namespace bfront
