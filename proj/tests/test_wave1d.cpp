#include <gtest/gtest.h>

#include <bfront/wave1d.hpp>

using namespace bfront;

namespace {

Nonlinearity cubic(double th) { return {th, Expr::constant(1.0)}; }

double closed_speed(double th) { return (1.0 - 2.0 * th) / std::sqrt(2.0); }

}  // namespace

TEST(ClosedForm, SolvesProfileEquation) {
    for (double th : {0.2, 0.3, 0.7}) {
        const auto f = PlanarFront::cubic_closed_form(th);
        EXPECT_NEAR(f.c, closed_speed(th), 1e-15);
        for (double z = -20; z <= 20; z += 0.25) {
            const double u = f.phi(z);
            const double r = f.c * f.dphi(z) + f.ddphi(z) + u * (1 - u) * (u - th);
            EXPECT_NEAR(r, 0.0, 1e-15);
        }
    }
}

TEST(SolveProfile, SpeedMatchesClosedForm) {
    for (double th : {0.2, 0.3, 0.4, 0.6, 0.7}) {
        const auto p = solve_profile(cubic(th));
        EXPECT_NEAR(p.c, closed_speed(th), 1e-3) << "theta " << th;
    }
    EXPECT_NEAR(solve_profile(cubic(0.3)).c, 0.2828427, 1e-3);
    EXPECT_LT(solve_profile(cubic(0.7)).c, 0.0);
}

TEST(SolveProfile, BalancedThresholdStands) {
    EXPECT_LE(std::abs(solve_profile(cubic(0.5)).c), 1e-6);
}

TEST(SolveProfile, SignFollowsIntegral) {
    for (double th : {0.2, 0.3, 0.4, 0.6, 0.7}) {
        const auto p = solve_profile(cubic(th));
        EXPECT_EQ(p.c > 0, integral_f(cubic(th)) > 0);
    }
}

TEST(SolveProfile, StrictlyDecreasingWithLimits) {
    const auto p = solve_profile(cubic(0.3));
    for (std::size_t j = 0; j + 1 < p.phi.size(); ++j) ASSERT_LT(p.phi[j + 1], p.phi[j]);
    EXPECT_GE(p.phi.front(), 1.0 - 1e-6);
    EXPECT_LE(p.phi.back(), 1e-6);
    EXPECT_LE(p.residual, 1e-6);
}

TEST(SolveProfile, NodeResidualSmall) {
    const auto p = solve_profile(cubic(0.3));
    for (std::size_t j = 1; j + 1 < p.xi.size(); ++j) {
        const double d2 = (p.phi[j + 1] - 2 * p.phi[j] + p.phi[j - 1]) / (p.h * p.h);
        const double d1 = (p.phi[j + 1] - p.phi[j - 1]) / (2 * p.h);
        EXPECT_LE(std::abs(p.c * d1 + d2 + p.f(p.phi[j])), 1e-3);
    }
}

TEST(SolveProfile, MatchesClosedFormShape) {
    const auto p = solve_profile(cubic(0.3));
    const auto f = PlanarFront::cubic_closed_form(0.3);
    const double x0 = profile_center(p);
    for (double z = -15; z <= 15; z += 0.1) EXPECT_NEAR(p.value(z + x0), f.phi(z), 1e-6);
}

TEST(SolveProfile, GridConvergence) {
    WaveOptions coarse;
    const auto a = solve_profile(cubic(0.3), coarse);
    WaveOptions fine;
    fine.h = coarse.h / 2;
    fine.X = 2.0 * a.X;
    const auto b = solve_profile(cubic(0.3), fine);
    EXPECT_LT(std::abs(a.c - b.c), 1e-4);
}

TEST(SolveProfile, TranslationGauge) {
    const auto p = solve_profile(cubic(0.3));
    WaveOptions o;
    o.phase_at = 2.0;
    const auto q = solve_profile(cubic(0.3), o);
    double d = 0;
    for (double z = -20; z <= 20; z += 0.05) d = std::max(d, std::abs(q.value(z + 2.0) - p.value(z)));
    EXPECT_LE(d, 1e-6);
}

TEST(SolveProfile, ReflectionReversesSpeed) {
    for (double th : {0.3, 0.4}) {
        const auto nl = cubic(th);
        EXPECT_NEAR(solve_profile(nl.reflected()).c, -solve_profile(nl).c, 1e-8);
    }
}

TEST(SolveProfile, RejectsInhomogeneousReaction) {
    EXPECT_THROW(solve_profile({0.3, Expr::tanh_profile(1, 0.2, 0, 0, 1)}), ArgumentError);
}

TEST(ProfileWidth, InvertsClosedForm) {
    const auto p = solve_profile(cubic(0.3));
    EXPECT_NEAR(profile_width(p, 0.01), std::sqrt(2.0) * std::log(99.0), 0.01);
    EXPECT_NEAR(profile_width(p, 0.01), 6.4987, 0.01);
    EXPECT_EQ(profile_width(p, 0.5), 0.0);
    EXPECT_GT(profile_width(p, 0.001), profile_width(p, 0.01));
    EXPECT_GT(profile_width(p, 0.01), profile_width(p, 0.1));
}

TEST(MinSlope, EndpointMinimum) {
    const auto p = solve_profile(cubic(0.3));
    const double d = 0.05;
    const double k = min_slope(p, profile_width(p, d));
    const double oracle = p.c * d * (1 - d) / std::sqrt(2.0);
    EXPECT_NEAR(k, oracle, 0.05 * oracle);
    EXPECT_NEAR(k, 0.00950, 0.05 * 0.00950);
    EXPECT_LE(k, p.c * 0.1768);
    EXPECT_NEAR(min_slope(p, 1e-4), p.c / (4.0 * std::sqrt(2.0)), 1e-4);
}

TEST(MinSlope, DegenerateSpeedRejected) {
    EXPECT_THROW(min_slope(solve_profile(cubic(0.5)), 2.0), InfeasibleError);
}

TEST(TailRates, ClosedFormExponent) {
    const auto p = solve_profile(cubic(0.3));
    const auto r = tail_rates(p);
    EXPECT_NEAR(r.r_plus, 1.0 / std::sqrt(2.0), 0.01 / std::sqrt(2.0));
    EXPECT_NEAR(r.r_minus, 1.0 / std::sqrt(2.0), 0.01 / std::sqrt(2.0));
    for (double th : {0.2, 0.45, 0.7}) {
        const auto q = tail_rates(solve_profile(cubic(th)));
        EXPECT_GT(q.r_plus, 0);
        EXPECT_GT(q.r_minus, 0);
    }
}

TEST(PlanarFront, FromProfileCentred) {
    const auto p = solve_profile(cubic(0.3));
    const auto f = PlanarFront::from_profile(p);
    EXPECT_NEAR(f.phi(0.0), 0.5, 1e-9);
    EXPECT_NEAR(f.c, p.c, 0);
    const auto g = PlanarFront::cubic_closed_form(0.3);
    for (double z = -8; z <= 8; z += 0.5) EXPECT_NEAR(f.dphi(z), g.dphi(z), 1e-5);
}
