#include <gtest/gtest.h>

#include <bfront/diagnostics.hpp>

using namespace bfront;

namespace {

DomainSpec channel(double length) {
    DomainSpec d;
    d.junction_radius = 2.0;
    BranchSpec a, b;
    b.angle_deg = 180.0;
    a.width = b.width = WidthProfile::constant(2.0);
    a.length = b.length = length;
    d.branches = {a, b};
    return d;
}

DomainSpec y_junction(double S) {
    DomainSpec d;
    d.junction_radius = 4.0;
    for (double ang : {90.0, 210.0, 330.0}) {
        BranchSpec b;
        b.angle_deg = ang;
        b.width = WidthProfile::constant(2.0);
        b.length = S;
        d.branches.push_back(b);
    }
    return d;
}

const WaveProfile& profile03() {
    static const WaveProfile p = solve_profile({0.3, Expr::constant(1.0)});
    return p;
}

// Planar front phi(x - pos) on every cell, oriented along +x.
ScalarField planar(const MaskedGrid& g, double pos, double t = 0.0) {
    const auto& p = profile03();
    const double x0 = profile_center(p);
    ScalarField u;
    u.t = t;
    for (std::size_t k = 0; k < g.size(); ++k) u.v.push_back(std::clamp(p.value(g.center(k).x - pos + x0), 0.0, 1.0));
    return u;
}

ScalarField constant_field(const MaskedGrid& g, double v) {
    ScalarField u;
    u.v.assign(g.size(), v);
    return u;
}

}  // namespace

TEST(Interfaces, PlanarFrontSingleCrossing) {
    const auto d = channel(30.0);
    const auto g = build_domain(d, 0.1);
    const auto e = interfaces(planar(g, 12.3), g, d);
    ASSERT_EQ(e.crossings[0].size(), 1u);
    EXPECT_NEAR(e.crossings[0][0], 12.3, g.h);
    EXPECT_EQ(e.state[0], BranchState::fronted);
    EXPECT_TRUE(e.crossings[1].empty());
    EXPECT_EQ(e.state[1], BranchState::invaded);
    EXPECT_FALSE(e.junction_crossing);
    EXPECT_FALSE(e.cap_exceeded);
}

TEST(Interfaces, UniformInvadedBranch) {
    const auto d = y_junction(20.0);
    const auto g = build_domain(d, 0.2);
    const auto e = interfaces(constant_field(g, 0.8), g, d);
    for (std::size_t b = 0; b < 3; ++b) {
        EXPECT_TRUE(e.crossings[b].empty());
        EXPECT_EQ(e.state[b], BranchState::invaded);
    }
    const auto z = interfaces(constant_field(g, 0.1), g, d);
    EXPECT_EQ(z.state[2], BranchState::clear);
}

TEST(Interfaces, BlockGivesTwoCrossings) {
    const auto d = y_junction(30.0);
    const auto g = build_domain(d, 0.1);
    const auto e = interfaces(initial_block(g, d, 2, 10.0, 14.0, 0.95), g, d);
    ASSERT_EQ(e.crossings[2].size(), 2u);
    EXPECT_NEAR(e.crossings[2][0], 10.0, g.h);
    EXPECT_NEAR(e.crossings[2][1], 14.0, g.h);
    EXPECT_LT(e.crossings[2][0], e.crossings[2][1]);
}

TEST(Interfaces, CapFlagsOscillation) {
    const auto d = channel(30.0);
    const auto g = build_domain(d, 0.1);
    ScalarField u;
    for (std::size_t k = 0; k < g.size(); ++k) u.v.push_back(0.5 + 0.4 * std::sin(g.center(k).x));
    const auto e = interfaces(u, g, d);
    EXPECT_GT(e.crossings[0].size(), 4u);
    EXPECT_TRUE(e.cap_exceeded);
    for (std::size_t j = 1; j < e.crossings[0].size(); ++j) EXPECT_LT(e.crossings[0][j - 1], e.crossings[0][j]);
}

TEST(MeanSpeed, SyntheticLine) {
    InterfaceTrack track;
    for (int i = 0; i <= 20; ++i) {
        InterfaceEntry e;
        e.t = i;
        e.crossings = {{3.0 + 0.28 * i}, {}};
        track.push_back(e);
    }
    const auto fit = mean_speed(track, 0, 0.0, 20.0);
    EXPECT_NEAR(fit.speed, 0.28, 1e-12);
    EXPECT_NEAR(fit.r2, 1.0, 1e-12);
    EXPECT_EQ(fit.samples, 21u);
    try {
        mean_speed(track, 1, 0.0, 20.0);
        FAIL();
    } catch (const DiagnosticError& e) {
        EXPECT_NE(std::string(e.what()).find("t = 0"), std::string::npos) << e.what();
    }
    EXPECT_THROW(mean_speed(track, 0, 5.5, 5.9), DiagnosticError);
}

TEST(Certify, PlanarTrajectoryMatchesProfileWidth) {
    const auto d = channel(40.0);
    const auto g = build_domain(d, 0.1);
    const auto& p = profile03();
    std::vector<ScalarField> traj;
    for (int i = 0; i <= 10; ++i) traj.push_back(planar(g, 12.0 + p.c * 2.0 * i, 2.0 * i));
    const std::vector<double> eps{0.01, 0.05, 0.1, 0.25};
    const auto rep = certify_transition_front(traj, g, d, eps);
    EXPECT_EQ(rep.frames, 11u);
    ASSERT_TRUE(rep.pass());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        EXPECT_NEAR(rep.levels[i].measured, profile_width(p, eps[i]), 2 * g.h) << eps[i];
        if (i) {
            EXPECT_LE(rep.levels[i].measured, rep.levels[i - 1].measured);
        }
    }
    const auto half = certify_transition_front(traj, g, d, {0.5});
    EXPECT_LE(half.levels[0].measured, g.h);
    EXPECT_TRUE(half.pass());
}

TEST(Certify, PlateauFailsWithWitness) {
    const auto d = channel(30.0);
    const auto g = build_domain(d, 0.1);
    ScalarField u = constant_field(g, 1.0);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.tag[k] == 1) u.v[k] = 0.6;
    std::vector<ScalarField> traj(3, u);
    for (int i = 0; i < 3; ++i) traj[i].t = 10.0 * i;
    const auto rep = certify_transition_front(traj, g, d, {0.05, 0.3, 0.45});
    EXPECT_FALSE(rep.levels[0].pass);
    EXPECT_FALSE(rep.levels[1].pass);
    EXPECT_TRUE(rep.levels[2].pass);
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(rep.levels[i].witness_branch, 1);
        EXPECT_EQ(rep.levels[i].witness_u, 0.6);
        EXPECT_LT(rep.levels[i].witness_x.x, -2.0);
    }
    EXPECT_THROW(FrontCertifier(g, d, {0.7}), ArgumentError);
}

TEST(Blocking, ConstantStates) {
    const auto d = y_junction(20.0);
    const auto g = build_domain(d, 0.2);
    for (const auto& o : blocking_report(constant_field(g, 1.0), g, d, 0.05)) EXPECT_EQ(o.outcome, Outcome::invaded);
    for (const auto& o : blocking_report(constant_field(g, 0.0), g, d, 0.05)) EXPECT_EQ(o.outcome, Outcome::blocked);
    ScalarField mixed = constant_field(g, 1.0);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.tag[k] == 2 && g.s[k] > 18.0) mixed.v[k] = 0.3;
    const auto r = blocking_report(mixed, g, d, 0.05);
    EXPECT_EQ(r[0].outcome, Outcome::invaded);
    EXPECT_EQ(r[2].outcome, Outcome::indeterminate);
    EXPECT_EQ(r[2].min_value, 0.3);
    EXPECT_EQ(r[2].max_value, 1.0);
    EXPECT_NEAR(r[2].s_from, 4.0 + 2.0 * 16.0 / 3.0, 1e-12);
}

TEST(FrontDistance, SelfFit) {
    const auto d = channel(40.0);
    const auto g = build_domain(d, 0.1);
    const auto& p = profile03();
    const auto fit = front_distance(planar(g, 13.3), g, d, 0, p, Facing::outward);
    EXPECT_LE(fit.distance, 2 * g.h);
    EXPECT_NEAR(fit.shift, 13.3, g.h);
    EXPECT_NEAR(fit.tau, fit.shift / p.c, 1e-12);
    // Branch 1 points to -x, so a front at x = -13.3 faces inward there.
    const auto back = planar(g, -13.3);
    const auto inward = front_distance(back, g, d, 1, p, Facing::inward);
    EXPECT_LE(inward.distance, 2 * g.h);
    EXPECT_NEAR(inward.shift, 13.3, g.h);
    EXPECT_THROW(front_distance(constant_field(g, 1.0), g, d, 0, p, Facing::outward), DiagnosticError);
}

TEST(FrontDistance, SymmetricReceivingBranches) {
    const auto d = y_junction(30.0);
    const auto g = build_domain(d, 0.2);
    const auto& p = profile03();
    Models m;
    m.f.theta = 0.3;
    const Discretization D(g, m);
    SimConfig cfg;
    cfg.t_end = 110.0;
    const auto r = run(initial_front(g, d, 0, 8.0, p, Facing::inward), cfg, D);
    double asym = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const int gi = g.grid_index[k];
        const int mirror = g.cell_of[(gi / g.nx) * g.nx + (g.nx - 1 - gi % g.nx)];
        ASSERT_GE(mirror, 0);
        asym = std::max(asym, std::abs(r.final.v[k] - r.final.v[mirror]));
    }
    EXPECT_LE(asym, 1e-10);
    const auto f1 = front_distance(r.final, g, d, 1, p, Facing::outward);
    const auto f2 = front_distance(r.final, g, d, 2, p, Facing::outward);
    EXPECT_NEAR(f1.distance, f2.distance, 1e-10);
    EXPECT_NEAR(f1.tau, f2.tau, g.h / p.c);
    EXPECT_GT(f1.shift, 4.0);
}

TEST(TailFit, MatchesProfileRates) {
    const auto d = channel(40.0);
    const auto g = build_domain(d, 0.1);
    const auto& p = profile03();
    const auto rates = tail_rates(p);
    const auto u = planar(g, 15.0);
    const auto ahead = tail_fit(u, g, 0, TailSide::toward_zero);
    EXPECT_NEAR(ahead.rate, rates.r_plus, 0.05 * rates.r_plus);
    EXPECT_GE(ahead.r2, 0.99);
    const auto behind = tail_fit(u, g, 1, TailSide::toward_one);
    EXPECT_NEAR(behind.rate, rates.r_minus, 0.05 * rates.r_minus);
    EXPECT_TRUE(std::isinf(tail_fit(constant_field(g, 1.0), g, 0, TailSide::toward_one).rate));

    ScalarField wavy;
    for (std::size_t k = 0; k < g.size(); ++k)
        wavy.v.push_back(1e-4 * (1.5 + std::sin(3.0 * g.center(k).x)));
    EXPECT_THROW(tail_fit(wavy, g, 0, TailSide::toward_zero), DiagnosticError);
}
