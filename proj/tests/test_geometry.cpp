#include <gtest/gtest.h>

#include <bfront/geometry.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <set>

using namespace bfront;

namespace {

DomainSpec straight_channel(double width, double L, double length) {
    DomainSpec d;
    d.junction_radius = L;
    BranchSpec a, b;
    a.angle_deg = 0.0;
    b.angle_deg = 180.0;
    a.width = b.width = WidthProfile::constant(width);
    a.length = b.length = length;
    d.branches = {a, b};
    return d;
}

DomainSpec y_junction(double S = 40.0) {
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

// Rotate the point into the branch frame with plain trigonometry and test the box.
int oracle_branch(const DomainSpec& d, Vec2 x) {
    int found = -1;
    for (std::size_t i = 0; i < d.branches.size(); ++i) {
        const auto& b = d.branches[i];
        const double a = b.angle_deg * std::numbers::pi / 180.0;
        const double s = std::cos(a) * x.x + std::sin(a) * x.y;
        const double t = -std::sin(a) * x.x + std::cos(a) * x.y;
        if (s > 0 && s < b.length && std::abs(t) < b.width(s) / 2) found = static_cast<int>(i);
    }
    return found;
}

}  // namespace

TEST(BuildDomain, StraightChannelColumns) {
    const auto d = straight_channel(2.0, 2.0, 12.0);
    const auto g = build_domain(d, 0.25);
    std::map<int, std::vector<int>> rows_by_col;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const int gi = g.grid_index[k];
        rows_by_col[gi % g.nx].push_back(gi / g.nx);
    }
    ASSERT_GT(rows_by_col.size(), 90u);
    for (auto& [col, rows] : rows_by_col) {
        ASSERT_EQ(rows.size(), 8u) << "column " << col;
        const int lo = *std::min_element(rows.begin(), rows.end());
        const int hi = *std::max_element(rows.begin(), rows.end());
        EXPECT_EQ(hi - lo, 7);
        const int kl = g.cell_of[lo * g.nx + col], kh = g.cell_of[hi * g.nx + col];
        EXPECT_EQ(g.nbr[kl][MaskedGrid::S], -1);
        EXPECT_EQ(g.nbr[kh][MaskedGrid::N], -1);
        EXPECT_FALSE(g.face_open_y(col, lo));
        EXPECT_FALSE(g.face_open_y(col, hi + 1));
    }
}

TEST(BuildDomain, YJunctionMaskMatchesMembership) {
    const auto d = y_junction();
    const auto g = build_domain(d, 0.1);
    const auto poly = junction_polygon(d);
    std::size_t checked = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const Vec2 c = g.center_ij(i, j);
            const bool analytic = detail::point_in_polygon(poly, c) || oracle_branch(d, c) >= 0;
            ASSERT_EQ(static_cast<bool>(g.mask[j * g.nx + i]), analytic) << c.x << ", " << c.y;
            // The mouth hull contains the disc of radius 4 cos(45.52 deg) > 2.8.
            if (norm(c) < 2.8) {
                ASSERT_TRUE(g.mask[j * g.nx + i]);
            }
            ++checked;
        }
    EXPECT_EQ(checked, static_cast<std::size_t>(g.nx) * g.ny);

    std::set<int> tags;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec2 c = g.center(k);
        tags.insert(g.tag[k]);
        if (norm(c) < 4.0) {
            EXPECT_EQ(g.tag[k], -1);
        } else {
            ASSERT_EQ(g.tag[k], oracle_branch(d, c));
            EXPECT_GT(g.s[k], 0.0);
            EXPECT_LT(g.s[k], 40.0);
        }
    }
    EXPECT_EQ(tags, (std::set<int>{-1, 0, 1, 2}));
    int count = 0;
    g.components([](std::size_t) { return true; }, count);
    EXPECT_EQ(count, 1);
}

TEST(BuildDomain, FaceOpenIffBothInterior) {
    const auto g = build_domain(y_junction(20.0), 0.2);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (std::size_t k = 0; k < g.size(); ++k) {
        const int i = g.grid_index[k] % g.nx, j = g.grid_index[k] / g.nx;
        for (int d = 0; d < 4; ++d) EXPECT_EQ(g.nbr[k][d] >= 0, g.interior(i + di[d], j + dj[d]));
        EXPECT_EQ(g.face_open_x(i, j), g.interior(i - 1, j));
        EXPECT_EQ(g.face_open_y(i, j), g.interior(i, j - 1));
    }
}

TEST(BuildDomain, OverlappingBranchesRejected) {
    auto d = straight_channel(2.0, 2.0, 30.0);
    d.branches[1].angle_deg = 10.0;
    EXPECT_THROW(validate_spec(d), SpecError);
    EXPECT_THROW(build_domain(d, 0.25), SpecError);
}

TEST(BuildDomain, DisconnectedBranchNamed) {
    DomainSpec d;
    d.junction_radius = 1.0;
    d.polygon = {{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}};
    BranchSpec a;
    a.width = WidthProfile::constant(1.2);
    a.length = 20.0;
    BranchSpec b = a;
    b.angle_deg = 90.0;
    b.shift = {5.0, 3.0};
    d.branches = {a, b};
    try {
        build_domain(d, 0.2);
        FAIL() << "expected a geometry error";
    } catch (const GeometryError& e) {
        EXPECT_NE(std::string(e.what()).find("branch 2"), std::string::npos) << e.what();
    }
}

TEST(BuildDomain, Preconditions) {
    EXPECT_THROW(build_domain(straight_channel(2.0, 2.0, 10.0), 0.4), ArgumentError);
    EXPECT_THROW(build_domain(straight_channel(2.0, 2.0, 10.0), 0.0), ArgumentError);
    auto one = straight_channel(2.0, 2.0, 10.0);
    one.branches.pop_back();
    EXPECT_THROW(validate_spec(one), SpecError);
    EXPECT_THROW(junction_polygon(straight_channel(5.0, 2.0, 10.0)), SpecError);
    auto far = straight_channel(2.0, 2.0, 10.0);
    far.polygon = {{-3, -1}, {3, -1}, {3, 1}, {-3, 1}};
    EXPECT_THROW(validate_spec(far), SpecError);
}

TEST(BranchCoordinates, AxisAlignedProjection) {
    const auto d = straight_channel(2.0, 2.0, 20.0);
    const auto bc = branch_coordinates(d, {5.0, 0.3});
    ASSERT_TRUE(bc);
    EXPECT_EQ(bc->branch, 0);
    EXPECT_DOUBLE_EQ(bc->s, 5.0);
    EXPECT_DOUBLE_EQ(bc->tau, 0.3);
    EXPECT_FALSE(branch_coordinates(d, {0.0, 0.0}));
    EXPECT_FALSE(branch_coordinates(d, {5.0, 1.5}));
}

TEST(BranchCoordinates, RotatedBranch) {
    const auto d = y_junction();
    const double a = 210.0 * std::numbers::pi / 180.0;
    const auto bc = branch_coordinates(d, {6.0 * std::cos(a), 6.0 * std::sin(a)});
    ASSERT_TRUE(bc);
    EXPECT_EQ(bc->branch, 1);
    EXPECT_NEAR(bc->s, 6.0, 1e-12);
    EXPECT_NEAR(bc->tau, 0.0, 1e-12);
}

TEST(SkeletonDistance, Examples) {
    const auto d = y_junction();
    const Vec2 e0 = d.branches[0].direction(), e1 = d.branches[1].direction();
    EXPECT_NEAR(skeleton_distance(d, 3.0 * e0, 10.0 * e0), 7.0, 1e-12);
    const double cross_branch = skeleton_distance(d, 5.0 * e0, 5.0 * e1);
    EXPECT_GE(cross_branch, 10.0);
    EXPECT_LE(cross_branch, 5.0 + 5.0 + 2.0 * 4.0);
    EXPECT_EQ(skeleton_distance(d, 7.0 * e1, 7.0 * e1), 0.0);
    EXPECT_THROW(skeleton_distance(d, {30.0, 30.0}, 5.0 * e0), ArgumentError);
}

TEST(SkeletonDistance, MetricProperties) {
    const auto d = y_junction();
    const auto g = build_domain(d, 0.2);
    std::mt19937 rng(20240611u);
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
    for (int trial = 0; trial < 3000; ++trial) {
        const Vec2 a = g.center(pick(rng)), b = g.center(pick(rng)), c = g.center(pick(rng));
        const double ab = skeleton_distance(d, a, b), ba = skeleton_distance(d, b, a);
        const double bc = skeleton_distance(d, b, c), ac = skeleton_distance(d, a, c);
        ASSERT_EQ(ab, ba);
        ASSERT_LE(ac, ab + bc + 1e-12);
        ASSERT_GE(ab, norm(a - b) - 2.0 * d.junction_radius);
    }
}

TEST(BuildDomain, RefinementStability) {
    const auto d = y_junction(30.0);
    const double h = 0.2;
    const double area_c = build_domain(d, h).size() * h * h;
    const double area_f = build_domain(d, h / 2).size() * (h / 2) * (h / 2);
    // Lateral walls from the mouth to the far end, far walls, and three hull chords.
    const double mouth = std::sqrt(16.0 - 1.0);
    const double gap = (120.0 - 2.0 * std::asin(1.0 / 4.0) * 180.0 / std::numbers::pi) * std::numbers::pi / 180.0;
    const double perimeter = 3.0 * (2.0 * (30.0 - mouth) + 2.0) + 3.0 * 2.0 * 4.0 * std::sin(gap / 2.0);
    EXPECT_LT(std::abs(area_c - area_f), 4.0 * perimeter * h);
    const double exact_branches = 3.0 * 2.0 * (30.0 - mouth);
    EXPECT_GT(area_f, exact_branches);
}

TEST(WidthProfile, AsymptoticConvergence) {
    const auto w = WidthProfile::asymptotic(2.0, 3.0, 2.0);
    EXPECT_NEAR(w(0.0), 2.5, 1e-12);
    for (double s = 6.0; s <= 60.0; s += 0.25) EXPECT_LE(std::abs(w(s) - 3.0), 2.0 * std::exp(-s / 2.0));
    for (double s = -20.0; s <= 60.0; s += 0.5) {
        EXPECT_GT(w(s), 0.0);
        EXPECT_LE(w(s), w.max_width() + 1e-12);
        EXPECT_GE(w(s), w.min_width() - 1e-12);
        EXPECT_NEAR(w.derivative(s), (w(s + 1e-5) - w(s - 1e-5)) / 2e-5, 1e-6);
    }
}

TEST(WidthProfile, TableAndRoundTrip) {
    const auto t = WidthProfile::tabulated({{0.0, 2.0}, {4.0, 4.0}, {8.0, 4.0}});
    EXPECT_DOUBLE_EQ(t(2.0), 3.0);
    EXPECT_DOUBLE_EQ(t(10.0), 4.0);
    for (const auto& w : {WidthProfile::constant(1.7), WidthProfile::asymptotic(2.0, 3.0, 2.0), t}) {
        const auto back = WidthProfile::parse(w.to_string());
        EXPECT_EQ(back.to_string(), w.to_string());
        for (double s = 0.0; s < 10.0; s += 0.7) EXPECT_DOUBLE_EQ(back(s), w(s));
    }
    EXPECT_THROW(WidthProfile::constant(-1.0).validate(), SpecError);
}

TEST(ExtendedChannel, ContinuousAtMouth) {
    BranchSpec b;
    b.width = WidthProfile::asymptotic(2.0, 3.0, 2.0);
    const auto ch = ExtendedChannelSpec::natural(b);
    EXPECT_NO_THROW(ch.validate());
    EXPECT_NEAR(ch.width(-1e-9), ch.width(1e-9), 1e-8);
    b.width = WidthProfile::tabulated({{0.0, 2.0}, {4.0, 4.0}});
    const auto tc = ExtendedChannelSpec::natural(b);
    EXPECT_DOUBLE_EQ(tc.width(-5.0), 2.0);
    EXPECT_NO_THROW(tc.validate());
}

TEST(GridFile, RoundTrip) {
    const auto g = build_domain(y_junction(20.0), 0.2);
    const auto path = (std::filesystem::temp_directory_path() / "bfront_grid_roundtrip.txt").string();
    export_grid(g, path);
    const auto r = import_grid(path);
    std::remove(path.c_str());
    EXPECT_EQ(r.nx, g.nx);
    EXPECT_EQ(r.ny, g.ny);
    EXPECT_EQ(r.h, g.h);
    EXPECT_EQ(r.origin, g.origin);
    EXPECT_EQ(r.mask, g.mask);
    EXPECT_EQ(r.nbr, g.nbr);
    EXPECT_THROW(import_grid(path), IoError);
}
