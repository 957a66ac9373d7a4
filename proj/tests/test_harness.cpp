#include <gtest/gtest.h>

#include <bfront/harness.hpp>

#include <cstdlib>
#include <filesystem>

using namespace bfront;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"(
[scenario]
name = tiny
kind = planar

[domain]
junction_radius = 2

[branch.1]
angle = 0
width = const(2)
length = 30

[branch.2]
angle = 180
width = const(1.5)
length = 5

[reaction]
theta = 0.3

[numerics]
t_end = 5

[initial]
type = front
branches = 1
s0 = 8
facing = outward

[diagnostics]
receiving = 1
)";

std::string gallery(const std::string& file) { return std::string(BFRONT_SOURCE_DIR) + "/scenarios/" + file; }

std::vector<std::string> gallery_files() {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(std::string(BFRONT_SOURCE_DIR) + "/scenarios"))
        if (e.path().extension() == ".ini") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

fs::path scratch(const std::string& leaf) {
    auto p = fs::temp_directory_path() / ("bfront_harness_" + leaf);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, MinimalDefaults) {
    const auto sc = parse_config(kMinimal);
    EXPECT_EQ(sc.name, "tiny");
    EXPECT_EQ(sc.kind, ScenarioKind::planar);
    EXPECT_DOUBLE_EQ(sc.h, 0.15);
    EXPECT_EQ(sc.sim.dt, 0.0);
    EXPECT_EQ(sc.sim.scheme, Scheme::explicit_euler);
    ASSERT_EQ(sc.domain.branches.size(), 2u);
    EXPECT_EQ(sc.initial.branches, std::vector<int>{0});
    EXPECT_EQ(sc.diagnostics.receiving, std::vector<int>{0});
    EXPECT_EQ(sc.expect.invariant, 1e-12);
    // Branch 2 is far shorter than c t_end + 10 M_0.01.
    ASSERT_FALSE(sc.warnings.empty());
    EXPECT_NE(sc.warnings[0].find("branch"), std::string::npos);
}

TEST(Config, ThresholdOutsideUnitInterval) {
    std::string text = kMinimal;
    text.replace(text.find("theta = 0.3"), 11, "theta = 1.2");
    try {
        parse_config(text);
        FAIL();
    } catch (const ConfigError& e) {
        ASSERT_EQ(e.errors.size(), 1u);
        EXPECT_NE(e.errors[0].find("threshold outside (0,1)"), std::string::npos) << e.errors[0];
        EXPECT_NE(e.errors[0].find("[reaction]"), std::string::npos);
        EXPECT_NE(e.errors[0].find("line 20"), std::string::npos) << e.errors[0];
    }
}

TEST(Config, ReportsEveryError) {
    const std::string text =
        "[scenario]\n"            // 1
        "name = bad name\n"       // 2
        "kind = planar\n"         // 3
        "[domain]\n"              // 4
        "junction_radius = -1\n"  // 5
        "colour = red\n"          // 6
        "[branch.1]\n"            // 7
        "angle = 0\n"             // 8
        "width = const(2)\n"      // 9
        "length = 20\n"           // 10
        "[numerics]\n"            // 11
        "scheme = rk4\n"          // 12
        "t_end = 10\n";           // 13
    try {
        parse_config(text);
        FAIL();
    } catch (const ConfigError& e) {
        auto has = [&](const std::string& a, const std::string& b) {
            for (const auto& m : e.errors)
                if (m.find(a) != std::string::npos && m.find(b) != std::string::npos) return true;
            return false;
        };
        EXPECT_GE(e.errors.size(), 4u);
        EXPECT_TRUE(has("line 2 [scenario]", "name"));
        EXPECT_TRUE(has("line 5 [domain]", "junction radius must be positive"));
        EXPECT_TRUE(has("line 6 [domain]", "unknown key 'colour'"));
        EXPECT_TRUE(has("line 12 [numerics]", "explicit or imex"));
        EXPECT_TRUE(has("[reaction]", ""));
    }
}

TEST(Config, UnknownSectionAndKind) {
    EXPECT_THROW(parse_config("[scenario]\nname = x\nkind = wobble\n"), ConfigError);
    EXPECT_THROW(parse_config(kMinimal + "[extras]\nk = 1\n"), ConfigError);
    EXPECT_THROW(parse_kind("wobble"), ArgumentError);
}

TEST(Config, GalleryRoundTrip) {
    const auto files = gallery_files();
    ASSERT_GE(files.size(), 5u);
    for (const auto& f : files) {
        SCOPED_TRACE(f);
        const auto a = load_scenario(f);
        const auto text = serialize(a);
        const auto b = parse_config(text);
        EXPECT_EQ(serialize(b), text);
        EXPECT_EQ(b.name, a.name);
        EXPECT_EQ(b.kind, a.kind);
        EXPECT_EQ(b.h, a.h);
        EXPECT_EQ(b.domain.branches.size(), a.domain.branches.size());
    }
}

TEST(Config, EmanationMatchesHandBuilt) {
    Scenario sc;
    sc.name = "example1-emanation";
    sc.kind = ScenarioKind::emanation;
    sc.description = "front seeded in branch 1 emanates into branches 2 and 3";
    sc.domain.junction_radius = 4.0;
    for (double ang : {90.0, 210.0, 330.0}) {
        BranchSpec b;
        b.angle_deg = ang;
        b.width = WidthProfile::constant(2.0);
        b.length = 40.0;
        sc.domain.branches.push_back(b);
    }
    sc.h = 0.1;
    sc.models.f.theta = 0.3;
    sc.sim.scheme = Scheme::explicit_euler;
    sc.sim.t_end = 200.0;
    sc.sim.output_every = 1.0;
    sc.initial.type = "seed";
    sc.initial.branches = {0};
    sc.initial.s0 = 15.0;
    sc.diagnostics.certify = {0.1, 0.05};
    sc.diagnostics.speed_window = std::array<double, 2>{10.0, 28.0};
    sc.diagnostics.receiving = {1, 2};
    sc.diagnostics.snapshot_every = 50;
    sc.expect.invariant = 1e-12;
    sc.expect.monotone = 1e-10;
    sc.expect.front_distance = 0.05;
    sc.expect.speed_rel = 0.03;
    sc.expect.certify = true;
    sc.expect.shift_agreement = true;
    EXPECT_EQ(serialize(load_scenario(gallery("example1-emanation.ini"))), serialize(sc));
}

TEST(Config, LoadPrefixesPath) {
    const auto dir = scratch("load");
    const auto path = (dir / "broken.ini").string();
    write_text(path, "[scenario]\nname = x\n");
    try {
        load_scenario(path);
        FAIL();
    } catch (const ConfigError& e) {
        for (const auto& m : e.errors) EXPECT_EQ(m.rfind(path + ": ", 0), 0u) << m;
    }
    EXPECT_THROW(load_scenario((dir / "missing.ini").string()), IoError);
}

TEST(Config, ApplyParameter) {
    const auto sc = parse_config(kMinimal);
    const auto wider = apply_parameter(sc, "branch.2.width", "const(3)");
    EXPECT_EQ(wider.domain.branches[1].width.min_width(), 3.0);
    EXPECT_EQ(wider.domain.branches[0].width.min_width(), 2.0);
    const auto cooler = apply_parameter(sc, "reaction.theta", "0.4");
    EXPECT_EQ(cooler.models.f.theta, 0.4);
    EXPECT_THROW(apply_parameter(sc, "reaction.theta", "1.5"), ConfigError);
    EXPECT_THROW(apply_parameter(sc, "nosuch.key", "1"), ArgumentError);
    EXPECT_THROW(apply_parameter(sc, "theta", "1"), ArgumentError);
}

TEST(Files, SnapshotNamesSortByStep) {
    std::vector<long> steps{7, 1200, 35, 0, 999999, 100};
    std::vector<std::string> names;
    for (long s : steps) names.push_back(snapshot_name("run", s));
    EXPECT_EQ(snapshot_name("run", 42), "run_000000042.field");
    auto sorted_names = names;
    std::sort(sorted_names.begin(), sorted_names.end());
    std::sort(steps.begin(), steps.end());
    for (std::size_t i = 0; i < steps.size(); ++i) EXPECT_EQ(sorted_names[i], snapshot_name("run", steps[i]));
}

TEST(Files, FieldRoundTripIsExact) {
    const auto sc = parse_config(kMinimal);
    const auto g = build_domain(sc.domain, 0.25);
    ScalarField u;
    u.t = 3.0 / 7.0;
    for (std::size_t k = 0; k < g.size(); ++k) u.v.push_back(std::sin(1.0 + 0.37 * k) / 3.0);
    const auto path = (scratch("field") / "u.field").string();
    export_field(u, g, path);
    const auto back = import_field(path);
    EXPECT_EQ(back.u.t, u.t);
    ASSERT_EQ(back.u.v.size(), u.v.size());
    for (std::size_t k = 0; k < u.size(); ++k) ASSERT_EQ(back.u.v[k], u.v[k]) << k;
    EXPECT_EQ(back.grid.nx, g.nx);
    EXPECT_EQ(back.grid.ny, g.ny);
    EXPECT_EQ(back.grid.mask, g.mask);
    ScalarField short_u;
    short_u.v.assign(3, 0.0);
    EXPECT_THROW(export_field(short_u, g, path), ArgumentError);
}

TEST(Run, DeterministicOutputs) {
    auto sc = parse_config(kMinimal);
    sc.h = 0.25;
    sc.sim.output_every = 0.5;
    const auto a = scratch("det_a"), b = scratch("det_b");
    const auto ra = run_scenario(sc, a.string());
    const auto rb = run_scenario(sc, b.string());
    EXPECT_EQ(ra.to_text(), rb.to_text());
    for (const char* f : {"interfaces.csv", "series.csv", "scenario.ini", "grid.txt"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(read_text((a / f).string()), read_text((b / f).string())) << f;
    }
    EXPECT_TRUE(fs::exists(a / "plot.py"));
    EXPECT_TRUE(fs::exists(a / "report.txt"));
    EXPECT_EQ(parse_config(read_text((a / "scenario.ini").string())).name, "tiny");
    const auto quiet = run_scenario(sc, (fs::temp_directory_path() / "bfront_unused").string(), {0, false});
    EXPECT_TRUE(quiet.files.empty());
    EXPECT_EQ(quiet.to_text(), ra.to_text());
}

TEST(Run, PlotScriptRuns) {
    if (std::system("python3 -c 'import matplotlib, numpy' > /dev/null 2>&1") != 0)
        GTEST_SKIP() << "python3 with matplotlib not available";
    auto sc = parse_config(kMinimal);
    sc.h = 0.25;
    const auto dir = scratch("plot");
    run_scenario(sc, dir.string());
    const std::string cmd = "python3 " + (dir / "plot.py").string() + " " + dir.string() + " > /dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "plots" / "interfaces.png"));
    bool any = false;
    for (const auto& e : fs::directory_iterator(dir / "plots")) any |= e.path().filename().string().rfind("tiny_", 0) == 0;
    EXPECT_TRUE(any);
}

TEST(Run, ErrorsNameTheScenario) {
    auto sc = parse_config(kMinimal);
    sc.h = 1.0;
    try {
        run_scenario(sc, "", {0, false});
        FAIL();
    } catch (const ScenarioError& e) {
        EXPECT_EQ(std::string(e.what()).rfind("scenario 'tiny': ", 0), 0u) << e.what();
    }
}
