#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bounds.hpp"
#include "diagnostics.hpp"

namespace bfront {

/** @brief Every validation problem found in a config, each with its line and section. */
struct ConfigError : Error {
    std::vector<std::string> errors;
    explicit ConfigError(std::vector<std::string> errs) : Error(join(errs)), errors(std::move(errs)) {}

    static std::string join(const std::vector<std::string>& errs) {
        std::string s;
        for (const auto& e : errs) s += (s.empty() ? "" : "\n") + e;
        return s;
    }
};

struct ScenarioError : Error { using Error::Error; };

enum class ScenarioKind { planar, emanation, blocking, sweep, wave_table, junction_trap };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::planar: return "planar";
        case ScenarioKind::emanation: return "emanation";
        case ScenarioKind::blocking: return "blocking";
        case ScenarioKind::sweep: return "sweep";
        case ScenarioKind::wave_table: return "wave-table";
        case ScenarioKind::junction_trap: return "junction-trap";
    }
    return {};
}

inline ScenarioKind parse_kind(std::string_view s) {
    for (auto k : {ScenarioKind::planar, ScenarioKind::emanation, ScenarioKind::blocking, ScenarioKind::sweep,
                   ScenarioKind::wave_table, ScenarioKind::junction_trap})
        if (to_string(k) == s) return k;
    throw ArgumentError("kind '" + std::string(s) +
                        "' not in {planar, emanation, blocking, sweep, wave-table, junction-trap}");
}

struct InitialData {
    std::string type = "none";  // none | front | seed | block | plateau
    std::vector<int> branches;  // zero-based
    double s0 = 0.0;
    Facing facing = Facing::inward;
    double sa = 0.0;
    double sb = 0.0;
    double level = 1.0;
    double floor = 0.0;
};

struct DiagnosticPlan {
    std::vector<double> certify;
    double band_limit = 0.0;  // 0: profile_width(eps) + 2h + 2L for each level
    std::optional<std::array<double, 2>> speed_window;  // axial window in the receiving branches
    std::optional<std::array<double, 2>> speed_times;
    std::vector<int> receiving;  // zero-based
    int snapshot_every = 0;      // in probes; 0 keeps the first and last
    double eps_block = 0.1;
    bool doubling = false;
};

struct SweepPlan {
    std::string parameter;  // section.key, e.g. branch.2.width
    std::vector<std::string> values;
};

struct TrapPlan {
    int branch = 0;
    double L_i = 0.0;
    double R = 0.0;
    double seed = 0.0;         // front position of u_i
    double seed_others = 0.0;  // front position in every other branch for the competitor
    double comparison = 0.0;   // step datum 1 on [comparison, S_max]
    double t_seed = 0.0;
    double t_others = 0.0;
    double t_comparison = 0.0;
    int fit_frame = 20;
};

struct Expectations {
    double invariant = 1e-12;
    std::optional<double> monotone;
    std::optional<double> front_distance;
    std::optional<double> speed_rel;
    std::optional<double> speed_r2;
    std::optional<double> doubling_tol;
    std::optional<double> wave_tol;
    std::optional<double> ordering_tol;
    bool certify = false;
    bool shift_agreement = false;
    bool blocking_monotone = false;
    bool invades = false;
};

struct Scenario {
    std::string name;
    ScenarioKind kind = ScenarioKind::planar;
    std::string description;
    DomainSpec domain;
    double h = 0.0;
    Models models;
    SimConfig sim;
    InitialData initial;
    DiagnosticPlan diagnostics;
    SweepPlan sweep;
    TrapPlan trap;
    std::vector<double> thetas;
    Expectations expect;
    std::vector<std::string> warnings;
};

namespace detail {

struct IniEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct IniSection {
    std::string name;
    int line = 0;
    std::vector<IniEntry> entries;

    const IniEntry* find(const std::string& key) const {
        for (const auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }
    void set(const std::string& key, const std::string& value) {
        for (auto& e : entries)
            if (e.key == key) { e.value = value; return; }
        entries.push_back({key, value, 0});
    }
};

inline std::vector<IniSection> parse_ini(std::string_view text, std::vector<std::string>& errors) {
    std::vector<IniSection> out;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back("line " + std::to_string(line_no) + ": unterminated section header");
                continue;
            }
            const std::string name(trim(line.substr(1, line.size() - 2)));
            for (const auto& s : out)
                if (s.name == name)
                    errors.push_back("line " + std::to_string(line_no) + " [" + name + "]: duplicate section");
            out.push_back({name, line_no, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
            continue;
        }
        if (out.empty()) {
            errors.push_back("line " + std::to_string(line_no) + ": key outside any section");
            continue;
        }
        IniEntry e{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
        if (out.back().find(e.key))
            errors.push_back("line " + std::to_string(line_no) + " [" + out.back().name + "]: duplicate key '" +
                             e.key + "'");
        else
            out.back().entries.push_back(std::move(e));
    }
    return out;
}

inline std::string render_ini(const std::vector<IniSection>& doc) {
    std::string s;
    for (const auto& sec : doc) {
        if (!s.empty()) s += '\n';
        s += "[" + sec.name + "]\n";
        for (const auto& e : sec.entries) s += e.key + " = " + e.value + "\n";
    }
    return s;
}

inline std::vector<double> parse_list(std::string_view s) {
    std::vector<double> out;
    if (trim(s).empty()) return out;
    for (auto p : split(s, ',')) out.push_back(parse_double(p));
    return out;
}

inline std::vector<int> parse_branch_list(std::string_view s) {
    std::vector<int> out;
    if (trim(s).empty()) return out;
    for (auto p : split(s, ',')) {
        const double v = parse_double(p);
        if (v != std::floor(v) || v < 1) throw ArgumentError("branch numbers are positive integers");
        out.push_back(static_cast<int>(v) - 1);
    }
    return out;
}

inline std::array<double, 2> parse_pair(std::string_view s) {
    const auto c = s.find(':');
    if (c == std::string_view::npos) throw ArgumentError("expected a:b");
    return {parse_double(s.substr(0, c)), parse_double(s.substr(c + 1))};
}

inline bool parse_bool(std::string_view s) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ArgumentError("expected true or false");
}

inline std::string list_string(const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + format_double(v[k]);
    return s;
}

inline std::string branch_list_string(const std::vector<int>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + std::to_string(v[k] + 1);
    return s;
}

inline std::string pair_string(const std::array<double, 2>& p) {
    return format_double(p[0]) + ":" + format_double(p[1]);
}

/** @brief Typed reads from one section; failures are collected with their line. */
class SectionReader {
public:
    SectionReader(const IniSection* sec, std::string name, std::vector<std::string>& errors,
                  std::set<std::string> known)
        : sec_(sec), name_(std::move(name)), errors_(&errors) {
        if (!sec_) return;
        for (const auto& e : sec_->entries)
            if (!known.count(e.key)) fail(e.line, "unknown key '" + e.key + "'");
    }

    bool present() const { return sec_ != nullptr; }

    template <class F>
    void read(const std::string& key, F&& apply, bool required = false) {
        const IniEntry* e = sec_ ? sec_->find(key) : nullptr;
        if (!e) {
            if (required) fail(sec_ ? sec_->line : 0, "missing key '" + key + "'");
            return;
        }
        try {
            apply(e->value);
        } catch (const std::exception& ex) {
            fail(e->line, key + ": " + ex.what());
        }
    }

    void fail(int line, const std::string& msg) {
        std::string where = line > 0 ? "line " + std::to_string(line) + " " : "";
        errors_->push_back(where + "[" + name_ + "]: " + msg);
    }

    int line() const { return sec_ ? sec_->line : 0; }

private:
    const IniSection* sec_;
    std::string name_;
    std::vector<std::string>* errors_;
};

inline double estimated_speed(const Models& m) {
    return std::abs(1.0 - 2.0 * m.f.theta) / std::sqrt(2.0) * std::sqrt(m.f.rho_max() * m.A.beta2());
}

// Distance from the centre to the 0.01 level of the closed-form cubic profile, scaled by the diffusion length.
inline double estimated_width(const Models& m) {
    return 2.0 * std::sqrt(2.0) * std::atanh(0.98) * std::sqrt(m.A.beta2() / m.f.rho_min());
}

}  // namespace detail

inline Scenario parse_config(std::string_view text) {
    using namespace detail;
    std::vector<std::string> errors;
    const auto doc = parse_ini(text, errors);
    Scenario sc;
    auto section = [&](const std::string& name) -> const IniSection* {
        for (const auto& s : doc)
            if (s.name == name) return &s;
        return nullptr;
    };

    std::map<int, const IniSection*> branch_secs;
    const std::set<std::string> fixed = {"scenario", "domain",      "reaction", "diffusion", "advection", "numerics",
                                         "initial",  "diagnostics", "sweep",    "trap",      "waves",     "expect"};
    for (const auto& s : doc) {
        if (fixed.count(s.name)) continue;
        if (s.name.rfind("branch.", 0) == 0) {
            try {
                const double n = parse_double(std::string_view(s.name).substr(7));
                if (n != std::floor(n) || n < 1) throw ArgumentError("");
                branch_secs[static_cast<int>(n)] = &s;
            } catch (const std::exception&) {
                errors.push_back("line " + std::to_string(s.line) + " [" + s.name + "]: branch sections are [branch.N]");
            }
            continue;
        }
        errors.push_back("line " + std::to_string(s.line) + " [" + s.name + "]: unknown section");
    }

    SectionReader scen(section("scenario"), "scenario", errors, {"name", "kind", "description"});
    if (!scen.present()) errors.push_back("[scenario]: missing section");
    scen.read("name", [&](const std::string& v) {
        if (v.empty() || v.find_first_of(" /\\") != std::string::npos)
            throw ArgumentError("name must be non-empty without spaces or slashes");
        sc.name = v;
    }, true);
    scen.read("kind", [&](const std::string& v) { sc.kind = parse_kind(v); }, true);
    scen.read("description", [&](const std::string& v) { sc.description = v; });
    const bool needs_domain = sc.kind != ScenarioKind::wave_table;

    SectionReader dom(section("domain"), "domain", errors, {"junction_radius", "h", "polygon"});
    if (needs_domain && !dom.present()) errors.push_back("[domain]: missing section");
    dom.read("junction_radius", [&](const std::string& v) {
        sc.domain.junction_radius = parse_double(v);
        if (!(sc.domain.junction_radius > 0.0)) throw ArgumentError("junction radius must be positive");
    }, needs_domain);
    dom.read("h", [&](const std::string& v) {
        sc.h = parse_double(v);
        if (!(sc.h > 0.0)) throw ArgumentError("grid spacing must be positive");
    });
    dom.read("polygon", [&](const std::string& v) {
        for (auto p : split(v, ',')) {
            const auto xy = parse_pair(p);
            sc.domain.polygon.push_back({xy[0], xy[1]});
        }
        if (sc.domain.polygon.size() < 3) throw ArgumentError("polygon needs at least three vertices");
    });

    int expected = 1;
    for (const auto& [n, sec] : branch_secs) {
        SectionReader br(sec, sec->name, errors, {"angle", "width", "length", "shift"});
        if (n != expected) br.fail(sec->line, "branch sections must be numbered 1, 2, ... without gaps");
        expected = n + 1;
        BranchSpec b;
        br.read("angle", [&](const std::string& v) { b.angle_deg = parse_double(v); }, true);
        br.read("width", [&](const std::string& v) {
            b.width = WidthProfile::parse(v);
            b.width.validate();
        }, true);
        br.read("length", [&](const std::string& v) {
            b.length = parse_double(v);
            if (!(b.length > sc.domain.junction_radius)) throw ArgumentError("length must exceed the junction radius");
        }, true);
        br.read("shift", [&](const std::string& v) {
            const auto xy = parse_pair(v);
            b.shift = {xy[0], xy[1]};
        });
        sc.domain.branches.push_back(b);
    }
    if (needs_domain && sc.domain.branches.empty()) errors.push_back("[branch.1]: at least one branch is required");

    SectionReader rx(section("reaction"), "reaction", errors, {"theta", "rho"});
    rx.read("theta", [&](const std::string& v) {
        sc.models.f.theta = parse_double(v);
        if (!(sc.models.f.theta > 0.0 && sc.models.f.theta < 1.0)) throw ArgumentError("threshold outside (0,1)");
    }, sc.kind != ScenarioKind::wave_table);
    rx.read("rho", [&](const std::string& v) {
        sc.models.f.rho = Expr::parse(v);
        if (!(sc.models.f.rho.lower() > 0.0)) throw ArgumentError("reaction rate must be positive");
    });

    SectionReader df(section("diffusion"), "diffusion", errors, {"a1", "a2"});
    df.read("a1", [&](const std::string& v) { sc.models.A.a1 = Expr::parse(v); });
    df.read("a2", [&](const std::string& v) { sc.models.A.a2 = Expr::parse(v); });
    if (!(sc.models.A.beta1() > 0.0)) df.fail(df.line(), "diffusion must be uniformly positive");

    SectionReader ad(section("advection"), "advection", errors, {"q1", "q2"});
    ad.read("q1", [&](const std::string& v) { sc.models.q.q1 = Expr::parse(v); });
    ad.read("q2", [&](const std::string& v) { sc.models.q.q2 = Expr::parse(v); });

    SectionReader nm(section("numerics"), "numerics", errors,
                     {"scheme", "dt", "t_end", "output_every", "tol_ss"});
    nm.read("scheme", [&](const std::string& v) {
        if (v == "explicit") sc.sim.scheme = Scheme::explicit_euler;
        else if (v == "imex") sc.sim.scheme = Scheme::imex;
        else throw ArgumentError("scheme must be explicit or imex");
    });
    nm.read("dt", [&](const std::string& v) {
        sc.sim.dt = v == "auto" ? 0.0 : parse_double(v);
        if (sc.sim.dt < 0.0) throw ArgumentError("time step must be positive or auto");
    });
    nm.read("t_end", [&](const std::string& v) {
        sc.sim.t_end = parse_double(v);
        if (!(sc.sim.t_end > 0.0)) throw ArgumentError("final time must be positive");
    }, needs_domain && sc.kind != ScenarioKind::junction_trap);
    nm.read("output_every", [&](const std::string& v) {
        sc.sim.output_every = parse_double(v);
        if (!(sc.sim.output_every > 0.0)) throw ArgumentError("output interval must be positive");
    });
    nm.read("tol_ss", [&](const std::string& v) {
        sc.sim.tol_ss = parse_double(v);
        if (!(sc.sim.tol_ss > 0.0)) throw ArgumentError("steady-state tolerance must be positive");
    });

    const int nb = static_cast<int>(sc.domain.branches.size());
    auto check_branches = [&](const std::vector<int>& v) {
        for (int b : v)
            if (b >= nb) throw ArgumentError("branch " + std::to_string(b + 1) + " does not exist");
    };

    SectionReader in(section("initial"), "initial", errors,
                     {"type", "branches", "s0", "facing", "sa", "sb", "level", "floor"});
    in.read("type", [&](const std::string& v) {
        if (v != "none" && v != "front" && v != "seed" && v != "block" && v != "plateau")
            throw ArgumentError("type must be none, front, seed, block or plateau");
        sc.initial.type = v;
    });
    in.read("branches", [&](const std::string& v) {
        sc.initial.branches = parse_branch_list(v);
        check_branches(sc.initial.branches);
    });
    in.read("s0", [&](const std::string& v) { sc.initial.s0 = parse_double(v); });
    in.read("facing", [&](const std::string& v) {
        if (v == "inward") sc.initial.facing = Facing::inward;
        else if (v == "outward") sc.initial.facing = Facing::outward;
        else throw ArgumentError("facing must be inward or outward");
    });
    in.read("sa", [&](const std::string& v) { sc.initial.sa = parse_double(v); });
    in.read("sb", [&](const std::string& v) { sc.initial.sb = parse_double(v); });
    in.read("level", [&](const std::string& v) { sc.initial.level = parse_double(v); });
    in.read("floor", [&](const std::string& v) { sc.initial.floor = parse_double(v); });
    if (sc.initial.type != "none" && sc.initial.branches.empty() && in.present())
        in.fail(in.line(), "initial data needs at least one branch");
    if (sc.initial.type == "front" && sc.initial.branches.size() > 1)
        in.fail(in.line(), "a planar front lives in a single branch");

    SectionReader dg(section("diagnostics"), "diagnostics", errors,
                     {"certify", "band_limit", "speed_window", "speed_times", "receiving", "snapshot_every",
                      "eps_block", "doubling"});
    dg.read("certify", [&](const std::string& v) {
        sc.diagnostics.certify = parse_list(v);
        for (double e : sc.diagnostics.certify)
            if (!(e > 0.0 && e <= 0.5)) throw ArgumentError("certification levels lie in (0, 1/2]");
    });
    dg.read("band_limit", [&](const std::string& v) { sc.diagnostics.band_limit = parse_double(v); });
    dg.read("speed_window", [&](const std::string& v) { sc.diagnostics.speed_window = parse_pair(v); });
    dg.read("speed_times", [&](const std::string& v) { sc.diagnostics.speed_times = parse_pair(v); });
    dg.read("receiving", [&](const std::string& v) {
        sc.diagnostics.receiving = parse_branch_list(v);
        check_branches(sc.diagnostics.receiving);
    });
    dg.read("snapshot_every", [&](const std::string& v) {
        const double n = parse_double(v);
        if (n < 0 || n != std::floor(n)) throw ArgumentError("snapshot interval is a non-negative integer");
        sc.diagnostics.snapshot_every = static_cast<int>(n);
    });
    dg.read("eps_block", [&](const std::string& v) {
        sc.diagnostics.eps_block = parse_double(v);
        if (!(sc.diagnostics.eps_block > 0.0 && sc.diagnostics.eps_block < 1.0))
            throw ArgumentError("blocking level lies in (0,1)");
    });
    dg.read("doubling", [&](const std::string& v) { sc.diagnostics.doubling = parse_bool(v); });

    SectionReader sw(section("sweep"), "sweep", errors, {"parameter", "values"});
    sw.read("parameter", [&](const std::string& v) { sc.sweep.parameter = v; }, sc.kind == ScenarioKind::sweep);
    sw.read("values", [&](const std::string& v) {
        for (auto p : split(v, ';')) sc.sweep.values.emplace_back(p);
    }, sc.kind == ScenarioKind::sweep);

    const bool trap = sc.kind == ScenarioKind::junction_trap;
    SectionReader tp(section("trap"), "trap", errors,
                     {"branch", "L_i", "R", "seed", "seed_others", "comparison", "t_seed", "t_others",
                      "t_comparison", "fit_frame"});
    tp.read("branch", [&](const std::string& v) {
        const auto b = parse_branch_list(v);
        if (b.size() != 1) throw ArgumentError("one branch expected");
        check_branches(b);
        sc.trap.branch = b[0];
    }, trap);
    auto positive = [&](double& dst) {
        return [&dst](const std::string& v) {
            dst = parse_double(v);
            if (!(dst > 0.0)) throw ArgumentError("must be positive");
        };
    };
    tp.read("L_i", positive(sc.trap.L_i), trap);
    tp.read("R", positive(sc.trap.R), trap);
    tp.read("seed", positive(sc.trap.seed), trap);
    tp.read("seed_others", positive(sc.trap.seed_others), trap);
    tp.read("comparison", positive(sc.trap.comparison), trap);
    tp.read("t_seed", positive(sc.trap.t_seed), trap);
    tp.read("t_others", positive(sc.trap.t_others), trap);
    tp.read("t_comparison", positive(sc.trap.t_comparison), trap);
    tp.read("fit_frame", [&](const std::string& v) {
        const double n = parse_double(v);
        if (n < 0 || n != std::floor(n)) throw ArgumentError("fit frame is a non-negative integer");
        sc.trap.fit_frame = static_cast<int>(n);
    });

    SectionReader wv(section("waves"), "waves", errors, {"thetas"});
    wv.read("thetas", [&](const std::string& v) {
        sc.thetas = parse_list(v);
        if (sc.thetas.empty()) throw ArgumentError("at least one threshold is required");
        for (double t : sc.thetas)
            if (!(t > 0.0 && t < 1.0)) throw ArgumentError("threshold outside (0,1)");
    }, sc.kind == ScenarioKind::wave_table);

    SectionReader ex(section("expect"), "expect", errors,
                     {"invariant", "monotone", "front_distance", "speed_rel", "speed_r2", "doubling_tol", "wave_tol",
                      "ordering_tol", "certify", "shift_agreement", "blocking_monotone", "invades"});
    ex.read("invariant", [&](const std::string& v) { sc.expect.invariant = parse_double(v); });
    auto opt = [&](std::optional<double>& dst) {
        return [&dst](const std::string& v) {
            dst = parse_double(v);
            if (!(*dst >= 0.0)) throw ArgumentError("tolerances are non-negative");
        };
    };
    ex.read("monotone", opt(sc.expect.monotone));
    ex.read("front_distance", opt(sc.expect.front_distance));
    ex.read("speed_rel", opt(sc.expect.speed_rel));
    ex.read("speed_r2", opt(sc.expect.speed_r2));
    ex.read("doubling_tol", opt(sc.expect.doubling_tol));
    ex.read("wave_tol", opt(sc.expect.wave_tol));
    ex.read("ordering_tol", opt(sc.expect.ordering_tol));
    ex.read("certify", [&](const std::string& v) { sc.expect.certify = parse_bool(v); });
    ex.read("shift_agreement", [&](const std::string& v) { sc.expect.shift_agreement = parse_bool(v); });
    ex.read("blocking_monotone", [&](const std::string& v) { sc.expect.blocking_monotone = parse_bool(v); });
    ex.read("invades", [&](const std::string& v) { sc.expect.invades = parse_bool(v); });

    if (needs_domain && !sc.domain.branches.empty()) {
        if (sc.h == 0.0) {
            double wmin = std::numeric_limits<double>::infinity();
            for (const auto& b : sc.domain.branches) wmin = std::min(wmin, b.width.min_width());
            sc.h = wmin / 10.0;
        }
        try {
            validate_spec(sc.domain);
        } catch (const std::exception& e) {
            dom.fail(dom.line(), e.what());
        }
        if (sc.kind == ScenarioKind::emanation || sc.kind == ScenarioKind::planar) {
            if (sc.diagnostics.receiving.empty())
                dg.fail(dg.line(), "front scenarios need receiving branches");
            if (sc.initial.type == "none") in.fail(in.line(), "front scenarios need initial data");
        }
        if (errors.empty()) {
            const double need = detail::estimated_speed(sc.models) * sc.sim.t_end + 10.0 * detail::estimated_width(sc.models);
            for (std::size_t b = 0; b < sc.domain.branches.size(); ++b)
                if (sc.domain.branches[b].length < need)
                    sc.warnings.push_back("branch " + std::to_string(b + 1) + " length " +
                                          format_double(sc.domain.branches[b].length) + " is below c t_end + 10 M_0.01 = " +
                                          format_double(need));
        }
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return sc;
}

inline std::string serialize(const Scenario& sc) {
    using namespace detail;
    std::vector<IniSection> doc;
    auto add = [&](const std::string& name) -> IniSection& {
        doc.push_back({name, 0, {}});
        return doc.back();
    };
    {
        auto& s = add("scenario");
        s.set("name", sc.name);
        s.set("kind", to_string(sc.kind));
        if (!sc.description.empty()) s.set("description", sc.description);
    }
    if (sc.kind != ScenarioKind::wave_table) {
        auto& d = add("domain");
        d.set("junction_radius", format_double(sc.domain.junction_radius));
        d.set("h", format_double(sc.h));
        if (!sc.domain.polygon.empty()) {
            std::string p;
            for (std::size_t k = 0; k < sc.domain.polygon.size(); ++k)
                p += (k ? ", " : "") + pair_string({sc.domain.polygon[k].x, sc.domain.polygon[k].y});
            d.set("polygon", p);
        }
        for (std::size_t b = 0; b < sc.domain.branches.size(); ++b) {
            const auto& br = sc.domain.branches[b];
            auto& s = add("branch." + std::to_string(b + 1));
            s.set("angle", format_double(br.angle_deg));
            s.set("width", br.width.to_string());
            s.set("length", format_double(br.length));
            if (br.shift.x != 0.0 || br.shift.y != 0.0) s.set("shift", pair_string({br.shift.x, br.shift.y}));
        }
    }
    {
        auto& r = add("reaction");
        r.set("theta", format_double(sc.models.f.theta));
        r.set("rho", sc.models.f.rho.to_string());
        auto& d = add("diffusion");
        d.set("a1", sc.models.A.a1.to_string());
        d.set("a2", sc.models.A.a2.to_string());
        auto& a = add("advection");
        a.set("q1", sc.models.q.q1.to_string());
        a.set("q2", sc.models.q.q2.to_string());
    }
    if (sc.kind != ScenarioKind::wave_table) {
        auto& n = add("numerics");
        n.set("scheme", to_string(sc.sim.scheme));
        n.set("dt", sc.sim.dt > 0.0 ? format_double(sc.sim.dt) : "auto");
        if (sc.kind != ScenarioKind::junction_trap) n.set("t_end", format_double(sc.sim.t_end));
        n.set("output_every", format_double(sc.sim.output_every));
        n.set("tol_ss", format_double(sc.sim.tol_ss));

        auto& i = add("initial");
        i.set("type", sc.initial.type);
        if (sc.initial.type != "none") {
            i.set("branches", branch_list_string(sc.initial.branches));
            if (sc.initial.type == "front" || sc.initial.type == "seed" || sc.initial.type == "plateau")
                i.set("s0", format_double(sc.initial.s0));
            if (sc.initial.type == "front") i.set("facing", to_string(sc.initial.facing));
            if (sc.initial.type == "block") {
                i.set("sa", format_double(sc.initial.sa));
                i.set("sb", format_double(sc.initial.sb));
                i.set("level", format_double(sc.initial.level));
            }
            if (sc.initial.type == "block" || sc.initial.type == "plateau")
                i.set("floor", format_double(sc.initial.floor));
        }

        auto& g = add("diagnostics");
        const auto& dp = sc.diagnostics;
        if (!dp.certify.empty()) g.set("certify", list_string(dp.certify));
        if (dp.band_limit != 0.0) g.set("band_limit", format_double(dp.band_limit));
        if (dp.speed_window) g.set("speed_window", pair_string(*dp.speed_window));
        if (dp.speed_times) g.set("speed_times", pair_string(*dp.speed_times));
        if (!dp.receiving.empty()) g.set("receiving", branch_list_string(dp.receiving));
        g.set("snapshot_every", std::to_string(dp.snapshot_every));
        g.set("eps_block", format_double(dp.eps_block));
        g.set("doubling", dp.doubling ? "true" : "false");
    }
    if (sc.kind == ScenarioKind::sweep) {
        auto& s = add("sweep");
        s.set("parameter", sc.sweep.parameter);
        std::string v;
        for (std::size_t k = 0; k < sc.sweep.values.size(); ++k) v += (k ? "; " : "") + sc.sweep.values[k];
        s.set("values", v);
    }
    if (sc.kind == ScenarioKind::junction_trap) {
        auto& t = add("trap");
        t.set("branch", std::to_string(sc.trap.branch + 1));
        t.set("L_i", format_double(sc.trap.L_i));
        t.set("R", format_double(sc.trap.R));
        t.set("seed", format_double(sc.trap.seed));
        t.set("seed_others", format_double(sc.trap.seed_others));
        t.set("comparison", format_double(sc.trap.comparison));
        t.set("t_seed", format_double(sc.trap.t_seed));
        t.set("t_others", format_double(sc.trap.t_others));
        t.set("t_comparison", format_double(sc.trap.t_comparison));
        t.set("fit_frame", std::to_string(sc.trap.fit_frame));
    }
    if (sc.kind == ScenarioKind::wave_table) add("waves").set("thetas", list_string(sc.thetas));
    {
        auto& e = add("expect");
        const auto& x = sc.expect;
        e.set("invariant", format_double(x.invariant));
        auto put = [&](const char* k, const std::optional<double>& v) {
            if (v) e.set(k, format_double(*v));
        };
        put("monotone", x.monotone);
        put("front_distance", x.front_distance);
        put("speed_rel", x.speed_rel);
        put("speed_r2", x.speed_r2);
        put("doubling_tol", x.doubling_tol);
        put("wave_tol", x.wave_tol);
        put("ordering_tol", x.ordering_tol);
        if (x.certify) e.set("certify", "true");
        if (x.shift_agreement) e.set("shift_agreement", "true");
        if (x.blocking_monotone) e.set("blocking_monotone", "true");
        if (x.invades) e.set("invades", "true");
    }
    return render_ini(doc);
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Scenario load_scenario(const std::string& path) {
    try {
        return parse_config(read_text(path));
    } catch (const ConfigError& e) {
        std::vector<std::string> errs;
        for (const auto& m : e.errors) errs.push_back(path + ": " + m);
        throw ConfigError(std::move(errs));
    }
}

// Replaces one dotted key (section.key, or branch.N.key) and revalidates.
inline Scenario apply_parameter(const Scenario& sc, const std::string& dotted, const std::string& value) {
    const auto dot = dotted.rfind('.');
    if (dot == std::string::npos || dot == 0) throw ArgumentError("parameter must be section.key: " + dotted);
    const std::string sec = dotted.substr(0, dot), key = dotted.substr(dot + 1);
    std::vector<std::string> errors;
    auto doc = detail::parse_ini(serialize(sc), errors);
    auto it = std::find_if(doc.begin(), doc.end(), [&](const auto& s) { return s.name == sec; });
    if (it == doc.end()) throw ArgumentError("no section [" + sec + "] for parameter " + dotted);
    it->set(key, value);
    return parse_config(detail::render_ini(doc));
}

/** @brief One expected-outcome check and its measured value. */
struct Assertion {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double limit = 0.0;
    std::string detail;
};

struct ScenarioReport {
    std::string name;
    std::string kind;
    std::vector<Assertion> assertions;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::string> warnings;
    std::vector<std::string> files;
    double min_value = std::numeric_limits<double>::infinity();
    double max_value = -std::numeric_limits<double>::infinity();

    bool pass() const {
        return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.pass; });
    }

    const Assertion* find(const std::string& n) const {
        for (const auto& a : assertions)
            if (a.name == n) return &a;
        return nullptr;
    }

    double metric(const std::string& n) const {
        for (const auto& [k, v] : metrics)
            if (k == n) return v;
        throw ArgumentError("no metric '" + n + "'");
    }

    void check(std::string n, bool ok, double value, double limit, std::string detail = {}) {
        assertions.push_back({std::move(n), ok, value, limit, std::move(detail)});
    }

    void observe(double lo, double hi) {
        min_value = std::min(min_value, lo);
        max_value = std::max(max_value, hi);
    }

    std::string to_text() const {
        using detail::format_double;
        std::string s = "scenario " + name + "\nkind " + kind + "\n";
        for (const auto& a : assertions)
            s += "assert " + a.name + " " + (a.pass ? "PASS" : "FAIL") + " value=" + format_double(a.value) +
                 " limit=" + format_double(a.limit) + (a.detail.empty() ? "" : " " + a.detail) + "\n";
        for (const auto& [k, v] : metrics) s += "metric " + k + " " + format_double(v) + "\n";
        for (const auto& w : warnings) s += "warning " + w + "\n";
        s += std::string("status ") + (pass() ? "PASS" : "FAIL") + "\n";
        return s;
    }
};

struct RunOptions {
    int threads = 0;  // 0 keeps the OpenMP default
    bool write_files = true;
};

inline std::string snapshot_name(const std::string& scenario, long step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%09ld.field", step);
    return scenario + buf;
}

// Grid header followed by the time and one value per active cell in grid order.
inline void export_field(const ScalarField& u, const MaskedGrid& g, const std::string& path) {
    if (u.size() != g.size()) throw ArgumentError("field size does not match the grid");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_grid_header(out, g);
    out << "t " << detail::format_double(u.t) << "\nvalues " << u.size() << "\n";
    for (double v : u.v) out << detail::format_double(v) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

struct StoredField {
    MaskedGrid grid;
    ScalarField u;
};

inline StoredField import_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    StoredField f;
    f.grid = read_grid_header(in, path);
    std::string key;
    std::string tv;
    std::size_t n = 0;
    if (!(in >> key >> tv) || key != "t") throw IoError(path + ": expected 't'");
    f.u.t = detail::parse_double(tv);
    if (!(in >> key >> n) || key != "values") throw IoError(path + ": expected 'values'");
    if (n != f.grid.size()) throw IoError(path + ": value count does not match the mask");
    f.u.v.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(in >> tv)) throw IoError(path + ": truncated values");
        f.u.v[k] = detail::parse_double(tv);
    }
    return f;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

inline void emit_plots(const std::string& out_dir) {
    write_text(out_dir + "/plot.py", R"PY(#!/usr/bin/env python3
"""Heatmaps of stored fields and interface traces, read from the run directory."""
import csv
import glob
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

root = os.path.dirname(os.path.abspath(sys.argv[0])) if len(sys.argv) < 2 else sys.argv[1]
figs = os.path.join(root, "plots")
os.makedirs(figs, exist_ok=True)


def read_field(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    head = dict(ln.split(" ", 1) for ln in lines[:4])
    nx, ny, h = int(head["nx"]), int(head["ny"]), float(head["h"])
    ox, oy = map(float, head["origin"].split())
    mask = np.array([[c == "1" for c in row[:nx]] for row in lines[5:5 + ny]])
    t = float(lines[5 + ny].split()[1])
    vals = np.array([float(v) for v in lines[7 + ny:]])
    img = np.full((ny, nx), np.nan)
    img[mask] = vals
    return t, img, (ox, ox + nx * h, oy, oy + ny * h)


for path in sorted(glob.glob(os.path.join(root, "snapshots", "*.field"))):
    t, img, ext = read_field(path)
    fig, ax = plt.subplots(figsize=(5, 5))
    im = ax.imshow(img, origin="lower", extent=ext, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_title("t = %.3f" % t)
    fig.colorbar(im, ax=ax)
    fig.savefig(os.path.join(figs, os.path.basename(path).replace(".field", ".png")), dpi=100)
    plt.close(fig)

track = os.path.join(root, "interfaces.csv")
if os.path.exists(track):
    series = {}
    with open(track) as fh:
        for row in csv.DictReader(fh):
            series.setdefault(int(row["branch"]), []).append((float(row["t"]), float(row["xi"])))
    fig, ax = plt.subplots()
    for b, pts in sorted(series.items()):
        t, x = zip(*pts)
        ax.plot(t, x, ".", ms=2, label="branch %d" % b)
    ax.set_xlabel("t")
    ax.set_ylabel("xi")
    ax.legend()
    fig.savefig(os.path.join(figs, "interfaces.png"), dpi=100)
    plt.close(fig)
)PY");
}

namespace detail {

/** @brief Collects run artifacts for one scenario directory. */
struct Output {
    std::string dir;
    std::string name;
    std::ostringstream interfaces;
    std::ostringstream series;
    std::vector<std::string>* files = nullptr;

    bool enabled() const { return !dir.empty(); }

    void open(const std::string& d, const std::string& n, std::vector<std::string>& f) {
        dir = d;
        name = n;
        files = &f;
        if (!enabled()) return;
        std::error_code ec;
        std::filesystem::create_directories(dir + "/snapshots", ec);
        if (ec) throw IoError("cannot create " + dir + "/snapshots: " + ec.message());
        interfaces << "t,branch,xi\n";
        series << "t,min,max,mass\n";
    }

    void write(const std::string& file, const std::string& text) {
        if (!enabled()) return;
        write_text(dir + "/" + file, text);
        files->push_back(file);
    }

    void snapshot(const ScalarField& u, const MaskedGrid& g, long step) {
        if (!enabled()) return;
        const auto file = "snapshots/" + snapshot_name(name, step);
        export_field(u, g, dir + "/" + file);
        files->push_back(file);
    }

    void record(const ScalarField& u, const MaskedGrid& g, const InterfaceEntry* e) {
        if (!enabled()) return;
        series << format_double(u.t) << ',' << format_double(u.min()) << ',' << format_double(u.max()) << ','
               << format_double(total_mass(u, g)) << '\n';
        if (!e) return;
        for (std::size_t b = 0; b < e->crossings.size(); ++b)
            for (double x : e->crossings[b]) interfaces << format_double(e->t) << ',' << b + 1 << ',' << format_double(x) << '\n';
    }

    void finish(const ScenarioReport& rep, const Scenario& sc, const MaskedGrid* g) {
        if (!enabled()) return;
        write("scenario.ini", serialize(sc));
        if (g) {
            export_grid(*g, dir + "/grid.txt");
            files->push_back("grid.txt");
        }
        if (interfaces.tellp() > 0) write("interfaces.csv", interfaces.str());
        if (series.tellp() > 0) write("series.csv", series.str());
        emit_plots(dir);
        files->push_back("plot.py");
        write("report.txt", rep.to_text());
    }
};

struct MarchStats {
    long steps = 0;
    double min_value = std::numeric_limits<double>::infinity();
    double max_value = -std::numeric_limits<double>::infinity();
    double worst_decrease = 0.0;  // min over steps and cells of u(t+dt) - u(t)
};

// Steps u to t_end; probe(u, step, last) fires every `every` steps and at t_end.
template <class P>
MarchStats march(ScalarField& u, double t_end, Stepper& s, long every, long step0, bool monotone, const P& probe) {
    MarchStats st;
    const double dt = s.dt();
    const double t0 = u.t;
    const long n = t_end > t0 ? static_cast<long>(std::ceil((t_end - t0) / dt - 1e-9)) : 0;
    std::vector<double> prev;
    for (long k = 1; k <= n; ++k) {
        if (monotone) prev = u.v;
        s.step(u, k < n ? dt : (t_end - t0) - (n - 1) * dt);
        if (k == n) u.t = t_end;
        st.min_value = std::min(st.min_value, u.min());
        st.max_value = std::max(st.max_value, u.max());
        if (monotone)
            for (std::size_t c = 0; c < u.size(); ++c) st.worst_decrease = std::min(st.worst_decrease, u.v[c] - prev[c]);
        if (k % every == 0 || k == n) probe(u, step0 + k, k == n);
    }
    st.steps = n;
    return st;
}

inline double seed_delta(const WaveProfile& p, const AuxWeight& w, const Nonlinearity& nl, double L, double& lambda) {
    const auto par = choose_parameters(BoundKind::emanation_sub, p, w, nl, L);
    lambda = par.lambda;
    return par.delta_tilde;
}

inline ScalarField seed_branch(const MaskedGrid& g, const DomainSpec& spec, const Models& m, double h,
                               const WaveProfile& p, int b, double s0) {
    const auto& br = spec.branches[b];
    const auto w = build_weight(ExtendedChannelSpec::natural(br), derive_stability_constants(m.f).gamma, m, h);
    double lambda = 0.0;
    const double dt = seed_delta(p, w, m.f, spec.junction_radius, lambda);
    const auto floor = SeedFloor::make(p, dt, lambda, spec.junction_radius, s0, br.length);
    return initial_seed(g, spec, b, s0, p, floor);
}

inline ScalarField make_initial(const Scenario& sc, const MaskedGrid& g, const WaveProfile* p) {
    const auto& in = sc.initial;
    ScalarField u;
    u.v.assign(g.size(), 0.0);
    if (in.type == "none") return u;
    if (in.type == "plateau") {
        std::vector<std::pair<int, double>> parts;
        for (int b : in.branches) parts.emplace_back(b, in.s0);
        return initial_plateau(g, parts, in.floor);
    }
    if (in.type == "block") {
        u.v.assign(g.size(), in.floor);
        for (int b : in.branches)
            for (std::size_t k = 0; k < g.size(); ++k)
                if (g.tag[k] == b && g.s[k] >= in.sa && g.s[k] <= in.sb) u.v[k] = in.level;
        return u;
    }
    if (!p) throw ArgumentError("front initial data needs the planar profile");
    if (in.type == "front") return initial_front(g, sc.domain, in.branches.at(0), in.s0, *p, in.facing);
    for (int b : in.branches) {
        const auto part = seed_branch(g, sc.domain, sc.models, sc.h, *p, b, in.s0);
        for (std::size_t k = 0; k < g.size(); ++k) u.v[k] = std::min(1.0, u.v[k] + part.v[k]);
    }
    return u;
}

inline void check_invariant(ScenarioReport& rep, double tol) {
    const double excess = std::max(-rep.min_value, rep.max_value - 1.0);
    rep.check("invariant_region", excess <= tol, excess, tol,
              "min=" + format_double(rep.min_value) + " max=" + format_double(rep.max_value));
}

inline void apply_threads(const RunOptions& opt) {
#ifdef _OPENMP
    if (opt.threads > 0) omp_set_num_threads(opt.threads);
#else
    (void)opt;
#endif
}

inline ScenarioReport run_front(const Scenario& sc, const std::string& out_dir) {
    ScenarioReport rep;
    rep.name = sc.name;
    rep.kind = to_string(sc.kind);
    rep.warnings = sc.warnings;
    Output out;
    out.open(out_dir, sc.name, rep.files);

    const auto g = build_domain(sc.domain, sc.h);
    const Discretization D(g, sc.models);
    const auto p = solve_profile(sc.models.f);
    ScalarField u = make_initial(sc, g, &p);
    Stepper proto(D, sc.sim);
    const double dt = proto.dt();
    const long every = std::max(1L, static_cast<long>(std::llround(sc.sim.output_every / dt)));
    rep.metrics.push_back({"dt", dt});
    rep.metrics.push_back({"cells", static_cast<double>(g.size())});
    rep.metrics.push_back({"c", p.c});

    const double L = sc.domain.junction_radius;
    std::vector<FrontCertifier> certs;
    for (double e : sc.diagnostics.certify) {
        const double limit = sc.diagnostics.band_limit > 0.0 ? sc.diagnostics.band_limit
                                                             : profile_width(p, e) + 2.0 * sc.h + 2.0 * L;
        certs.emplace_back(g, sc.domain, std::vector<double>{e}, limit);
    }
    InterfaceTrack track;
    long probes = 0;
    auto probe = [&](const ScalarField& v, long step, bool last) {
        track.push_back(interfaces(v, g, sc.domain));
        out.record(v, g, &track.back());
        for (auto& c : certs) c.add(v);
        const int se = sc.diagnostics.snapshot_every;
        if (probes == 0 || last || (se > 0 && probes % se == 0)) out.snapshot(v, g, step);
        ++probes;
    };
    rep.observe(u.min(), u.max());
    probe(u, 0, false);
    const auto st = march(u, sc.sim.t_end, proto, every, 0, sc.expect.monotone.has_value(), probe);
    rep.observe(st.min_value, st.max_value);
    rep.metrics.push_back({"steps", static_cast<double>(st.steps)});

    check_invariant(rep, sc.expect.invariant);
    if (sc.expect.monotone)
        rep.check("monotone", st.worst_decrease >= -*sc.expect.monotone, st.worst_decrease, -*sc.expect.monotone,
                  "worst one-step decrease");

    const Facing facing = sc.kind == ScenarioKind::planar ? sc.initial.facing : Facing::outward;
    std::vector<double> taus;
    for (int b : sc.diagnostics.receiving) {
        const std::string tag = "branch" + std::to_string(b + 1);
        try {
            double ta = 0.0, tb = sc.sim.t_end;
            if (sc.diagnostics.speed_times) {
                ta = (*sc.diagnostics.speed_times)[0];
                tb = (*sc.diagnostics.speed_times)[1];
            } else if (sc.diagnostics.speed_window) {
                const auto [sa, sb] = *sc.diagnostics.speed_window;
                ta = std::numeric_limits<double>::infinity();
                tb = -ta;
                for (const auto& e : track) {
                    if (e.crossings[b].size() != 1) continue;
                    const double x = e.crossings[b][0];
                    if (x >= sa && ta == std::numeric_limits<double>::infinity()) ta = e.t;
                    if (x <= sb) tb = e.t;
                }
                if (!(tb > ta)) throw DiagnosticError("front never crossed the speed window");
            }
            const auto fit = mean_speed(track, b, ta, tb);
            rep.metrics.push_back({tag + ".speed", fit.speed});
            rep.metrics.push_back({tag + ".speed_r2", fit.r2});
            rep.metrics.push_back({tag + ".speed_t0", ta});
            rep.metrics.push_back({tag + ".speed_t1", tb});
            if (sc.expect.speed_rel) {
                const double rel = std::abs(fit.speed - p.c) / std::abs(p.c);
                rep.check(tag + ".speed", rel <= *sc.expect.speed_rel, rel, *sc.expect.speed_rel,
                          "measured " + format_double(fit.speed) + " vs c " + format_double(p.c));
            }
            if (sc.expect.speed_r2)
                rep.check(tag + ".speed_r2", fit.r2 >= *sc.expect.speed_r2, fit.r2, *sc.expect.speed_r2);
        } catch (const DiagnosticError& e) {
            if (sc.expect.speed_rel) rep.check(tag + ".speed", false, 0.0, *sc.expect.speed_rel, e.what());
        }
        try {
            const auto fit = front_distance(u, g, sc.domain, b, p, facing);
            taus.push_back(fit.tau);
            rep.metrics.push_back({tag + ".front_shift", fit.shift});
            rep.metrics.push_back({tag + ".tau", fit.tau});
            rep.metrics.push_back({tag + ".front_distance", fit.distance});
            if (sc.expect.front_distance)
                rep.check(tag + ".front_distance", fit.distance <= *sc.expect.front_distance, fit.distance,
                          *sc.expect.front_distance);
        } catch (const DiagnosticError& e) {
            if (sc.expect.front_distance) rep.check(tag + ".front_distance", false, 0.0, *sc.expect.front_distance, e.what());
        }
    }
    if (sc.expect.shift_agreement) {
        double spread = std::numeric_limits<double>::infinity();
        if (taus.size() == sc.diagnostics.receiving.size() && !taus.empty())
            spread = *std::max_element(taus.begin(), taus.end()) - *std::min_element(taus.begin(), taus.end());
        const double lim = sc.h / std::abs(p.c);
        rep.check("shift_agreement", spread <= lim, spread, lim, "spread of fitted time shifts");
    }
    for (auto& c : certs) {
        const auto r = c.report();
        const auto& l = r.levels.front();
        const std::string tag = "certify.eps" + format_double(l.eps);
        rep.metrics.push_back({tag + ".measured", l.measured});
        rep.metrics.push_back({tag + ".profile_width", profile_width(p, l.eps)});
        if (sc.expect.certify)
            rep.check(tag, l.pass, l.measured, l.limit,
                      "witness t=" + format_double(l.witness_t) + " u=" + format_double(l.witness_u));
    }
    out.finish(rep, sc, &g);
    return rep;
}

struct BlockingRun {
    ScenarioReport report;
    std::vector<BranchOutcome> outcomes;
    std::vector<BranchOutcome> doubled;
    double doubling_change = 0.0;
};

inline BlockingRun run_blocking(const Scenario& sc, const std::string& out_dir) {
    BlockingRun br;
    auto& rep = br.report;
    rep.name = sc.name;
    rep.kind = to_string(sc.kind);
    rep.warnings = sc.warnings;
    Output out;
    out.open(out_dir, sc.name, rep.files);

    const auto g = build_domain(sc.domain, sc.h);
    const Discretization D(g, sc.models);
    std::optional<WaveProfile> p;
    if (sc.initial.type == "front" || sc.initial.type == "seed") p = solve_profile(sc.models.f);
    ScalarField u = make_initial(sc, g, p ? &*p : nullptr);
    Stepper proto(D, sc.sim);
    const double dt = proto.dt();
    const long every = std::max(1L, static_cast<long>(std::llround(sc.sim.output_every / dt)));
    rep.metrics.push_back({"dt", dt});
    rep.metrics.push_back({"cells", static_cast<double>(g.size())});

    auto probe = [&](const ScalarField& v, long step, bool last) {
        out.record(v, g, nullptr);
        if (last) out.snapshot(v, g, step);
    };
    rep.observe(u.min(), u.max());
    out.snapshot(u, g, 0);
    out.record(u, g, nullptr);
    auto st = march(u, sc.sim.t_end, proto, every, 0, false, probe);
    rep.observe(st.min_value, st.max_value);
    br.outcomes = blocking_report(u, g, sc.domain, sc.diagnostics.eps_block);
    if (sc.diagnostics.doubling) {
        ScalarField w = u;
        const auto st2 = march(w, 2.0 * sc.sim.t_end, proto, every, st.steps, false, probe);
        rep.observe(st2.min_value, st2.max_value);
        for (std::size_t k = 0; k < u.size(); ++k) br.doubling_change = std::max(br.doubling_change, std::abs(w.v[k] - u.v[k]));
        br.doubled = blocking_report(w, g, sc.domain, sc.diagnostics.eps_block);
        rep.metrics.push_back({"doubling_change", br.doubling_change});
        if (sc.expect.doubling_tol) {
            bool same = true;
            for (std::size_t b = 0; b < br.outcomes.size(); ++b) same = same && br.outcomes[b].outcome == br.doubled[b].outcome;
            rep.check("doubling", same && br.doubling_change <= *sc.expect.doubling_tol, br.doubling_change,
                      *sc.expect.doubling_tol, same ? "" : "outcome changed under doubling");
        }
    }
    std::ostringstream csv;
    csv << "branch,outcome,min,max,s_from,s_to\n";
    for (std::size_t b = 0; b < br.outcomes.size(); ++b) {
        const auto& o = br.outcomes[b];
        csv << b + 1 << ',' << to_string(o.outcome) << ',' << format_double(o.min_value) << ','
            << format_double(o.max_value) << ',' << format_double(o.s_from) << ',' << format_double(o.s_to) << '\n';
        rep.metrics.push_back({"branch" + std::to_string(b + 1) + ".far_min", o.min_value});
        rep.metrics.push_back({"branch" + std::to_string(b + 1) + ".far_max", o.max_value});
    }
    out.write("outcomes.csv", csv.str());
    check_invariant(rep, sc.expect.invariant);
    out.finish(rep, sc, &g);
    return br;
}

inline ScenarioReport run_sweep(const Scenario& sc, const std::string& out_dir) {
    ScenarioReport rep;
    rep.name = sc.name;
    rep.kind = to_string(sc.kind);
    rep.warnings = sc.warnings;
    Output out;
    out.open(out_dir, sc.name, rep.files);
    if (sc.diagnostics.receiving.empty()) throw ArgumentError("sweep needs a receiving branch for its decision");
    const int target = sc.diagnostics.receiving.front();
    std::vector<Outcome> decisions;
    bool stable = true;
    double worst_change = 0.0;
    std::ostringstream csv;
    csv << "index,value,outcome,far_min,far_max,doubled_outcome,doubling_change\n";
    for (std::size_t i = 0; i < sc.sweep.values.size(); ++i) {
        Scenario member = apply_parameter(sc, sc.sweep.parameter, sc.sweep.values[i]);
        member.kind = ScenarioKind::blocking;
        member.name = sc.name + "-" + std::to_string(i + 1);
        const auto sub = out.enabled() ? out_dir + "/" + member.name : std::string();
        const auto br = run_blocking(member, sub);
        rep.observe(br.report.min_value, br.report.max_value);
        for (const auto& w : br.report.warnings) rep.warnings.push_back(member.name + ": " + w);
        const auto& o = br.outcomes.at(target);
        decisions.push_back(o.outcome);
        Outcome doubled = o.outcome;
        if (!br.doubled.empty()) {
            doubled = br.doubled.at(target).outcome;
            bool same = true;
            for (std::size_t b = 0; b < br.outcomes.size(); ++b) same = same && br.outcomes[b].outcome == br.doubled[b].outcome;
            stable = stable && same;
            worst_change = std::max(worst_change, br.doubling_change);
        }
        csv << i + 1 << ",\"" << sc.sweep.values[i] << "\"," << to_string(o.outcome) << ',' << format_double(o.min_value)
            << ',' << format_double(o.max_value) << ',' << to_string(doubled) << ',' << format_double(br.doubling_change)
            << '\n';
        rep.metrics.push_back({"value" + std::to_string(i + 1) + ".invaded", o.outcome == Outcome::invaded ? 1.0 : 0.0});
        rep.metrics.push_back({"value" + std::to_string(i + 1) + ".far_min", o.min_value});
    }
    out.write("sweep.csv", csv.str());
    if (sc.expect.blocking_monotone) {
        bool decided = std::none_of(decisions.begin(), decisions.end(), [](Outcome o) { return o == Outcome::indeterminate; });
        bool monotone = true;
        bool seen_blocked = false;
        for (auto o : decisions) {
            if (o == Outcome::blocked) seen_blocked = true;
            if (o == Outcome::invaded && seen_blocked) monotone = false;
        }
        rep.check("blocking_monotone", decided && monotone, monotone ? 1.0 : 0.0, 1.0,
                  decided ? "" : "indeterminate outcome in the sweep");
    }
    if (sc.expect.invades) {
        const auto n = std::count(decisions.begin(), decisions.end(), Outcome::invaded);
        rep.check("invades", n > 0, static_cast<double>(n), 1.0, "number of invaded sweep members");
    }
    if (sc.expect.doubling_tol)
        rep.check("doubling", stable && worst_change <= *sc.expect.doubling_tol, worst_change, *sc.expect.doubling_tol,
                  stable ? "" : "an outcome changed under doubling");
    check_invariant(rep, sc.expect.invariant);
    out.finish(rep, sc, nullptr);
    return rep;
}

inline ScenarioReport run_wave_table(const Scenario& sc, const std::string& out_dir) {
    ScenarioReport rep;
    rep.name = sc.name;
    rep.kind = to_string(sc.kind);
    Output out;
    out.open(out_dir, sc.name, rep.files);
    std::ostringstream csv;
    csv << "theta,c,c_closed_form,error,integral_f\n";
    double worst = 0.0;
    bool signs = true;
    for (double th : sc.thetas) {
        Nonlinearity nl{th, sc.models.f.rho};
        const auto p = solve_profile(nl);
        const double exact = (1.0 - 2.0 * th) / std::sqrt(2.0) * std::sqrt(nl.rho.base);
        const double err = std::abs(p.c - exact);
        const double I = integral_f(nl);
        worst = std::max(worst, err);
        if (std::abs(I) > 1e-12 && (p.c > 0.0) != (I > 0.0)) signs = false;
        csv << format_double(th) << ',' << format_double(p.c) << ',' << format_double(exact) << ','
            << format_double(err) << ',' << format_double(I) << '\n';
        rep.metrics.push_back({"c.theta" + format_double(th), p.c});
    }
    out.write("waves.csv", csv.str());
    if (sc.expect.wave_tol) rep.check("wave_speed", worst <= *sc.expect.wave_tol, worst, *sc.expect.wave_tol);
    rep.check("speed_sign", signs, signs ? 1.0 : 0.0, 1.0, "sign(c) = sign(integral of f)");
    out.finish(rep, sc, nullptr);
    return rep;
}

inline ScenarioReport run_trap(const Scenario& sc, const std::string& out_dir) {
    ScenarioReport rep;
    rep.name = sc.name;
    rep.kind = to_string(sc.kind);
    rep.warnings = sc.warnings;
    Output out;
    out.open(out_dir, sc.name, rep.files);
    const auto& tp = sc.trap;
    const int i = tp.branch;
    const double L = sc.domain.junction_radius;

    const auto g = build_domain(sc.domain, sc.h);
    const Discretization D(g, sc.models);
    const auto p = solve_profile(sc.models.f);
    SimConfig cfg = sc.sim;
    cfg.dt = resolve_dt(cfg, D);
    const long K = std::max(1L, static_cast<long>(std::llround(sc.sim.output_every / cfg.dt)));
    const double frame = K * cfg.dt;
    cfg.output_every = frame;
    rep.metrics.push_back({"dt", cfg.dt});
    rep.metrics.push_back({"frame", frame});

    auto collect = [&](ScalarField u0, double t_end) {
        std::vector<ScalarField> tr;
        SimConfig c = cfg;
        c.t_end = std::ceil(t_end / frame - 1e-9) * frame;
        const auto s = run(std::move(u0), c, D, [&](const ScalarField& u) { tr.push_back(u); });
        rep.observe(s.min_value, s.max_value);
        return tr;
    };
    const auto ui = collect(seed_branch(g, sc.domain, sc.models, sc.h, p, i, tp.seed), tp.t_seed);
    ScalarField others;
    others.v.assign(g.size(), 0.0);
    for (int b = 0; b < static_cast<int>(sc.domain.size()); ++b) {
        if (b == i) continue;
        const auto s = seed_branch(g, sc.domain, sc.models, sc.h, p, b, tp.seed_others);
        for (std::size_t k = 0; k < g.size(); ++k) others.v[k] = std::min(1.0, others.v[k] + s.v[k]);
    }
    const auto ut = collect(others, tp.t_others);

    const auto w_aux = build_weight(ExtendedChannelSpec::natural(sc.domain.branches[i]),
                                    derive_stability_constants(sc.models.f).gamma, sc.models, sc.h);
    ParamOptions po;
    po.L_i = tp.L_i;
    po.R = tp.R;
    const auto par = choose_parameters(BoundKind::junction_lower, p, w_aux, sc.models.f, L, po);
    rep.metrics.push_back({"delta", par.delta});
    rep.metrics.push_back({"A", par.A});
    rep.metrics.push_back({"T", par.T});

    auto crossing = [&](const ScalarField& u) {
        const auto xs = level_crossings(axial_mean(u, g, i));
        return xs.size() == 1 ? std::optional<double>(xs[0]) : std::nullopt;
    };
    std::optional<std::size_t> n1, n2;
    for (std::size_t f = 0; f < ui.size(); ++f)
        if (auto x = crossing(ui[f]); x && *x >= tp.L_i - tp.R + par.A) n1 = f;
    for (std::size_t f = 0; f < ut.size(); ++f)
        if (auto x = crossing(ut[f]); x && *x <= tp.L_i + tp.R - par.A) n2 = f;
    const double tol = sc.expect.ordering_tol.value_or(1e-8);
    std::ostringstream csv;
    csv << "check,margin,compared,worst_t,worst_cell,shift\n";
    if (!n1 || !n2 || par.T <= 0.0) {
        rep.check("slab_lower", false, 0.0, -tol, "no lattice shifts place the fronts at L_i -/+ (R - A)");
    } else {
        rep.metrics.push_back({"shift_ui", static_cast<double>(*n1) * frame});
        rep.metrics.push_back({"shift_others", static_cast<double>(*n2) * frame});
        const auto nT = static_cast<std::size_t>(std::floor(par.T / frame));
        const auto wt = collect(initial_block(g, sc.domain, i, tp.L_i - tp.R, tp.L_i + tp.R, 1.0 - par.delta, 0.0),
                                static_cast<double>(nT) * frame);
        const double d = par.delta;
        const auto r = check_ordering(wt, [&](std::size_t f, std::size_t k) -> std::optional<double> {
            if (*n1 + f >= ui.size() || *n2 + f >= ut.size()) return std::nullopt;
            return ui[*n1 + f].v[k] + ut[*n2 + f].v[k] - 1.0 - d * std::exp(-d * wt[f].t);
        }, Direction::lower);
        const bool covered = r.compared >= (nT + 1) * g.size();
        rep.check("slab_lower", r.pass(tol) && covered, r.margin, -tol,
                  covered ? "compared " + std::to_string(r.compared) : "trajectories too short for [0, T]");
        csv << "slab_lower," << format_double(r.margin) << ',' << r.compared << ',' << format_double(r.worst_t) << ','
            << r.worst_cell << ",0\n";
    }

    const auto u = collect(initial_block(g, sc.domain, i, tp.comparison, sc.domain.branches[i].length, 1.0, 0.0),
                           tp.t_comparison);
    const long fw = tp.fit_frame;
    if (fw >= static_cast<long>(u.size())) throw ArgumentError("fit frame beyond the comparison run");
    auto below = [&](const ScalarField& a, const ScalarField& b) {
        for (std::size_t k = 0; k < a.size(); ++k)
            if (a.v[k] > b.v[k]) return false;
        return true;
    };
    std::optional<long> sigma, eta;
    for (long s = -fw; fw + s < static_cast<long>(ui.size()); ++s)
        if (below(ui[fw + s], u[fw])) sigma = s;
    for (long s = static_cast<long>(ui.size()) - fw - 1; s >= -fw; --s)
        if (below(u[fw], ui[fw + s])) eta = s;
    std::vector<ScalarField> window(u.begin() + fw, u.end());
    auto shifted = [&](long s) {
        return [&, s](std::size_t f, std::size_t k) -> std::optional<double> {
            const long idx = fw + static_cast<long>(f) + s;
            if (idx < 0 || idx >= static_cast<long>(ui.size())) return std::nullopt;
            return ui[idx].v[k];
        };
    };
    if (!sigma) {
        rep.check("trap_lower", false, 0.0, -tol, "no lower lattice shift orders u_i below u");
    } else {
        const auto r = check_ordering(window, shifted(*sigma), Direction::lower);
        rep.metrics.push_back({"sigma", *sigma * frame});
        rep.check("trap_lower", r.pass(tol) && r.compared > 0, r.margin, -tol, "compared " + std::to_string(r.compared));
        csv << "trap_lower," << format_double(r.margin) << ',' << r.compared << ',' << format_double(r.worst_t) << ','
            << r.worst_cell << ',' << format_double(*sigma * frame) << '\n';
    }
    if (!eta) {
        rep.check("trap_upper", false, 0.0, -tol, "no upper lattice shift orders u below u_i");
    } else {
        const auto r = check_ordering(window, shifted(*eta), Direction::upper);
        rep.metrics.push_back({"eta", *eta * frame});
        rep.check("trap_upper", r.pass(tol) && r.compared > 0, r.margin, -tol, "compared " + std::to_string(r.compared));
        csv << "trap_upper," << format_double(r.margin) << ',' << r.compared << ',' << format_double(r.worst_t) << ','
            << r.worst_cell << ',' << format_double(*eta * frame) << '\n';
    }
    out.write("ordering.csv", csv.str());
    if (out.enabled()) {
        out.snapshot(ui.back(), g, std::llround(ui.back().t / cfg.dt));
        out.snapshot(u.back(), g, std::llround(u.back().t / cfg.dt));
    }
    check_invariant(rep, sc.expect.invariant);
    out.finish(rep, sc, &g);
    return rep;
}

}  // namespace detail

// Executes the scenario; out_dir empty skips all file output.
inline ScenarioReport run_scenario(const Scenario& sc, const std::string& out_dir, const RunOptions& opt = {}) {
    detail::apply_threads(opt);
    const std::string dir = opt.write_files ? out_dir : std::string();
    try {
        switch (sc.kind) {
            case ScenarioKind::planar:
            case ScenarioKind::emanation: return detail::run_front(sc, dir);
            case ScenarioKind::blocking: return detail::run_blocking(sc, dir).report;
            case ScenarioKind::sweep: return detail::run_sweep(sc, dir);
            case ScenarioKind::wave_table: return detail::run_wave_table(sc, dir);
            case ScenarioKind::junction_trap: return detail::run_trap(sc, dir);
        }
    } catch (const Error& e) {
        throw ScenarioError("scenario '" + sc.name + "': " + e.what());
    }
    throw ScenarioError("scenario '" + sc.name + "': unknown kind");
}

}  // namespace bfront
