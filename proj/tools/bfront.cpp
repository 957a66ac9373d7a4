// Command-line driver: wave, simulate, certify, verify-bounds, sweep.
#include <CLI11.hpp>

#include <bfront/harness.hpp>

#include <cstdlib>
#include <iostream>

using namespace bfront;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

int finish(const ScenarioReport& rep) {
    std::cout << rep.to_text();
    return rep.pass() ? 0 : 1;
}

int cmd_wave(double theta, double rho, const std::string& out) {
    Nonlinearity nl{theta, Expr::constant(rho)};
    const auto p = solve_profile(nl);
    const double exact = (1.0 - 2.0 * theta) / std::sqrt(2.0) * std::sqrt(rho);
    const auto sc = derive_stability_constants(nl);
    std::cout << "theta " << detail::format_double(theta) << "\n"
              << "c " << detail::format_double(p.c) << "\n"
              << "c_closed_form " << detail::format_double(exact) << "\n"
              << "integral_f " << detail::format_double(integral_f(nl)) << "\n"
              << "gamma " << detail::format_double(sc.gamma) << "\n"
              << "sigma " << detail::format_double(sc.sigma) << "\n"
              << "width_0.01 " << detail::format_double(profile_width(p, 0.01)) << "\n";
    if (!out.empty()) {
        write_profile(p, out);
        std::cout << "profile " << out << "\n";
    }
    return 0;
}

int cmd_certify(const std::string& run_dir, const std::vector<double>& eps, double band_limit) {
    const auto sc = load_scenario(run_dir + "/scenario.ini");
    const auto g = build_domain(sc.domain, sc.h);
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(run_dir + "/snapshots"))
        if (e.path().extension() == ".field") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError(run_dir + "/snapshots holds no stored fields");
    std::vector<ScalarField> traj;
    for (const auto& f : files) {
        auto s = import_field(f);
        if (s.grid.mask != g.mask) throw IoError(f + ": grid does not match the scenario domain");
        traj.push_back(std::move(s.u));
    }
    const auto p = solve_profile(sc.models.f);
    bool ok = true;
    for (double e : eps) {
        const double limit =
            band_limit > 0.0 ? band_limit : profile_width(p, e) + 2.0 * sc.h + 2.0 * sc.domain.junction_radius;
        const auto rep = certify_transition_front(traj, g, sc.domain, {e}, limit);
        const auto& l = rep.levels.front();
        std::cout << "eps " << detail::format_double(e) << " measured " << detail::format_double(l.measured)
                  << " limit " << detail::format_double(l.limit) << " frames " << rep.frames << " "
                  << (l.pass ? "PASS" : "FAIL") << "\n";
        ok = ok && l.pass;
    }
    return ok ? 0 : 1;
}

int cmd_verify_bounds(const Scenario& sc) {
    const auto stab = derive_stability_constants(sc.models.f);
    const auto p = solve_profile(sc.models.f);
    const bool closed = sc.models.A.isotropic_constant() && sc.models.A.beta2() == 1.0 && sc.models.q.zero();
    const PlanarFront front = closed ? PlanarFront::cubic_closed_form(sc.models.f.theta, sc.models.f.rho.base)
                                     : PlanarFront::from_profile(p);
    bool ok = true;
    for (std::size_t b = 0; b < sc.domain.size(); ++b) {
        const auto& br = sc.domain.branches[b];
        AuxWeight w;
        try {
            w = build_weight(ExtendedChannelSpec::natural(br), stab.gamma, sc.models, sc.h);
        } catch (const ConstructionError& e) {
            std::cout << "branch " << b + 1 << " weight FAIL " << e.what() << "\n";
            ok = false;
            continue;
        }
        const auto wr = verify_weight(w, stab.gamma, sc.models, sc.h);
        std::cout << "branch " << b + 1 << " weight lambda " << detail::format_double(w.lambda) << " margin "
                  << detail::format_double(wr.margin) << " " << (wr.pass() ? "PASS" : "FAIL") << "\n";
        ok = ok && wr.pass();
        for (auto kind : {BoundKind::emanation_sub, BoundKind::emanation_super, BoundKind::convergence_lower,
                          BoundKind::convergence_upper, BoundKind::junction_lower}) {
            try {
                const auto par = choose_parameters(kind, p, w, sc.models.f, sc.domain.junction_radius);
                auto cb = build_candidate(kind, front, w, par, br, 0.0, closed);
                const auto smp = residual_samples(cb);
                const auto r = verify_residual(cb, sc.models, smp.times, smp.points);
                std::cout << "branch " << b + 1 << " " << to_string(kind) << " delta "
                          << detail::format_double(par.delta) << " worst " << detail::format_double(r.worst)
                          << " samples " << r.evaluated << " " << (r.pass ? "PASS" : "FAIL") << "\n";
                ok = ok && r.pass;
            } catch (const InfeasibleError& e) {
                std::cout << "branch " << b + 1 << " " << to_string(kind) << " infeasible: " << e.what() << "\n";
            }
        }
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bistable front propagation on branched domains"};
    app.require_subcommand(1);
    std::string config;
    std::string out = env_or("BFRONT_OUT", "");
    int threads = std::atoi(env_or("BFRONT_THREADS", "0").c_str());
    unsigned seed = 0;
    app.add_option("--threads", threads, "worker threads (env BFRONT_THREADS)");
    app.add_option("--seed", seed, "seed for randomized property checks; scenario physics ignore it");

    auto* wave = app.add_subcommand("wave", "solve the 1D planar front");
    double theta = 0.3, rho = 1.0;
    wave->add_option("--theta", theta, "threshold in (0,1)")->required();
    wave->add_option("--rho", rho, "reaction rate");
    wave->add_option("--out", out, "profile CSV path");

    auto* sim = app.add_subcommand("simulate", "run a scenario");
    sim->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", out, "output directory (env BFRONT_OUT)");

    auto* cert = app.add_subcommand("certify", "transition-front check on a stored trajectory");
    std::string run_dir;
    std::vector<double> eps{0.1, 0.05};
    double band = 0.0;
    cert->add_option("--run", run_dir, "directory written by simulate")->required()->check(CLI::ExistingDirectory);
    cert->add_option("--eps", eps, "certification levels")->delimiter(',');
    cert->add_option("--band-limit", band, "band limit; 0 uses the profile width plus grid and junction slack");

    auto* vb = app.add_subcommand("verify-bounds", "weight and candidate residual checks for a scenario domain");
    vb->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);

    auto* sw = app.add_subcommand("sweep", "run a parameter grid");
    std::string param, values;
    sw->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);
    sw->add_option("--out", out, "output directory (env BFRONT_OUT)");
    sw->add_option("--parameter", param, "section.key to vary, overriding the config");
    sw->add_option("--values", values, "';'-separated values");

    CLI11_PARSE(app, argc, argv);
    RunOptions opt;
    opt.threads = threads;
    detail::apply_threads(opt);
    try {
        if (*wave) return cmd_wave(theta, rho, out);
        if (*cert) return cmd_certify(run_dir, eps, band);
        auto sc = load_scenario(config);
        for (const auto& w : sc.warnings) std::cerr << "warning: " << w << "\n";
        if (*vb) return cmd_verify_bounds(sc);
        if (*sw) {
            if (!param.empty()) {
                sc.kind = ScenarioKind::sweep;
                sc.sweep.parameter = param;
                sc.sweep.values.clear();
                for (auto v : detail::split(values, ';')) sc.sweep.values.emplace_back(v);
            }
            if (sc.kind != ScenarioKind::sweep) throw ArgumentError("config is not a sweep; pass --parameter/--values");
        }
        if (out.empty()) out = "runs/" + sc.name;
        return finish(run_scenario(sc, out, opt));
    } catch (const ConfigError& e) {
        for (const auto& m : e.errors) std::cerr << "error: " << m << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
