#include "thermalab/thermalab.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace thermalab;

namespace {

struct Globals {
    std::string cache;
    bool verbose = false;
    bool allow_large = false;

    std::optional<fs::path> cache_dir() const
    {
        if (const char* env = std::getenv("THERMALAB_CACHE"); env && *env) return fs::path(env);
        if (!cache.empty()) return fs::path(cache);
        return std::nullopt;
    }

    std::function<void(const std::string&)> log() const
    {
        if (!verbose) return {};
        return [](const std::string& s) { std::cerr << s << '\n'; };
    }

    void guard_diag(int L) const
    {
        if (L > ResourceGuards{}.max_L_diag && !allow_large)
            throw ResourceError("L~=" + std::to_string(L) + " exceeds the diagonalization guard (use --allow-large)");
    }

    void guard_evolve(int L) const
    {
        if (L > ResourceGuards{}.max_L_evolve && !allow_large)
            throw ResourceError("L=" + std::to_string(L) + " exceeds the evolution guard (use --allow-large)");
    }
};

Reflection parse_reflection(const std::string& s)
{
    if (s == "+" || s == "even") return Reflection::even;
    if (s == "-" || s == "odd") return Reflection::odd;
    if (s == "none") return Reflection::none;
    throw UsageError("reflection must be +, - or none");
}

void emit(const std::string& text, const std::string& out)
{
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    io::write_file_atomic(out, text);
    std::cerr << "wrote " << out << '\n';
}

SpectrumTable spectrum(const Globals& g, int L, int l_max, const std::vector<std::string>& extra)
{
    g.guard_diag(L);
    ThermalOptions opt;
    opt.l_max = l_max;
    opt.cache_dir = g.cache_dir();
    opt.log = g.log();
    if (opt.cache_dir) fs::create_directories(*opt.cache_dir);
    return full_diagonalize(RingGeometry{L}, HamiltonianParams::benchmark(),
                            detail::merge_registered(L, parse_observables(extra)), opt);
}

double beta_for(const ThermalCurve& curve, std::optional<double> eps, std::optional<double> beta)
{
    if (beta) return *beta;
    if (!eps) throw UsageError("give --eps or --beta");
    return std::abs(*eps) < 1e-15 ? 0.0 : solve_beta(*eps, curve);
}

std::string num(double v) { return io::format_double(v); }

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"thermalab: thermalization experiments on the mixed-field Ising ring"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--cache", g.cache, "Cache directory (THERMALAB_CACHE takes precedence)");
    app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");
    app.add_flag("--allow-large", g.allow_large, "Lift the default size guards");

    std::function<int()> action;

    // basis build
    auto* basis = app.add_subcommand("basis", "Symmetry-sector bases")->require_subcommand(1);
    auto* basis_build = basis->add_subcommand("build", "Build (and cache) one sector basis");
    int b_L = 0, b_k = 0;
    std::string b_R = "+";
    basis_build->add_option("--L", b_L, "Ring size")->required()->check(CLI::Range(2, 40));
    basis_build->add_option("--k", b_k, "Momentum index");
    basis_build->add_option("--R", b_R, "Reflection: +, - or none");
    basis_build->callback([&] {
        action = [&] {
            g.guard_evolve(b_L);
            const RingGeometry geo{b_L};
            const SectorSpec sec{b_k, parse_reflection(b_R)};
            sec.validate(geo);
            const auto b = load_or_build_basis(geo, sec, g.cache_dir());
            std::cout << sector_label(geo, sec) << " dim " << b->dim() << '\n';
            return 0;
        };
    });

    // state list | show
    auto* state = app.add_subcommand("state", "Initial-state catalog")->require_subcommand(1);
    auto* state_list = state->add_subcommand("list", "Print the catalog as CSV");
    std::string series;
    state_list->add_option("--series", series, "Only one series letter, e.g. y");
    state_list->callback([&] {
        action = [&] {
            if (series.empty()) {
                std::cout << catalog_csv();
                return 0;
            }
            std::cout << "name,theta_over_pi,phi_over_pi,epsilon_ref,v_ref\n";
            for (const auto& n : catalog_series(series)) {
                const auto& e = catalog_lookup(n);
                std::cout << e.name << ',' << num(e.theta_over_pi) << ',' << num(e.phi_over_pi) << ','
                          << num(e.epsilon_ref) << ',' << num(e.v_ref) << '\n';
            }
            return 0;
        };
    });
    auto* state_show = state->add_subcommand("show", "Energy moments of one catalog state");
    std::string s_name;
    int s_L = 0;
    state_show->add_option("name", s_name, "Catalog name")->required();
    state_show->add_option("--L", s_L, "Also project onto the k=0, R=+ sector of this ring");
    state_show->callback([&] {
        action = [&] {
            const auto& e = catalog_lookup(s_name);
            const auto h = HamiltonianParams::benchmark();
            const auto d = bloch_variance_density(e.params(), h);
            std::cout << "name " << e.name << "\ntheta/pi " << num(e.theta_over_pi) << "\nphi/pi "
                      << num(e.phi_over_pi) << "\nepsilon " << num(d.epsilon) << "\nv " << num(d.variance)
                      << "\nepsilon_ref " << num(e.epsilon_ref) << "\nv_ref " << num(e.v_ref) << '\n';
            if (s_L > 0) {
                g.guard_evolve(s_L);
                const auto b = load_or_build_basis(RingGeometry{s_L}, {0, Reflection::even}, g.cache_dir());
                double projected = 1.0;
                build_bloch_state(e.params(), b, &projected);
                std::cout << "sector_dim " << b->dim() << "\nprojected_norm " << num(projected) << '\n';
            }
            return 0;
        };
    });

    // evolve
    auto* evolve = app.add_subcommand("evolve", "Evolve one state and write its trajectory CSV");
    std::string e_state, e_out;
    int e_L = 0;
    std::vector<std::string> e_obs;
    KrylovConfig kcfg;
    evolve->add_option("--state", e_state, "Catalog name or random:SEED")->required();
    evolve->add_option("--L", e_L, "Ring size")->required()->check(CLI::Range(4, 40));
    evolve->add_option("--obs", e_obs, "Observable ids (default set when omitted)");
    evolve->add_option("--t-final", kcfg.t_final, "Final time");
    evolve->add_option("--dt", kcfg.dt, "Sampling step");
    evolve->add_option("--tol", kcfg.step_tolerance, "Per-step error tolerance");
    evolve->add_option("-o,--out", e_out, "Output CSV (stdout when omitted)");
    evolve->callback([&] {
        action = [&] {
            g.guard_evolve(e_L);
            const auto req = detail::parse_state(json(e_state), 0);
            const auto b = load_or_build_basis(RingGeometry{e_L}, detail::dynamics_sector(), g.cache_dir());
            const auto psi = detail::initial_state(req, b);
            const auto obs = e_obs.empty() ? default_observables(e_L) : parse_observables(e_obs);
            EvolveOptions opt;
            opt.state_name = req.name;
            const auto rec = evolve_and_measure(psi, HamiltonianParams::benchmark(), obs, kcfg, opt);
            emit(rec.csv(), e_out);
            if (!rec.complete) {
                std::cerr << "error: trajectory incomplete: " << rec.failure << '\n';
                return 1;
            }
            return 0;
        };
    });

    // thermal build | expect | d2 | curve
    auto* thermal = app.add_subcommand("thermal", "Canonical-ensemble reference values")->require_subcommand(1);
    int t_L = 12, t_lmax = 3;
    std::vector<std::string> t_extra;
    std::optional<double> t_eps, t_beta;
    std::string t_obs, t_out;
    double t_fd = 0.0;
    auto common = [&](CLI::App* c) {
        c->add_option("--L", t_L, "Thermal ring size")->check(CLI::Range(4, 40));
        c->add_option("--l-max", t_lmax, "Largest cluster for reduced density matrices");
        c->add_option("--register", t_extra, "Extra linear observables to tabulate");
    };
    auto* t_build = thermal->add_subcommand("build", "Diagonalize and cache the spectrum");
    common(t_build);
    t_build->callback([&] {
        action = [&] {
            const auto t = spectrum(g, t_L, t_lmax, t_extra);
            std::cout << "L~ " << t.L() << "\nstates " << t.energies().size() << "\nv~(0) "
                      << num(thermal_point(t.energies(), t.L(), 0.0).v_tilde) << '\n';
            return 0;
        };
    });
    auto* t_expect = thermal->add_subcommand("expect", "Thermal value of one observable");
    common(t_expect);
    t_expect->add_option("--obs", t_obs, "Observable id")->required();
    t_expect->add_option("--eps", t_eps, "Energy density");
    t_expect->add_option("--beta", t_beta, "Inverse temperature");
    t_expect->callback([&] {
        action = [&] {
            const auto spec = ObservableSpec::parse(t_obs);
            const auto t = spectrum(g, t_L, t_lmax, spec.is_linear() ? std::vector{t_obs} : t_extra);
            const ThermalCurve curve(t);
            const double b = beta_for(curve, t_eps, t_beta);
            const auto p = curve.at(b);
            std::cout << "beta " << num(b) << "\nepsilon " << num(p.epsilon) << "\nv_tilde " << num(p.v_tilde)
                      << "\nS_tilde_per_site " << num(p.s_tilde / t.L()) << '\n'
                      << t_obs << ' ' << num(detail::thermal_value(spec, b, &t)) << '\n';
            return 0;
        };
    });
    auto* t_d2 = thermal->add_subcommand("d2", "Second energy derivative of a thermal value");
    common(t_d2);
    t_d2->add_option("--obs", t_obs, "Linear observable id")->required();
    t_d2->add_option("--eps", t_eps, "Energy density")->required();
    t_d2->add_option("--fd", t_fd, "Also print a centered difference with this step");
    t_d2->callback([&] {
        action = [&] {
            const auto spec = ObservableSpec::parse(t_obs);
            const auto t = spectrum(g, t_L, t_lmax, {t_obs});
            const ThermalCurve curve(t);
            std::cout << "d2 " << num(thermal_second_derivative(spec, *t_eps, t, curve)) << '\n';
            if (t_fd > 0) std::cout << "d2_fd " << num(thermal_second_derivative_fd(spec, *t_eps, t_fd, t, curve)) << '\n';
            return 0;
        };
    });
    auto* t_curve = thermal->add_subcommand("curve", "Tabulate beta, epsilon, v~, S~ on a grid");
    common(t_curve);
    double c_lo = -3, c_hi = 3, c_step = 1e-3;
    t_curve->add_option("--beta-min", c_lo);
    t_curve->add_option("--beta-max", c_hi);
    t_curve->add_option("--beta-step", c_step);
    t_curve->add_option("-o,--out", t_out, "Output CSV (stdout when omitted)");
    t_curve->callback([&] {
        action = [&] {
            const auto t = spectrum(g, t_L, t_lmax, t_extra);
            emit(ThermalCurve(t, c_lo, c_hi, c_step).csv(), t_out);
            return 0;
        };
    });

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Equilibrium statistics and relaxation fit for one trajectory column");
    std::string a_csv, a_obs;
    double a_fraction = 0.25;
    std::vector<double> a_window;
    analyze->add_option("csv", a_csv, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    analyze->add_option("--obs", a_obs, "Column id")->required();
    analyze->add_option("--fraction", a_fraction, "Averaged tail fraction");
    analyze->add_option("--window", a_window, "Fit window t_a t_b")->expected(2);
    analyze->callback([&] {
        action = [&] {
            const auto csv = CsvTable::load(a_csv);
            const auto t = csv.column("t"), y = csv.column(a_obs);
            const auto st = equilibrium_stats(t, y, a_fraction);
            std::optional<std::pair<double, double>> w;
            if (a_window.size() == 2) w = std::pair{a_window[0], a_window[1]};
            const auto f = fit_relaxation_time(t, y, st, w);
            std::cout << "O_bar " << num(st.o_bar) << "\ndelta_O2 " << num(st.delta_o2) << "\ntau " << num(f.tau)
                      << "\nwindow " << num(f.t_a) << ' ' << num(f.t_b) << "\nci " << num(f.ci_lo) << ' '
                      << num(f.ci_hi) << "\nr2 " << num(f.r2) << "\naccepted " << (f.accepted ? "yes" : "no") << '\n';
            if (!f.accepted) std::cout << "reason " << f.reason << '\n';
            return 0;
        };
    });

    // fig
    auto* fig = app.add_subcommand("fig", "Render figures from a finished run directory");
    std::vector<std::string> f_ids;
    std::string f_dir = "thermalab_out";
    fig->add_option("ids", f_ids, "Figure ids (all when omitted)");
    fig->add_option("--dir", f_dir, "Run output directory");
    fig->callback([&] {
        action = [&] {
            std::map<std::string, std::string> svgs;
            if (f_ids.empty()) {
                for (const auto& f : figure_catalog()) {
                    try {
                        svgs.merge(reproduce_figures({f.id}, f_dir));
                    } catch (const Error& e) {
                        std::cerr << "skipped " << f.id << ": " << e.what() << '\n';
                    }
                }
            } else {
                svgs = reproduce_figures(f_ids, f_dir);
            }
            for (const auto& [id, text] : svgs) {
                const auto path = fs::path(f_dir) / "figures" / (id + ".svg");
                fs::create_directories(path.parent_path());
                io::write_file_atomic(path, text);
                std::cout << path.string() << '\n';
            }
            return 0;
        };
    });

    // run
    auto* run = app.add_subcommand("run", "Execute a TOML or JSON run configuration");
    std::string r_cfg;
    bool r_force = false;
    int r_workers = 0;
    run->add_option("config", r_cfg, "Configuration file")->required()->check(CLI::ExistingFile);
    run->add_flag("--force", r_force, "Recompute completed tasks");
    run->add_option("--workers", r_workers, "Override the worker count")->check(CLI::PositiveNumber);
    run->callback([&] {
        action = [&] {
            auto cfg = RunConfig::load(r_cfg);
            if (r_workers > 0) cfg.workers = r_workers;
            if (g.allow_large) cfg.guards.allow_large = true;
            if (!g.cache.empty() && !cfg.cache_dir) cfg.cache_dir = fs::path(g.cache);
            const auto rep = plan_and_execute(cfg, {r_force, g.log()});
            std::cout << "executed " << rep.executed.size() << ", skipped " << rep.skipped.size() << ", failed "
                      << rep.failed.size() << '\n';
            for (const auto& f : rep.failed) std::cout << "failed: " << f << '\n';
            return rep.ok() ? 0 : 1;
        };
    });

    // verify
    auto* verify = app.add_subcommand("verify", "Run the acceptance checks");
    AcceptanceOptions vopt;
    std::vector<int> v_only;
    verify->add_option("--work-dir", vopt.work_dir, "Scratch directory for runs and caches");
    verify->add_option("--only", v_only, "Criterion ids");
    verify->add_option("--workers", vopt.workers, "Trajectory workers")->check(CLI::PositiveNumber);
    verify->callback([&] {
        action = [&] {
            vopt.only.insert(v_only.begin(), v_only.end());
            vopt.log = g.log();
            int failed = 0;
            const auto res = run_acceptance(vopt, [&](const CriterionResult& r) {
                std::cout << format_result(r) << std::endl;
                failed += !r.pass;
            });
            std::cout << res.size() - failed << "/" << res.size() << " criteria passed\n";
            return failed == 0 ? 0 : 1;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        return action ? action() : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
