#pragma once

// Run planning and execution: spectra, trajectories, analysis tables, figures.

#include "thermalab/analysis.hpp"
#include "thermalab/basis.hpp"
#include "thermalab/bloch.hpp"
#include "thermalab/config.hpp"
#include "thermalab/errors.hpp"
#include "thermalab/io.hpp"
#include "thermalab/krylov.hpp"
#include "thermalab/observables.hpp"
#include "thermalab/svg.hpp"
#include "thermalab/thermal.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace thermalab {

namespace fs = std::filesystem;

inline constexpr int kOutputFormat = 1;

// ---------------------------------------------------------------------------
// Plain CSV tables as written by this library (no quoting).

class CsvTable {
  public:
    static CsvTable parse(const std::string& text, const std::string& origin = "csv")
    {
        CsvTable t;
        t.origin_ = origin;
        std::size_t pos = 0;
        bool header = true;
        while (pos < text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string::npos) end = text.size();
            std::string line = text.substr(pos, end - pos);
            pos = end + 1;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::size_t a = 0;
            while (true) {
                const auto b = line.find(',', a);
                cells.push_back(line.substr(a, b == std::string::npos ? std::string::npos : b - a));
                if (b == std::string::npos) break;
                a = b + 1;
            }
            if (header) {
                t.header_ = std::move(cells);
                header = false;
            } else {
                if (cells.size() != t.header_.size())
                    throw Error(origin + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                                std::to_string(t.header_.size()));
                t.rows_.push_back(std::move(cells));
            }
        }
        if (header) throw Error(origin + ": empty table");
        return t;
    }

    static CsvTable load(const fs::path& p) { return parse(io::read_file(p), p.string()); }

    const std::vector<std::string>& header() const noexcept { return header_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool has(const std::string& name) const { return std::find(header_.begin(), header_.end(), name) != header_.end(); }

    std::size_t col(const std::string& name) const
    {
        for (std::size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == name) return i;
        throw Error(origin_ + ": no column '" + name + "'");
    }

    const std::string& str(std::size_t row, const std::string& name) const { return rows_.at(row)[col(name)]; }

    double num(std::size_t row, const std::string& name) const { return to_double(str(row, name)); }

    std::vector<double> column(const std::string& name) const
    {
        const auto c = col(name);
        std::vector<double> out;
        out.reserve(rows_.size());
        for (const auto& r : rows_) out.push_back(to_double(r[c]));
        return out;
    }

    static double to_double(const std::string& s)
    {
        if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        double v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) throw Error("not a number: '" + s + "'");
        return v;
    }

  private:
    std::string origin_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

namespace detail {

inline std::string csv_cell(std::string s)
{
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

inline std::string csv_row(const std::vector<std::string>& cells)
{
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out + '\n';
}

inline std::string fmt(double v) { return io::format_double(v); }

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Equal-energy series letter of a catalog state, if any.
inline std::string series_of(const std::string& name)
{
    for (const char* letter : {"y", "z", "a", "b", "c", "d", "x"}) {
        const auto members = catalog_series(letter);
        if (std::find(members.begin(), members.end(), name) != members.end()) return letter;
    }
    return "";
}

} // namespace detail

// ---------------------------------------------------------------------------

inline std::string trajectory_stem(const std::string& state, int L) { return state + "_L" + std::to_string(L); }
inline std::string thermal_csv_name(int L) { return "thermal_L" + std::to_string(L) + ".csv"; }

struct LoadedTrajectory {
    std::string state;
    int L = 0;
    std::vector<std::string> ids;
    std::vector<double> t;
    std::vector<std::vector<double>> columns;  // per id
    double epsilon = 0.0;
    double variance = 0.0;
    bool complete = false;

    TimeSeries series(const std::string& id) const
    {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id) return {state, L, id, t, columns[i]};
        throw UsageError("trajectory " + trajectory_stem(state, L) + " has no observable '" + id + "'");
    }
};

inline LoadedTrajectory load_trajectory(const fs::path& output_dir, const std::string& state, int L)
{
    const auto stem = output_dir / "trajectories" / trajectory_stem(state, L);
    const auto table = CsvTable::load(fs::path(stem.string() + ".csv"));
    const auto meta = json::parse(io::read_file(fs::path(stem.string() + ".json")));
    LoadedTrajectory tr;
    tr.state = state;
    tr.L = L;
    tr.t = table.column("t");
    for (const auto& h : table.header())
        if (h != "t") {
            tr.ids.push_back(h);
            tr.columns.push_back(table.column(h));
        }
    tr.epsilon = meta.at("epsilon").get<double>();
    tr.variance = meta.at("variance").get<double>();
    tr.complete = meta.at("complete").get<bool>();
    return tr;
}

// ---------------------------------------------------------------------------

struct ExecuteOptions {
    bool force = false;  // ignore completed tasks in the manifest
    std::function<void(const std::string&)> log;
};

struct RunReport {
    RunManifest manifest;
    std::vector<std::string> executed;
    std::vector<std::string> skipped;
    std::vector<std::string> failed;

    bool ok() const noexcept { return failed.empty(); }
};

struct TaskOutcome {
    std::map<std::string, std::string> outputs;  // relative path -> bytes
    std::map<std::string, std::string> caches;   // absolute path -> sha1
    std::string error;
    json info = json::object();
};

namespace detail {

inline json base_inputs(const RunConfig& c)
{
    return json{{"format", kOutputFormat}, {"model", {{"h_x", c.params.h_x}, {"h_z", c.params.h_z}}}};
}

inline SectorSpec dynamics_sector() { return {0, Reflection::even}; }

inline SectorVector initial_state(const StateRequest& s, const BasisPtr& basis)
{
    if (s.random_seed) {
        const auto seed = *s.random_seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(basis->L());
        auto v = sample_sector_random_state(basis, seed);
        v.normalize();
        return v;
    }
    return build_bloch_state(s.angles, basis);
}

inline json thermal_inputs(const RunConfig& c)
{
    auto j = base_inputs(c);
    j["kind"] = "thermal";
    j["thermal"] = c.to_json()["thermal"];
    return j;
}

inline std::vector<ObservableSpec> thermal_registered(const RunConfig& c)
{
    std::vector<ObservableSpec> extra;
    std::set<std::string> ids;
    for (int L : c.sizes)
        for (const auto& o : c.observables_for(L))
            if (o.is_linear() && ids.insert(o.id).second) {
                try {
                    o.validate(c.thermal.L);
                    extra.push_back(o);
                } catch (const UsageError&) {
                    // does not fit the thermal ring; thermal values stay NaN
                }
            }
    return merge_registered(c.thermal.L, extra);
}

inline SpectrumTable load_spectrum(const RunConfig& c, const ExecuteOptions& ex)
{
    ThermalOptions opt;
    opt.l_max = c.thermal.l_max;
    opt.cache_dir = c.effective_cache_dir();
    opt.log = ex.log;
    return full_diagonalize(RingGeometry{c.thermal.L}, c.params, thermal_registered(c), opt);
}

inline TaskOutcome run_thermal(const RunConfig& c, const ExecuteOptions& ex)
{
    TaskOutcome out;
    const auto table = load_spectrum(c, ex);
    const ThermalCurve curve(table, c.thermal.beta_min, c.thermal.beta_max, c.thermal.beta_step);
    out.outputs[thermal_csv_name(c.thermal.L)] = curve.csv();
    const auto cache = spectrum_cache_path(c.effective_cache_dir(), table.descriptor(), table.L());
    if (fs::exists(cache)) out.caches[cache.string()] = io::sha1_hex(io::read_file(cache));
    out.info["states"] = table.size();
    out.info["epsilon_min"] = curve.epsilon_min();
    out.info["epsilon_max"] = curve.epsilon_max();
    return out;
}

inline json trajectory_inputs(const RunConfig& c, const StateRequest& s, int L)
{
    auto j = base_inputs(c);
    j["kind"] = "trajectory";
    j["state"] = state_to_json(s);
    j["L"] = L;
    j["krylov"] = c.to_json()["krylov"];
    json ids = json::array();
    for (const auto& o : c.observables_for(L)) ids.push_back(o.id);
    j["observables"] = ids;
    return j;
}

inline TaskOutcome run_trajectory(const RunConfig& c, const StateRequest& s, int L, const std::string& input_sha1,
                                  const ExecuteOptions& ex)
{
    TaskOutcome out;
    const auto cache = c.effective_cache_dir();
    const auto basis = load_or_build_basis(RingGeometry{L}, dynamics_sector(), cache);
    double projected = 1.0;
    SectorVector psi = s.random_seed ? initial_state(s, basis) : build_bloch_state(s.angles, basis, &projected);
    EvolveOptions opt;
    opt.state_name = s.name;
    opt.checkpoint = cache / "checkpoints" / (trajectory_stem(s.name, L) + "_" + input_sha1.substr(0, 12) + ".thck");
    opt.checkpoint_key = input_sha1;
    fs::create_directories(opt.checkpoint->parent_path());
    if (ex.log) ex.log("evolving " + trajectory_stem(s.name, L) + " (dim " + std::to_string(basis->dim()) + ")");
    const auto rec = evolve_and_measure(psi, c.params, c.observables_for(L), c.krylov, opt);
    const auto stem = "trajectories/" + trajectory_stem(s.name, L);
    out.outputs[stem + ".csv"] = rec.csv();
    json meta{{"state", s.name},
              {"L", L},
              {"sector", sector_label(RingGeometry{L}, dynamics_sector())},
              {"dim", basis->dim()},
              {"epsilon", rec.epsilon},
              {"variance", rec.variance},
              {"projected_norm", projected},
              {"samples", rec.times.size()},
              {"max_subspace", rec.max_subspace},
              {"max_norm_drift", rec.max_norm_drift()},
              {"max_energy_drift", rec.max_energy_drift()},
              {"max_variance_drift", rec.max_variance_drift()},
              {"complete", rec.complete},
              {"failure", rec.failure}};
    if (s.random_seed) meta["random_seed"] = *s.random_seed;
    else {
        meta["theta_over_pi"] = s.theta_over_pi;
        meta["phi_over_pi"] = s.phi_over_pi;
    }
    out.outputs[stem + ".json"] = meta.dump(2) + "\n";
    if (!rec.complete) out.error = "trajectory incomplete: " + rec.failure;
    return out;
}

// Thermal reference values at one energy density.
struct ThermalAt {
    double beta = kNaN, v_tilde = kNaN, s_tilde_per_site = kNaN;
    bool ok = false;
};

inline ThermalAt thermal_at(double eps, const ThermalCurve* curve)
{
    ThermalAt r;
    if (!curve) return r;
    try {
        r.beta = solve_beta(eps, *curve);
    } catch (const DomainError&) {
        return r;
    }
    const auto p = curve->at(r.beta);
    r.v_tilde = p.v_tilde;
    r.s_tilde_per_site = p.s_tilde / curve->L();
    r.ok = true;
    return r;
}

inline double thermal_value(const ObservableSpec& o, double beta, const SpectrumTable* table)
{
    if (!table || !std::isfinite(beta)) return kNaN;
    try {
        switch (o.kind) {
        case ObservableKind::pauli:
        case ObservableKind::correlator:
            if (!table->observable_index(o.id)) return kNaN;
            return thermal_expectation(o, beta, *table);
        case ObservableKind::entropy:
            if (o.l > table->l_max()) return kNaN;
            return thermal_rdm(beta, o.l, *table).entropy;
        case ObservableKind::mutual_information:
            if (o.l + o.r > table->l_max()) return kNaN;
            return thermal_mutual_information(beta, o.l, o.r, *table);
        case ObservableKind::fidelity: return kNaN;
        }
    } catch (const Error&) {
        return kNaN;
    }
    return kNaN;
}

struct EquilibriumRow {
    std::string state, series, observable;
    int L = 0;
    double epsilon = 0, variance = 0;
    ThermalAt th;
    EquilibriumStats stats;
    double o_tilde = kNaN;

    double deviation() const { return stats.o_bar - o_tilde; }
    double x() const { return (variance - th.v_tilde) / L; }
};

struct AnalysisTables {
    std::string equilibrium, eth_fit, fluctuation, tau, arealaw;
};

inline AnalysisTables run_analysis_tables(const RunConfig& c, const std::vector<LoadedTrajectory>& trajs,
                                          const SpectrumTable* table, const ThermalCurve* curve)
{
    std::vector<EquilibriumRow> rows;
    std::string tau = "state,L,observable,series,epsilon,variance,tau,t_a,t_b,slope,intercept,ci_lo,ci_hi,r2,points,"
                      "accepted,reason\n";
    for (const auto& tr : trajs) {
        const auto th = thermal_at(tr.epsilon, curve);
        for (std::size_t i = 0; i < tr.ids.size(); ++i) {
            const auto spec = ObservableSpec::parse(tr.ids[i]);
            EquilibriumRow r;
            r.state = tr.state;
            r.series = series_of(tr.state);
            r.observable = tr.ids[i];
            r.L = tr.L;
            r.epsilon = tr.epsilon;
            r.variance = tr.variance;
            r.th = th;
            r.stats = equilibrium_stats(tr.t, tr.columns[i], c.analysis.fraction);
            r.o_tilde = thermal_value(spec, th.beta, table);
            rows.push_back(r);

            std::optional<std::pair<double, double>> window;
            const auto key = tr.state + "/" + std::to_string(tr.L) + "/" + tr.ids[i];
            if (auto it = c.analysis.windows.find(key); it != c.analysis.windows.end()) window = it->second;
            RelaxationFit f;
            try {
                f = fit_relaxation_time(tr.t, tr.columns[i], r.stats, window, c.analysis.relax);
            } catch (const Error& e) {
                f.reason = e.what();
            }
            tau += csv_row({tr.state, std::to_string(tr.L), tr.ids[i], r.series, fmt(tr.epsilon), fmt(tr.variance),
                            fmt(f.tau), fmt(f.t_a), fmt(f.t_b), fmt(f.slope), fmt(f.intercept), fmt(f.ci_lo),
                            fmt(f.ci_hi), fmt(f.r2), std::to_string(f.points), f.accepted ? "1" : "0",
                            csv_cell(f.reason)});
        }
    }

    std::string eq = "state,L,observable,series,epsilon,variance,beta,v_tilde,s_tilde_per_site,O_bar,delta_O2,O_tilde,"
                     "deviation,x\n";
    for (const auto& r : rows)
        eq += csv_row({r.state, std::to_string(r.L), r.observable, r.series, fmt(r.epsilon), fmt(r.variance),
                       fmt(r.th.beta), fmt(r.th.v_tilde), fmt(r.th.s_tilde_per_site), fmt(r.stats.o_bar),
                       fmt(r.stats.delta_o2), fmt(r.o_tilde), fmt(r.deviation()), fmt(r.x())});

    // ETH fits per (series, L, observable); L = 0 pools every size.
    std::string eth = "series,L,observable,points,epsilon,slope,residual_rms,thermal_d2,thermal_d2_fd\n";
    {
        std::map<std::tuple<std::string, std::string, int>, std::vector<const EquilibriumRow*>> groups;
        for (const auto& r : rows) {
            if (r.series.empty() || !ObservableSpec::parse(r.observable).is_linear()) continue;
            if (!std::isfinite(r.x()) || !std::isfinite(r.deviation())) continue;
            groups[{r.series, r.observable, r.L}].push_back(&r);
            groups[{r.series, r.observable, 0}].push_back(&r);
        }
        for (const auto& [key, members] : groups) {
            const auto& [series, obs, L] = key;
            if (members.size() < 3) continue;
            std::vector<DeviationPoint> pts;
            double eps = 0;
            for (const auto* m : members) {
                pts.push_back({m->x(), m->deviation(), m->state, m->L, m->observable});
                eps += m->epsilon;
            }
            eps /= static_cast<double>(members.size());
            EthFit f;
            try {
                f = eth_deviation_fit(pts);
            } catch (const FitError&) {
                continue;
            }
            double d2 = kNaN, d2fd = kNaN;
            if (table && curve) {
                const auto spec = ObservableSpec::parse(obs);
                try {
                    d2 = thermal_second_derivative(spec, eps, *table, *curve);
                    d2fd = thermal_second_derivative_fd(spec, eps, 0.02, *table, *curve);
                } catch (const Error&) {
                    // stays NaN
                }
            }
            eth += csv_row({series, std::to_string(L), obs, std::to_string(pts.size()), fmt(eps), fmt(f.slope),
                            fmt(f.residual_rms), fmt(d2), fmt(d2fd)});
        }
    }

    // log2 dO^2 against the size-L thermal entropy L s~.
    std::string fl = "state,observable,sizes,slope,log2_prefactor,r2\n";
    {
        std::map<std::pair<std::string, std::string>, std::vector<const EquilibriumRow*>> groups;
        for (const auto& r : rows)
            if (r.observable != "fid" && r.th.ok) groups[{r.state, r.observable}].push_back(&r);
        for (const auto& [key, members] : groups) {
            if (members.size() < 3) continue;
            std::vector<double> s, d;
            for (const auto* m : members) {
                s.push_back(m->L * m->th.s_tilde_per_site);
                d.push_back(m->stats.delta_o2);
            }
            try {
                const auto f = fluctuation_scaling(s, d);
                fl += csv_row({key.first, key.second, std::to_string(members.size()), fmt(f.slope),
                               fmt(f.log2_prefactor), fmt(f.r2)});
            } catch (const FitError&) {
                // non-positive fluctuations
            }
        }
    }

    // G_l = S_bar_l - l S~/L~ per (state, L).
    std::string al = "state,L,epsilon,l,S_bar,G,g_mean,g_spread,I_bar_11,I_tilde_11\n";
    {
        std::map<std::pair<std::string, int>, std::map<std::string, const EquilibriumRow*>> byst;
        for (const auto& r : rows) byst[{r.state, r.L}][r.observable] = &r;
        for (const auto& [key, obs] : byst) {
            std::vector<double> s_bar;
            for (int l = 1;; ++l) {
                auto it = obs.find("S" + std::to_string(l));
                if (it == obs.end()) break;
                s_bar.push_back(it->second->stats.o_bar);
            }
            if (s_bar.empty()) continue;
            const auto* first = obs.begin()->second;
            if (!first->th.ok) continue;
            double ib = kNaN, it11 = kNaN;
            if (auto it = obs.find("I_1_1"); it != obs.end()) {
                ib = it->second->stats.o_bar;
                it11 = it->second->o_tilde;
            } else if (table && table->l_max() >= 2) {
                it11 = thermal_mutual_information(first->th.beta, 1, 1, *table);
            }
            const auto a = area_law_extract(s_bar, first->th.s_tilde_per_site, ib, it11);
            for (std::size_t l = 0; l < s_bar.size(); ++l)
                al += csv_row({key.first, std::to_string(key.second), fmt(first->epsilon), std::to_string(l + 1),
                               fmt(s_bar[l]), fmt(a.g[l]), fmt(a.g_mean), fmt(a.g_spread), fmt(a.i_bar),
                               fmt(a.i_tilde)});
        }
    }
    return {eq, eth, fl, tau, al};
}

inline json analysis_inputs(const RunConfig& c, const std::map<std::string, std::string>& traj_hashes,
                            const std::optional<std::string>& thermal_hash)
{
    auto j = base_inputs(c);
    j["kind"] = "analysis";
    j["analysis"] = c.to_json()["analysis"];
    j["thermal"] = c.thermal.enabled ? c.to_json()["thermal"] : json(nullptr);
    j["thermal_sha1"] = thermal_hash ? json(*thermal_hash) : json(nullptr);
    j["trajectories"] = traj_hashes;
    return j;
}

inline TaskOutcome run_heisenberg(const RunConfig& c, const ExecuteOptions& ex)
{
    TaskOutcome out;
    const auto& H = c.analysis.heisenberg;
    const auto basis = load_or_build_basis(RingGeometry{H.L}, dynamics_sector(), c.effective_cache_dir());
    std::string summary = "state,L,plateau,ipr,onset\n";
    for (const auto& name : H.states) {
        if (ex.log) ex.log("Heisenberg scan " + trajectory_stem(name, H.L));
        const auto psi = build_bloch_state(catalog_lookup(name).params(), basis);
        const auto scan = heisenberg_scan(psi, c.params, H.options);
        summary += csv_row({name, std::to_string(H.L), fmt(scan.plateau), fmt(scan.ipr), fmt(scan.onset)});
        std::string blocks = "width,t_mid,fidelity\n";
        for (const auto& b : scan.blocks)
            for (std::size_t i = 0; i < b.t_mid.size(); ++i)
                blocks += csv_row({fmt(b.width), fmt(b.t_mid[i]), fmt(b.value[i])});
        out.outputs["heisenberg/" + trajectory_stem(name, H.L) + ".csv"] = blocks;
    }
    out.outputs["heisenberg.csv"] = summary;
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Figures

struct FigureInfo {
    std::string id;
    std::string title;
};

inline const std::vector<FigureInfo>& figure_catalog()
{
    static const std::vector<FigureInfo> figs{
        {"fig1", "Bloch states in the (epsilon, v) plane with the thermal variance"},
        {"fig2a", "y series: equilibrium deviation against (v - v~)/2L"},
        {"fig2b", "z series: equilibrium deviation against (v - v~)/2L"},
        {"fig3", "Temporal fluctuations against thermal entropy"},
        {"fig5", "Entanglement entropy deviation against (v - v~)/2L"},
        {"fig6", "Area-law term G_l against energy density"},
        {"fig7", "Mutual information I_ll against cluster size with the Page value"},
        {"fig8", "C2 relaxation on a log scale with exponential fits"},
        {"fig9", "Equilibrium C_r against r with thermal values"},
        {"fig10", "Relaxation time against system size"},
        {"fig11", "Relaxation time against energy variance"},
        {"fig12", "Relaxation time per observable"},
    };
    return figs;
}

inline std::string figure_ids_text()
{
    std::string s;
    for (const auto& f : figure_catalog()) s += (s.empty() ? "" : ", ") + f.id;
    return s;
}

namespace detail {

class FigureInputs {
  public:
    explicit FigureInputs(fs::path root) : root_(std::move(root)) {}

    const CsvTable* table(const std::string& rel)
    {
        auto it = cache_.find(rel);
        if (it != cache_.end()) return it->second ? &*it->second : nullptr;
        std::optional<CsvTable> t;
        if (fs::exists(root_ / rel)) t = CsvTable::load(root_ / rel);
        auto& slot = cache_[rel] = std::move(t);
        return slot ? &*slot : nullptr;
    }

    const CsvTable& need(const std::string& rel)
    {
        const auto* t = table(rel);
        if (!t) missing.push_back(rel);
        if (!t) throw MissingInputs{};
        return *t;
    }

    void require(bool cond, const std::string& what)
    {
        if (!cond) {
            missing.push_back(what);
            throw MissingInputs{};
        }
    }

    const fs::path& root() const noexcept { return root_; }

    struct MissingInputs {};
    std::vector<std::string> missing;

  private:
    fs::path root_;
    std::map<std::string, std::optional<CsvTable>> cache_;
};

inline int largest_L(const CsvTable& t, const std::function<bool(std::size_t)>& keep)
{
    int L = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (keep(i)) L = std::max(L, static_cast<int>(t.num(i, "L")));
    return L;
}

inline std::string deviation_figure(FigureInputs& in, const std::string& series, const std::string& obs,
                                    const std::string& title)
{
    const auto& eq = in.need("equilibrium.csv");
    const auto& eth = in.need("eth_fit.csv");
    std::map<int, svg::Series> by_L;
    double xmax = 0;
    for (std::size_t i = 0; i < eq.size(); ++i) {
        if (eq.str(i, "series") != series || eq.str(i, "observable") != obs) continue;
        const double x = 0.5 * eq.num(i, "x"), y = eq.num(i, "deviation");
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        const int L = static_cast<int>(eq.num(i, "L"));
        auto& s = by_L[L];
        s.label = "L=" + std::to_string(L);
        s.style = svg::Style::points;
        s.x.push_back(x);
        s.y.push_back(y);
        xmax = std::max(xmax, std::abs(x));
    }
    in.require(!by_L.empty(), "equilibrium rows for series " + series + ", observable " + obs);
    svg::Plot p{title, "(v - v~) / 2L", obs + " deviation", false, false, {}};
    for (auto& [L, s] : by_L) p.series.push_back(std::move(s));
    for (std::size_t i = 0; i < eth.size(); ++i)
        if (eth.str(i, "series") == series && eth.str(i, "observable") == obs && eth.num(i, "L") == 0) {
            const double d2 = eth.num(i, "thermal_d2");
            if (std::isfinite(d2)) p.series.push_back({"thermal d2", {-xmax, xmax}, {-xmax * d2, xmax * d2}, svg::Style::dashed});
            const double fit = eth.num(i, "slope");
            p.series.push_back({"fit", {-xmax, xmax}, {-xmax * fit, xmax * fit}, svg::Style::line});
        }
    return svg::render(p);
}

inline std::string make_figure(const std::string& id, FigureInputs& in)
{
    if (id == "fig1") {
        std::string rel;
        int best = 0;
        for (int L = 4; L <= 40; ++L)
            if (in.table(thermal_csv_name(L))) best = L;
        in.require(best > 0, "thermal_L<L>.csv");
        rel = thermal_csv_name(best);
        const auto& t = in.need(rel);
        svg::Plot p{"Initial states and thermal variance (L~=" + std::to_string(best) + ")", "epsilon", "v", false, false, {}};
        p.series.push_back({"v~(epsilon)", t.column("epsilon"), t.column("v_tilde"), svg::Style::line});
        svg::Series cat{"catalog", {}, {}, svg::Style::points};
        for (const auto& e : catalog()) {
            cat.x.push_back(e.epsilon_ref);
            cat.y.push_back(e.v_ref);
        }
        p.series.push_back(std::move(cat));
        return svg::render(p);
    }
    if (id == "fig2a") return deviation_figure(in, "y", "C2", "y series deviation of C2");
    if (id == "fig2b") return deviation_figure(in, "z", "C2", "z series deviation of C2");
    if (id == "fig3") {
        const auto& eq = in.need("equilibrium.csv");
        std::map<std::string, svg::Series> by_state;
        for (std::size_t i = 0; i < eq.size(); ++i) {
            if (eq.str(i, "observable") != "C0") continue;
            const double s = eq.num(i, "L") * eq.num(i, "s_tilde_per_site");
            if (!std::isfinite(s)) continue;
            auto& ser = by_state[eq.str(i, "state")];
            ser.label = eq.str(i, "state");
            ser.x.push_back(s);
            ser.y.push_back(eq.num(i, "delta_O2"));
        }
        in.require(!by_state.empty(), "equilibrium rows for C0 with thermal entropy");
        svg::Plot p{"Temporal fluctuations of C0", "L S~/L~ (bits)", "delta O^2", false, true, {}};
        for (auto& [k, s] : by_state) p.series.push_back(std::move(s));
        return svg::render(p);
    }
    if (id == "fig5") {
        const auto& eq = in.need("equilibrium.csv");
        int lmax = 0;
        for (std::size_t i = 0; i < eq.size(); ++i) {
            const auto& o = eq.str(i, "observable");
            if (o.size() >= 2 && o[0] == 'S' && std::isfinite(eq.num(i, "O_tilde"))) lmax = std::max(lmax, std::stoi(o.substr(1)));
        }
        in.require(lmax > 0, "equilibrium rows for an entropy observable with thermal values");
        const auto obs = "S" + std::to_string(lmax);
        std::map<int, svg::Series> by_L;
        for (std::size_t i = 0; i < eq.size(); ++i) {
            if (eq.str(i, "observable") != obs) continue;
            const double x = 0.5 * eq.num(i, "x"), y = eq.num(i, "deviation");
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            const int L = static_cast<int>(eq.num(i, "L"));
            auto& s = by_L[L];
            s.label = "L=" + std::to_string(L);
            s.style = svg::Style::points;
            s.x.push_back(x);
            s.y.push_back(y);
        }
        svg::Plot p{"Deviation of " + obs + " from the thermal cluster entropy", "(v - v~) / 2L", obs + " deviation (bits)",
                    false, false, {}};
        for (auto& [L, s] : by_L) p.series.push_back(std::move(s));
        return svg::render(p);
    }
    if (id == "fig6") {
        const auto& al = in.need("arealaw.csv");
        in.require(al.size() > 0, "arealaw.csv rows");
        const int L = largest_L(al, [](std::size_t) { return true; });
        std::map<int, svg::Series> by_l;
        for (std::size_t i = 0; i < al.size(); ++i) {
            if (al.num(i, "L") != L) continue;
            const int l = static_cast<int>(al.num(i, "l"));
            auto& s = by_l[l];
            s.label = "l=" + std::to_string(l);
            s.style = svg::Style::points;
            s.x.push_back(al.num(i, "epsilon"));
            s.y.push_back(al.num(i, "G"));
        }
        svg::Plot p{"Area-law term at L=" + std::to_string(L), "epsilon", "S_bar_l - l S~/L~ (bits)", false, false, {}};
        for (auto& [l, s] : by_l) p.series.push_back(std::move(s));
        return svg::render(p);
    }
    if (id == "fig7") {
        const auto& eq = in.need("equilibrium.csv");
        auto is_ill = [&](std::size_t i) {
            const auto& o = eq.str(i, "observable");
            if (o.rfind("I_", 0) != 0) return false;
            const auto us = o.find('_', 2);
            return us != std::string::npos && o.substr(2, us - 2) == o.substr(us + 1);
        };
        const int L = largest_L(eq, is_ill);
        in.require(L > 0, "equilibrium rows for I_l_l observables");
        std::map<std::string, svg::Series> by_state;
        int lmax = 0;
        for (std::size_t i = 0; i < eq.size(); ++i) {
            if (!is_ill(i) || eq.num(i, "L") != L) continue;
            const auto& o = eq.str(i, "observable");
            const int l = std::stoi(o.substr(2, o.find('_', 2) - 2));
            lmax = std::max(lmax, l);
            auto& s = by_state[eq.str(i, "state")];
            s.label = eq.str(i, "state");
            s.style = svg::Style::points;
            s.x.push_back(l);
            s.y.push_back(eq.num(i, "O_bar"));
        }
        svg::Plot p{"Mutual information at L=" + std::to_string(L), "l", "I_ll (bits)", false, true, {}};
        for (auto& [k, s] : by_state) p.series.push_back(std::move(s));
        svg::Series page{"Page", {}, {}, svg::Style::dashed};
        for (int l = 1; 4 * l <= L && l <= std::max(lmax, 1); ++l) {
            page.x.push_back(l);
            page.y.push_back(page_mutual_information(l, L));
        }
        p.series.push_back(std::move(page));
        return svg::render(p);
    }
    if (id == "fig8") {
        const auto& tau = in.need("tau.csv");
        const auto& eq = in.need("equilibrium.csv");
        svg::Plot p{"C2 relaxation", "t", "|C2 - C2_bar|", false, true, {}};
        int shown = 0;
        for (std::size_t i = 0; i < tau.size() && shown < 6; ++i) {
            if (tau.str(i, "observable") != "C2" || tau.str(i, "accepted") != "1") continue;
            const auto state = tau.str(i, "state");
            const int L = static_cast<int>(tau.num(i, "L"));
            double o_bar = kNaN;
            for (std::size_t k = 0; k < eq.size(); ++k)
                if (eq.str(k, "state") == state && eq.num(k, "L") == L && eq.str(k, "observable") == "C2")
                    o_bar = eq.num(k, "O_bar");
            const auto rel = "trajectories/" + trajectory_stem(state, L) + ".csv";
            const auto& tr = in.need(rel);
            svg::Series s{trajectory_stem(state, L), tr.column("t"), tr.column("C2"), svg::Style::line};
            for (auto& y : s.y) y = std::abs(y - o_bar);
            p.series.push_back(std::move(s));
            const double a = tau.num(i, "t_a"), b = tau.num(i, "t_b");
            const double sl = tau.num(i, "slope"), ic = tau.num(i, "intercept");
            p.series.push_back({"fit " + trajectory_stem(state, L), {a, b}, {std::exp(ic + sl * a), std::exp(ic + sl * b)},
                                svg::Style::dashed});
            ++shown;
        }
        in.require(shown > 0, "accepted C2 relaxation fits in tau.csv");
        return svg::render(p);
    }
    if (id == "fig9") {
        const auto& eq = in.need("equilibrium.csv");
        auto keep = [&](std::size_t i) { return eq.str(i, "series") == "y" && eq.str(i, "observable")[0] == 'C'; };
        const int L = largest_L(eq, keep);
        in.require(L > 0, "equilibrium rows for correlators of the y series");
        std::map<std::string, svg::Series> by_state;
        std::map<int, std::pair<double, int>> thermal;
        for (std::size_t i = 0; i < eq.size(); ++i) {
            if (!keep(i) || eq.num(i, "L") != L) continue;
            const int r = std::stoi(eq.str(i, "observable").substr(1));
            auto& s = by_state[eq.str(i, "state")];
            s.label = eq.str(i, "state");
            s.x.push_back(r);
            s.y.push_back(eq.num(i, "O_bar"));
            if (const double t = eq.num(i, "O_tilde"); std::isfinite(t)) {
                thermal[r].first += t;
                thermal[r].second += 1;
            }
        }
        svg::Plot p{"Equilibrium energy correlators, y series, L=" + std::to_string(L), "r", "C_r", false, false, {}};
        for (auto& [k, s] : by_state) p.series.push_back(std::move(s));
        svg::Series th{"thermal", {}, {}, svg::Style::points};
        for (const auto& [r, acc] : thermal) {
            th.x.push_back(r);
            th.y.push_back(acc.first / acc.second);
        }
        if (!th.x.empty()) p.series.push_back(std::move(th));
        return svg::render(p);
    }
    if (id == "fig10" || id == "fig11" || id == "fig12") {
        const auto& tau = in.need("tau.csv");
        svg::Plot p;
        std::map<std::string, svg::Series> groups;
        std::vector<std::string> obs_order;
        const int Lmax = largest_L(tau, [&](std::size_t i) { return tau.str(i, "accepted") == "1"; });
        for (std::size_t i = 0; i < tau.size(); ++i) {
            if (tau.str(i, "accepted") != "1") continue;
            const auto& o = tau.str(i, "observable");
            const double t = tau.num(i, "tau");
            if (id == "fig10" && o == "C2") {
                auto& s = groups[tau.str(i, "state")];
                s.label = tau.str(i, "state");
                s.x.push_back(tau.num(i, "L"));
                s.y.push_back(t);
            } else if (id == "fig11" && o == "C2" && tau.num(i, "L") == Lmax) {
                const auto ser = tau.str(i, "series").empty() ? std::string("other") : tau.str(i, "series");
                auto& s = groups[ser];
                s.label = ser;
                s.style = svg::Style::points;
                s.x.push_back(tau.num(i, "variance"));
                s.y.push_back(t);
            } else if (id == "fig12" && tau.num(i, "L") == Lmax) {
                auto it = std::find(obs_order.begin(), obs_order.end(), o);
                if (it == obs_order.end()) obs_order.push_back(o);
                const auto k = std::find(obs_order.begin(), obs_order.end(), o) - obs_order.begin();
                auto& s = groups[tau.str(i, "state")];
                s.label = tau.str(i, "state");
                s.style = svg::Style::points;
                s.x.push_back(static_cast<double>(k + 1));
                s.y.push_back(t);
            }
        }
        in.require(!groups.empty(), "accepted relaxation fits in tau.csv");
        if (id == "fig10") p = {"C2 relaxation time against L", "L", "tau", false, false, {}};
        if (id == "fig11") p = {"C2 relaxation time against v, L=" + std::to_string(Lmax), "v", "tau", false, false, {}};
        if (id == "fig12") {
            std::string names;
            for (std::size_t k = 0; k < obs_order.size(); ++k) names += (k ? " " : "") + std::to_string(k + 1) + "=" + obs_order[k];
            p = {"Relaxation time per observable, L=" + std::to_string(Lmax), "observable (" + names + ")", "tau", false, false, {}};
        }
        for (auto& [k, s] : groups) p.series.push_back(std::move(s));
        return svg::render(p);
    }
    throw UsageError("unknown figure id '" + id + "'; available: " + figure_ids_text());
}

} // namespace detail

// SVG text per requested id, built from the CSV outputs under output_dir.
inline std::map<std::string, std::string> reproduce_figures(const std::vector<std::string>& ids, const fs::path& output_dir)
{
    for (const auto& id : ids) {
        const auto& figs = figure_catalog();
        if (std::none_of(figs.begin(), figs.end(), [&](const FigureInfo& f) { return f.id == id; }))
            throw UsageError("unknown figure id '" + id + "'; available: " + figure_ids_text());
    }
    detail::FigureInputs in(output_dir);
    std::map<std::string, std::string> out;
    std::vector<std::string> missing;
    for (const auto& id : ids) {
        try {
            out[id] = detail::make_figure(id, in);
        } catch (const detail::FigureInputs::MissingInputs&) {
            missing.push_back(id + ": " + in.missing.back());
        }
    }
    if (!missing.empty()) {
        std::string msg = "missing inputs for figures:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw Error(msg);
    }
    return out;
}

// ---------------------------------------------------------------------------

inline RunReport plan_and_execute(const RunConfig& cfg, const ExecuteOptions& ex = {})
{
    cfg.validate();
    const auto root = cfg.output_dir;
    fs::create_directories(root);
    fs::create_directories(cfg.effective_cache_dir());
    const auto manifest_path = root / "manifest.json";

    RunReport rep;
    rep.manifest = RunManifest::load(manifest_path);
    const auto run = rep.manifest.begin_run(cfg);
    std::mutex mu;

    auto log = [&](const std::string& s) {
        if (ex.log) {
            std::lock_guard lk(mu);
            ex.log(s);
        }
    };
    ExecuteOptions inner{ex.force, log};

    // Runs one task unless the manifest already holds it; returns output hashes.
    auto task = [&](const std::string& id, const std::string& kind, const json& inputs,
                    const std::function<TaskOutcome()>& body) -> std::optional<std::map<std::string, std::string>> {
        const auto input_sha1 = io::sha1_hex(inputs.dump());
        {
            std::lock_guard lk(mu);
            if (!ex.force && rep.manifest.completed(id, input_sha1, root)) {
                rep.skipped.push_back(id);
                rep.manifest.mark_skipped(run, id);
                std::map<std::string, std::string> hashes;
                for (const auto& [rel, sha] : (*rep.manifest.latest(id))["outputs"].items()) hashes[rel] = sha;
                if (ex.log) ex.log("skip " + id + " (up to date)");
                return hashes;
            }
        }
        json rec{{"id", id}, {"kind", kind}, {"run", run}, {"input_sha1", input_sha1}, {"started", detail::iso_now()}};
        TaskOutcome out;
        try {
            out = body();
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        std::map<std::string, std::string> hashes;
        for (const auto& [rel, bytes] : out.outputs) {
            io::write_file_atomic(root / rel, bytes);
            hashes[rel] = io::sha1_hex(bytes);
        }
        rec["finished"] = detail::iso_now();
        rec["status"] = out.error.empty() ? "done" : "failed";
        rec["outputs"] = hashes;
        rec["caches"] = out.caches;
        if (!out.info.empty()) rec["info"] = out.info;
        if (!out.error.empty()) rec["error"] = out.error;
        std::lock_guard lk(mu);
        rep.manifest.record(rec);
        rep.manifest.save(manifest_path);
        if (out.error.empty()) {
            rep.executed.push_back(id);
            return hashes;
        }
        rep.failed.push_back(id);
        if (ex.log) ex.log("task " + id + " failed: " + out.error);
        return std::nullopt;
    };

    fs::create_directories(root / "trajectories");

    std::optional<std::string> thermal_hash;
    if (cfg.thermal.enabled) {
        const auto id = "thermal/L" + std::to_string(cfg.thermal.L);
        if (auto h = task(id, "thermal", detail::thermal_inputs(cfg), [&] { return detail::run_thermal(cfg, inner); }))
            thermal_hash = h->begin() != h->end() ? h->begin()->second : "";
    }

    struct Job {
        const StateRequest* state;
        int L;
    };
    std::vector<Job> jobs;
    for (const auto& s : cfg.states)
        for (int L : cfg.sizes) jobs.push_back({&s, L});
    std::map<std::string, std::string> traj_hashes;
    std::vector<std::pair<std::string, int>> done;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < jobs.size();) {
            const auto& j = jobs[i];
            const auto id = "trajectory/" + trajectory_stem(j.state->name, j.L);
            const auto inputs = detail::trajectory_inputs(cfg, *j.state, j.L);
            const auto sha = io::sha1_hex(inputs.dump());
            auto h = task(id, "trajectory", inputs,
                          [&] { return detail::run_trajectory(cfg, *j.state, j.L, sha, inner); });
            if (h) {
                std::lock_guard lk(mu);
                for (const auto& [rel, s] : *h) traj_hashes[rel] = s;
                done.emplace_back(j.state->name, j.L);
            }
        }
    };
    {
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), std::max<std::size_t>(jobs.size(), 1));
        std::vector<std::thread> pool;
        for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
    }
    std::sort(done.begin(), done.end(), [&](const auto& a, const auto& b) {
        const auto ia = std::find_if(cfg.states.begin(), cfg.states.end(), [&](const auto& s) { return s.name == a.first; });
        const auto ib = std::find_if(cfg.states.begin(), cfg.states.end(), [&](const auto& s) { return s.name == b.first; });
        return std::pair(ia - cfg.states.begin(), a.second) < std::pair(ib - cfg.states.begin(), b.second);
    });

    if (!done.empty()) {
        task("analysis", "analysis", detail::analysis_inputs(cfg, traj_hashes, thermal_hash), [&] {
            std::vector<LoadedTrajectory> trajs;
            for (const auto& [name, L] : done) trajs.push_back(load_trajectory(root, name, L));
            std::optional<SpectrumTable> table;
            std::optional<ThermalCurve> curve;
            if (cfg.thermal.enabled && thermal_hash) {
                table = detail::load_spectrum(cfg, inner);
                curve.emplace(*table, cfg.thermal.beta_min, cfg.thermal.beta_max, cfg.thermal.beta_step);
            }
            const auto t = detail::run_analysis_tables(cfg, trajs, table ? &*table : nullptr, curve ? &*curve : nullptr);
            TaskOutcome out;
            out.outputs = {{"equilibrium.csv", t.equilibrium},
                           {"eth_fit.csv", t.eth_fit},
                           {"fluctuation.csv", t.fluctuation},
                           {"tau.csv", t.tau},
                           {"arealaw.csv", t.arealaw}};
            return out;
        });
    }

    if (cfg.analysis.heisenberg.enabled) {
        auto inputs = detail::base_inputs(cfg);
        inputs["kind"] = "heisenberg";
        inputs["heisenberg"] = cfg.to_json()["analysis"]["heisenberg"];
        task("heisenberg", "heisenberg", inputs, [&] { return detail::run_heisenberg(cfg, inner); });
    }

    if (!cfg.figures.empty()) {
        auto inputs = detail::base_inputs(cfg);
        inputs["kind"] = "figures";
        inputs["figures"] = cfg.figures;
        json deps = json::object();
        for (const auto* rel : {"equilibrium.csv", "eth_fit.csv", "tau.csv", "arealaw.csv"})
            if (fs::exists(root / rel)) deps[rel] = io::sha1_hex(io::read_file(root / rel));
        if (cfg.thermal.enabled && fs::exists(root / thermal_csv_name(cfg.thermal.L)))
            deps[thermal_csv_name(cfg.thermal.L)] = io::sha1_hex(io::read_file(root / thermal_csv_name(cfg.thermal.L)));
        deps["trajectories"] = traj_hashes;
        inputs["depends"] = deps;
        task("figures", "figures", inputs, [&] {
            TaskOutcome out;
            for (auto& [id, svg_text] : reproduce_figures(cfg.figures, root)) out.outputs["figures/" + id + ".svg"] = svg_text;
            return out;
        });
    }

    rep.manifest.end_run(run, rep.ok());
    rep.manifest.save(manifest_path);
    return rep;
}

} // namespace thermalab
