#pragma once

// Run configuration (TOML or JSON) and the append-only run manifest.

#include "thermalab/analysis.hpp"
#include "thermalab/bloch.hpp"
#include "thermalab/errors.hpp"
#include "thermalab/io.hpp"
#include "thermalab/krylov.hpp"
#include "thermalab/observables.hpp"
#include "thermalab/operators.hpp"

#include <json.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace thermalab {

using json = nlohmann::ordered_json;

struct StateRequest {
    std::string name;
    BlochParams angles;
    double theta_over_pi = 0.0;
    double phi_over_pi = 0.0;
    std::optional<std::uint64_t> random_seed;  // sector-random state when set
    bool from_catalog = false;
};

struct ThermalSettings {
    bool enabled = true;
    int L = 12;
    int l_max = 3;
    double beta_min = -3.0;
    double beta_max = 3.0;
    double beta_step = 1e-3;
};

struct HeisenbergSettings {
    bool enabled = false;
    std::vector<std::string> states{"Y_+", "Z_-"};
    int L = 8;
    HeisenbergOptions options;
};

struct AnalysisSettings {
    double fraction = 0.25;
    RelaxationOptions relax;
    std::map<std::string, std::pair<double, double>> windows;  // "state/L/observable"
    HeisenbergSettings heisenberg;
};

struct ResourceGuards {
    int max_L_evolve = 24;
    int max_L_diag = 16;
    bool allow_large = false;
};

struct RunConfig {
    HamiltonianParams params = HamiltonianParams::benchmark();
    std::vector<StateRequest> states;
    std::vector<int> sizes;
    std::vector<std::string> observables;  // empty: the default set for each L
    KrylovConfig krylov;
    ThermalSettings thermal;
    AnalysisSettings analysis;
    std::filesystem::path output_dir = "thermalab_out";
    std::optional<std::filesystem::path> cache_dir;
    std::uint64_t seed = 0;
    int workers = 1;
    std::vector<std::string> figures;
    ResourceGuards guards;

    static RunConfig from_json(const json& j);
    static RunConfig parse(const std::string& text, bool toml);
    static RunConfig load(const std::filesystem::path& path);

    json to_json() const;
    void validate() const;
    std::string sha1() const { return io::sha1_hex(to_json().dump()); }

    // THERMALAB_CACHE, then the configured directory, then <output>/cache.
    std::filesystem::path effective_cache_dir() const
    {
        if (const char* env = std::getenv("THERMALAB_CACHE"); env && *env) return env;
        return cache_dir ? *cache_dir : output_dir / "cache";
    }

    std::vector<ObservableSpec> observables_for(int L) const
    {
        if (observables.empty()) return default_observables(L);
        return parse_observables(observables);
    }
};

// ---------------------------------------------------------------------------

namespace detail {

inline json toml_to_json(const toml::node& n)
{
    if (const auto* t = n.as_table()) {
        json out = json::object();
        for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
        return out;
    }
    if (const auto* a = n.as_array()) {
        json out = json::array();
        for (const auto& v : *a) out.push_back(toml_to_json(v));
        return out;
    }
    if (const auto* s = n.as_string()) return s->get();
    if (const auto* i = n.as_integer()) return i->get();
    if (const auto* d = n.as_floating_point()) return d->get();
    if (const auto* b = n.as_boolean()) return b->get();
    throw ConfigError("unsupported TOML value type (dates and times are not accepted)");
}

// Reads an object and rejects keys nobody asked for.
class StrictObject {
  public:
    StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object()) throw ConfigError(where_ + " must be a table");
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown key '" + k + "' in " + where_);
    }

    const json* get(const std::string& key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    void read(const std::string& key, T& out)
    {
        if (const json* v = get(key)) {
            try {
                if constexpr (std::is_floating_point_v<T>) {
                    if (!v->is_number()) throw ConfigError("");
                } else if constexpr (std::is_same_v<T, bool>) {
                    if (!v->is_boolean()) throw ConfigError("");
                } else if constexpr (std::is_integral_v<T>) {
                    if (!v->is_number_integer()) throw ConfigError("");
                }
                out = v->get<T>();
            } catch (const std::exception&) {
                throw ConfigError("key '" + key + "' in " + where_ + " has the wrong type");
            }
        }
    }

    std::string where(const std::string& key) const { return where_ + "." + key; }

  private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline bool valid_state_name(const std::string& s)
{
    if (s.empty() || s.size() > 64) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '+' || c == '-' || c == '.')) return false;
    return s != "." && s != "..";
}

inline StateRequest parse_state(const json& j, std::uint64_t seed)
{
    StateRequest r;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "random" || s.rfind("random:", 0) == 0) {
            std::uint64_t sd = seed;
            if (s.size() > 7) {
                try {
                    std::size_t used = 0;
                    sd = std::stoull(s.substr(7), &used);
                    if (used != s.size() - 7) throw ConfigError("");
                } catch (const std::exception&) {
                    throw ConfigError("bad random state seed in '" + s + "'");
                }
            }
            r.random_seed = sd;
            r.name = "random_" + std::to_string(sd);
            return r;
        }
        const auto& e = catalog_lookup(s);
        r.name = e.name;
        r.theta_over_pi = e.theta_over_pi;
        r.phi_over_pi = e.phi_over_pi;
        r.angles = e.params();
        r.from_catalog = true;
        return r;
    }
    StrictObject o(j, "state entry");
    o.read("name", r.name);
    if (!o.get("theta_over_pi") || !o.get("phi_over_pi"))
        throw ConfigError("explicit states need theta_over_pi and phi_over_pi");
    o.read("theta_over_pi", r.theta_over_pi);
    o.read("phi_over_pi", r.phi_over_pi);
    o.finish();
    if (!std::isfinite(r.theta_over_pi) || !std::isfinite(r.phi_over_pi))
        throw ConfigError("state angles must be finite");
    if (r.name.empty()) r.name = "theta" + io::format_double(r.theta_over_pi) + "_phi" + io::format_double(r.phi_over_pi);
    r.angles = BlochParams::from_fractions(r.theta_over_pi, r.phi_over_pi);
    return r;
}

inline json state_to_json(const StateRequest& s)
{
    if (s.random_seed) return "random:" + std::to_string(*s.random_seed);
    if (s.from_catalog) return s.name;
    return json{{"name", s.name}, {"theta_over_pi", s.theta_over_pi}, {"phi_over_pi", s.phi_over_pi}};
}

inline std::string iso_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace detail

inline RunConfig RunConfig::from_json(const json& j)
{
    RunConfig c;
    detail::StrictObject root(j, "config");
    if (const json* m = root.get("model")) {
        detail::StrictObject o(*m, "model");
        o.read("h_x", c.params.h_x);
        o.read("h_z", c.params.h_z);
        o.finish();
    }
    root.read("seed", c.seed);
    if (const json* s = root.get("states")) {
        if (!s->is_array()) throw ConfigError("states must be a list");
        for (const auto& e : *s) c.states.push_back(detail::parse_state(e, c.seed));
    }
    root.read("sizes", c.sizes);
    root.read("observables", c.observables);
    if (const json* k = root.get("krylov")) {
        detail::StrictObject o(*k, "krylov");
        o.read("m_max", c.krylov.m_max);
        o.read("step_tolerance", c.krylov.step_tolerance);
        o.read("dt", c.krylov.dt);
        o.read("t_final", c.krylov.t_final);
        o.read("max_halvings", c.krylov.max_halvings);
        o.read("checkpoint_every", c.krylov.checkpoint_every);
        o.finish();
    }
    if (const json* t = root.get("thermal")) {
        detail::StrictObject o(*t, "thermal");
        o.read("enabled", c.thermal.enabled);
        o.read("L", c.thermal.L);
        o.read("l_max", c.thermal.l_max);
        o.read("beta_min", c.thermal.beta_min);
        o.read("beta_max", c.thermal.beta_max);
        o.read("beta_step", c.thermal.beta_step);
        o.finish();
    }
    if (const json* a = root.get("analysis")) {
        detail::StrictObject o(*a, "analysis");
        o.read("fraction", c.analysis.fraction);
        o.read("r2_threshold", c.analysis.relax.r2_threshold);
        o.read("noise_factor", c.analysis.relax.noise_factor);
        o.read("confidence", c.analysis.relax.confidence);
        o.read("min_points", c.analysis.relax.min_points);
        if (const json* w = o.get("windows")) {
            if (!w->is_object()) throw ConfigError("analysis.windows must be a table of [t_a, t_b] pairs");
            for (const auto& [k, v] : w->items()) {
                if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                    throw ConfigError("window '" + k + "' must be [t_a, t_b]");
                c.analysis.windows[k] = {v[0].get<double>(), v[1].get<double>()};
            }
        }
        if (const json* h = o.get("heisenberg")) {
            detail::StrictObject hs(*h, "analysis.heisenberg");
            auto& H = c.analysis.heisenberg;
            hs.read("enabled", H.enabled);
            hs.read("states", H.states);
            hs.read("L", H.L);
            hs.read("t_final", H.options.t_final);
            hs.read("dt", H.options.dt);
            hs.read("windows", H.options.windows);
            hs.read("max_L", H.options.max_L);
            hs.finish();
        }
        o.finish();
    }
    if (const json* o = root.get("output_dir")) {
        if (!o->is_string()) throw ConfigError("output_dir must be a string");
        c.output_dir = o->get<std::string>();
    }
    if (const json* o = root.get("cache_dir"); o && !o->is_null()) {
        if (!o->is_string()) throw ConfigError("cache_dir must be a string");
        c.cache_dir = std::filesystem::path(o->get<std::string>());
    }
    root.read("workers", c.workers);
    root.read("figures", c.figures);
    if (const json* g = root.get("guards")) {
        detail::StrictObject o(*g, "guards");
        o.read("max_L_evolve", c.guards.max_L_evolve);
        o.read("max_L_diag", c.guards.max_L_diag);
        o.read("allow_large", c.guards.allow_large);
        o.finish();
    }
    root.finish();
    c.validate();
    return c;
}

inline RunConfig RunConfig::parse(const std::string& text, bool as_toml)
{
    json j;
    if (as_toml) {
        try {
            j = detail::toml_to_json(toml::parse(text));
        } catch (const toml::parse_error& e) {
            throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()));
        }
    } else {
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("JSON parse error: ") + e.what());
        }
    }
    return from_json(j);
}

inline RunConfig RunConfig::load(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    const auto ext = path.extension().string();
    if (ext != ".toml" && ext != ".json") throw ConfigError("config must be .toml or .json: " + path.string());
    return parse(io::read_file(path), ext == ".toml");
}

inline json RunConfig::to_json() const
{
    json states_j = json::array();
    for (const auto& s : states) states_j.push_back(detail::state_to_json(s));
    json windows_j = json::object();
    for (const auto& [k, w] : analysis.windows) windows_j[k] = {w.first, w.second};
    const auto& H = analysis.heisenberg;
    return json{
        {"model", {{"h_x", params.h_x}, {"h_z", params.h_z}}},
        {"seed", seed},
        {"states", states_j},
        {"sizes", sizes},
        {"observables", observables},
        {"krylov",
         {{"m_max", krylov.m_max},
          {"step_tolerance", krylov.step_tolerance},
          {"dt", krylov.dt},
          {"t_final", krylov.t_final},
          {"max_halvings", krylov.max_halvings},
          {"checkpoint_every", krylov.checkpoint_every}}},
        {"thermal",
         {{"enabled", thermal.enabled},
          {"L", thermal.L},
          {"l_max", thermal.l_max},
          {"beta_min", thermal.beta_min},
          {"beta_max", thermal.beta_max},
          {"beta_step", thermal.beta_step}}},
        {"analysis",
         {{"fraction", analysis.fraction},
          {"r2_threshold", analysis.relax.r2_threshold},
          {"noise_factor", analysis.relax.noise_factor},
          {"confidence", analysis.relax.confidence},
          {"min_points", analysis.relax.min_points},
          {"windows", windows_j},
          {"heisenberg",
           {{"enabled", H.enabled},
            {"states", H.states},
            {"L", H.L},
            {"t_final", H.options.t_final},
            {"dt", H.options.dt},
            {"windows", H.options.windows},
            {"max_L", H.options.max_L}}}}},
        {"output_dir", output_dir.string()},
        {"cache_dir", cache_dir ? json(cache_dir->string()) : json(nullptr)},
        {"workers", workers},
        {"figures", figures},
        {"guards",
         {{"max_L_evolve", guards.max_L_evolve},
          {"max_L_diag", guards.max_L_diag},
          {"allow_large", guards.allow_large}}},
    };
}

inline void RunConfig::validate() const
{
    params.validate();
    try {
        krylov.validate();
    } catch (const UsageError& e) {
        throw ConfigError(std::string("krylov: ") + e.what());
    }
    std::set<std::string> names;
    for (const auto& s : states) {
        if (!detail::valid_state_name(s.name)) throw ConfigError("state name '" + s.name + "' is not a safe file name");
        if (!names.insert(s.name).second) throw ConfigError("duplicate state '" + s.name + "'");
    }
    std::set<int> seen;
    for (int L : sizes) {
        if (L < 4) throw ConfigError("system sizes must be at least 4");
        if (!guards.allow_large && L > guards.max_L_evolve)
            throw ConfigError("L = " + std::to_string(L) + " exceeds the evolution guard " +
                              std::to_string(guards.max_L_evolve) + " (set guards.allow_large to override)");
        if (!seen.insert(L).second) throw ConfigError("duplicate size " + std::to_string(L));
        for (const auto& o : observables_for(L)) {
            try {
                o.validate(L);
            } catch (const UsageError& e) {
                throw ConfigError(e.what());
            }
        }
    }
    if (thermal.enabled) {
        if (thermal.L < 4) throw ConfigError("thermal.L must be at least 4");
        if (!guards.allow_large && thermal.L > guards.max_L_diag)
            throw ConfigError("thermal.L = " + std::to_string(thermal.L) + " exceeds the diagonalization guard " +
                              std::to_string(guards.max_L_diag) + " (set guards.allow_large to override)");
        if (thermal.l_max < 1 || thermal.l_max >= thermal.L) throw ConfigError("thermal.l_max must be in [1, L)");
        if (!(thermal.beta_max > thermal.beta_min) || !(thermal.beta_step > 0))
            throw ConfigError("thermal beta grid is empty");
    }
    if (!(analysis.fraction > 0 && analysis.fraction <= 1)) throw ConfigError("analysis.fraction must be in (0, 1]");
    if (!(analysis.relax.confidence > 0 && analysis.relax.confidence < 1))
        throw ConfigError("analysis.confidence must be in (0, 1)");
    for (const auto& [k, w] : analysis.windows)
        if (!(w.second > w.first)) throw ConfigError("window '" + k + "' is empty");
    const auto& H = analysis.heisenberg;
    if (H.enabled) {
        for (const auto& s : H.states) catalog_lookup(s);
        if (H.L < 4 || H.L > H.options.max_L) throw ConfigError("analysis.heisenberg.L out of range");
        if (!(H.options.dt > 0) || !(H.options.t_final > H.options.dt)) throw ConfigError("bad Heisenberg time grid");
    }
    if (workers < 1) throw ConfigError("workers must be at least 1");
}

// ---------------------------------------------------------------------------

// Append-only record of runs and task outcomes, stored as manifest.json.
class RunManifest {
  public:
    static constexpr int kFormat = 1;

    RunManifest() { j_ = json{{"format", kFormat}, {"runs", json::array()}, {"tasks", json::array()}}; }

    static RunManifest load(const std::filesystem::path& path)
    {
        RunManifest m;
        if (!std::filesystem::exists(path)) return m;
        try {
            auto j = json::parse(io::read_file(path));
            if (j.value("format", 0) == kFormat && j["runs"].is_array() && j["tasks"].is_array()) m.j_ = std::move(j);
        } catch (const std::exception&) {
            // unreadable manifest: start a fresh history
        }
        return m;
    }

    const json& data() const noexcept { return j_; }
    std::size_t run_count() const { return j_["runs"].size(); }

    std::size_t begin_run(const RunConfig& cfg)
    {
        j_["runs"].push_back(json{{"started", detail::iso_now()},
                                  {"config_sha1", cfg.sha1()},
                                  {"config", cfg.to_json()},
                                  {"skipped", json::array()}});
        return j_["runs"].size() - 1;
    }

    void mark_skipped(std::size_t run, const std::string& id) { j_["runs"][run]["skipped"].push_back(id); }

    void end_run(std::size_t run, bool ok)
    {
        j_["runs"][run]["finished"] = detail::iso_now();
        j_["runs"][run]["ok"] = ok;
    }

    void record(json task) { j_["tasks"].push_back(std::move(task)); }

    // Latest record for a task id.
    const json* latest(const std::string& id) const
    {
        const auto& t = j_["tasks"];
        for (auto it = t.rbegin(); it != t.rend(); ++it)
            if ((*it)["id"] == id) return &*it;
        return nullptr;
    }

    // Done with this input hash, and every output still on disk unchanged.
    bool completed(const std::string& id, const std::string& input_sha1, const std::filesystem::path& root) const
    {
        const json* r = latest(id);
        if (!r || (*r)["status"] != "done" || (*r)["input_sha1"] != input_sha1) return false;
        for (const auto& [rel, sha] : (*r)["outputs"].items()) {
            const auto p = root / rel;
            if (!std::filesystem::exists(p) || io::sha1_hex(io::read_file(p)) != sha.get<std::string>()) return false;
        }
        return true;
    }

    void save(const std::filesystem::path& path) const { io::write_file_atomic(path, j_.dump(2) + "\n"); }

  private:
    json j_;
};

} // namespace thermalab
