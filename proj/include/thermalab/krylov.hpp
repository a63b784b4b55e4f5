#pragma once

// Lanczos approximation of exp(-i H dt) v with full re-orthogonalization and
// recursive step halving, plus the sampled trajectory driver.

#include "thermalab/io.hpp"
#include "thermalab/observables.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace thermalab {

struct KrylovConfig {
    int m_max = 30;
    double step_tolerance = 1e-12;
    double dt = 0.1;
    double t_final = 100.0;
    int max_halvings = 16;
    double checkpoint_every = 10.0;

    void validate() const
    {
        if (m_max < 2) throw ConfigError("krylov m_max must be at least 2");
        if (!(step_tolerance > 0)) throw ConfigError("krylov step tolerance must be positive");
        if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("krylov dt must be positive");
        if (!(t_final >= 0) || !std::isfinite(t_final)) throw ConfigError("t_final must be non-negative");
        if (max_halvings < 0) throw ConfigError("max_halvings must be non-negative");
        const double n = t_final / dt;
        if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
            throw ConfigError("t_final must be an integer multiple of dt");
    }

    std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }
};

struct StepReport {
    double error_estimate = 0.0;  // summed over sub-steps
    int subspace_dim = 0;         // largest used
    int substeps = 0;
};

// y = H x for sector vectors.
using ApplyFn = std::function<void(const VectorXc&, VectorXc&)>;

namespace detail {

// One Krylov attempt over time tau; returns false if m_max is insufficient.
inline bool krylov_attempt(const ApplyFn& applyH, const VectorXc& v, double tau, const KrylovConfig& cfg,
                           VectorXc& out, double& err, int& used)
{
    const double nv = v.norm();
    if (nv == 0.0) {
        out = v;
        err = 0.0;
        used = 0;
        return true;
    }
    const auto n = v.size();
    const int m_cap = static_cast<int>(std::min<Eigen::Index>(cfg.m_max, n));
    MatrixXc V(n, m_cap);
    std::vector<double> alpha, beta;
    V.col(0) = v / nv;
    VectorXc w(n);

    auto small_exp = [&](int m, Eigen::VectorXcd& e1col) {
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int j = 0; j < m; ++j) {
            T(j, j) = alpha[static_cast<std::size_t>(j)];
            if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[static_cast<std::size_t>(j)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        const auto& U = es.eigenvectors();
        Eigen::VectorXcd phase(m);
        for (int k = 0; k < m; ++k) phase[k] = std::polar(U(0, k), -tau * es.eigenvalues()[k]);
        e1col = U.cast<Complex>() * phase;
    };

    Eigen::VectorXcd y;
    for (int j = 0; j < m_cap; ++j) {
        applyH(V.col(j), w);
        const double a = V.col(j).dot(w).real();
        alpha.push_back(a);
        w -= a * V.col(j);
        if (j > 0) w -= beta.back() * V.col(j - 1);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i <= j; ++i) w -= V.col(i).dot(w) * V.col(i);
        const double b = w.norm();
        const int m = j + 1;
        small_exp(m, y);
        const double scale = std::max(1.0, std::abs(a));
        if (b < 1e-14 * scale) {
            // Invariant subspace: the projection is exact.
            out = nv * (V.leftCols(m) * y);
            err = 0.0;
            used = m;
            return true;
        }
        const double estimate = nv * b * std::abs(y[m - 1]);
        if (estimate <= cfg.step_tolerance || m == n) {
            out = nv * (V.leftCols(m) * y);
            err = estimate;
            used = m;
            return true;
        }
        beta.push_back(b);
        if (j + 1 < m_cap) V.col(j + 1) = w / b;
    }
    return false;
}

inline void krylov_advance(const ApplyFn& applyH, VectorXc& v, double tau, const KrylovConfig& cfg, int depth,
                           StepReport& rep)
{
    VectorXc out;
    double err = 0.0;
    int used = 0;
    if (krylov_attempt(applyH, v, tau, cfg, out, err, used)) {
        v = std::move(out);
        rep.error_estimate += err;
        rep.subspace_dim = std::max(rep.subspace_dim, used);
        ++rep.substeps;
        return;
    }
    if (depth >= cfg.max_halvings)
        throw NumericalError("krylov step did not reach tolerance after " + std::to_string(depth) + " halvings");
    krylov_advance(applyH, v, tau / 2, cfg, depth + 1, rep);
    krylov_advance(applyH, v, tau / 2, cfg, depth + 1, rep);
}

} // namespace detail

// v <- exp(-i H dt) v.
inline StepReport lanczos_exp_step(const ApplyFn& applyH, VectorXc& v, double dt, const KrylovConfig& cfg)
{
    StepReport rep;
    if (dt == 0.0) return rep;
    detail::krylov_advance(applyH, v, dt, cfg, 0, rep);
    return rep;
}

inline std::pair<SectorVector, StepReport> lanczos_exp_step(const SectorOperator& H, const SectorVector& v, double dt,
                                                            const KrylovConfig& cfg)
{
    VectorXc w = v.amplitudes();
    const auto rep = lanczos_exp_step([&H](const VectorXc& x, VectorXc& y) { H.apply(x, y); }, w, dt, cfg);
    return {SectorVector(v.basis_ptr(), std::move(w)), rep};
}

// ---------------------------------------------------------------------------

struct TimeSeries {
    std::string state;
    int L = 0;
    std::string observable;
    std::vector<double> t;
    std::vector<double> value;

    std::size_t size() const noexcept { return t.size(); }
};

struct TrajectoryRecord {
    std::string state;
    RingGeometry geometry;
    SectorSpec sector;
    HamiltonianParams params;
    KrylovConfig cfg;
    std::vector<std::string> ids;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;  // one per time, in `ids` order
    std::vector<double> norm;               // per sample
    std::vector<double> energy;             // <H>/L per sample
    std::vector<double> energy2;            // <H^2>/L per sample
    double epsilon = 0.0;
    double variance = 0.0;
    int max_subspace = 0;
    bool complete = true;
    std::string failure;

    std::size_t column(const std::string& id) const
    {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id) return i;
        throw UsageError("trajectory has no observable '" + id + "'");
    }

    TimeSeries series(const std::string& id) const
    {
        const auto c = column(id);
        TimeSeries s{state, geometry.L, id, times, {}};
        s.value.reserve(rows.size());
        for (const auto& r : rows) s.value.push_back(r[c]);
        return s;
    }

    double max_norm_drift() const
    {
        double d = 0;
        for (double n : norm) d = std::max(d, std::abs(n - 1.0));
        return d;
    }

    double max_energy_drift() const
    {
        double d = 0;
        for (double e : energy) d = std::max(d, std::abs(e - epsilon));
        return d / std::max(1.0, std::abs(epsilon));
    }

    double max_variance_drift() const
    {
        double d = 0;
        const double L = geometry.L;
        for (std::size_t i = 0; i < energy.size(); ++i) {
            const double v = energy2[i] - L * energy[i] * energy[i];
            d = std::max(d, std::abs(v - variance));
        }
        return d / std::max(1.0, std::abs(variance));
    }

    std::string csv() const
    {
        std::string out = "t";
        for (const auto& id : ids) out += "," + id;
        out += '\n';
        for (std::size_t n = 0; n < times.size(); ++n) {
            out += io::format_double(times[n]);
            for (double x : rows[n]) out += "," + io::format_double(x);
            out += '\n';
        }
        return out;
    }
};

struct EvolveOptions {
    std::string state_name = "custom";
    std::optional<std::filesystem::path> checkpoint;  // resumable when set
    std::string checkpoint_key;                       // must match on resume
    std::function<void(double)> progress;
};

namespace detail {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "THCK" | u32 version | basis header | u32 key length | key | u64 sample |
// u64 dim | dim x (f64 re, f64 im) | u64 rows | u64 cols | rows x (t, norm,
// energy, energy2, cols values)
inline std::string encode_checkpoint(const SymmetryBasis& basis, const std::string& key, std::size_t sample,
                                     const VectorXc& psi, const TrajectoryRecord& rec)
{
    io::BinaryWriter w;
    w.put_bytes("THCK");
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put_bytes(basis.header_bytes());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(key.size()));
    w.put_bytes(key);
    w.put<std::uint64_t>(sample);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(psi.size()));
    for (const auto& a : psi) {
        w.put<double>(a.real());
        w.put<double>(a.imag());
    }
    w.put<std::uint64_t>(rec.rows.size());
    w.put<std::uint64_t>(rec.ids.size());
    for (std::size_t n = 0; n < rec.rows.size(); ++n) {
        w.put<double>(rec.times[n]);
        w.put<double>(rec.norm[n]);
        w.put<double>(rec.energy[n]);
        w.put<double>(rec.energy2[n]);
        for (double x : rec.rows[n]) w.put<double>(x);
    }
    return w.bytes();
}

inline bool decode_checkpoint(const std::string& bytes, const SymmetryBasis& basis, const std::string& key,
                              std::size_t& sample, VectorXc& psi, TrajectoryRecord& rec)
{
    io::BinaryReader r(bytes);
    if (r.get_bytes(4) != "THCK" || r.get<std::uint32_t>() != kCheckpointVersion) return false;
    if (r.get_bytes(basis.header_bytes().size()) != basis.header_bytes()) return false;
    const auto klen = r.get<std::uint32_t>();
    if (r.get_bytes(klen) != key) return false;
    sample = r.get<std::uint64_t>();
    const auto dim = r.get<std::uint64_t>();
    if (dim != basis.dim()) return false;
    psi.resize(static_cast<Eigen::Index>(dim));
    for (auto& a : psi) {
        const double re = r.get<double>();
        a = Complex(re, r.get<double>());
    }
    const auto nrows = r.get<std::uint64_t>();
    const auto ncols = r.get<std::uint64_t>();
    if (ncols != rec.ids.size() || nrows != sample + 1) return false;
    for (std::uint64_t n = 0; n < nrows; ++n) {
        rec.times.push_back(r.get<double>());
        rec.norm.push_back(r.get<double>());
        rec.energy.push_back(r.get<double>());
        rec.energy2.push_back(r.get<double>());
        std::vector<double> row(ncols);
        for (auto& x : row) x = r.get<double>();
        rec.rows.push_back(std::move(row));
    }
    return r.at_end();
}

} // namespace detail

// Samples every observable at t = n dt, n = 0..t_final/dt. The correlator
// shift epsilon is the measured <H>/L of the initial vector.
inline TrajectoryRecord evolve_and_measure(const SectorVector& initial, const HamiltonianParams& params,
                                           const std::vector<ObservableSpec>& schedule, const KrylovConfig& cfg,
                                           const EvolveOptions& opt = {})
{
    cfg.validate();
    if (schedule.empty()) throw UsageError("measurement schedule is empty");
    if (std::abs(initial.norm() - 1.0) > 1e-10) throw UsageError("initial state must be normalized");
    const auto& basis = initial.basis();
    const SectorOperator H = build_sector_hamiltonian(basis, params);
    const Measurer meas(initial.basis_ptr(), params, schedule);

    TrajectoryRecord rec;
    rec.state = opt.state_name;
    rec.geometry = basis.geometry();
    rec.sector = basis.sector();
    rec.params = params;
    rec.cfg = cfg;
    for (const auto& s : schedule) rec.ids.push_back(s.id);

    const double L = basis.L();
    VectorXc hv;
    auto energies = [&](const VectorXc& psi) {
        H.apply(psi, hv);
        return std::pair{psi.dot(hv).real() / L, hv.squaredNorm() / L};
    };
    {
        const auto [e, e2] = energies(initial.amplitudes());
        rec.epsilon = e;
        rec.variance = e2 - L * e * e;
    }
    const MeasureContext ctx{rec.epsilon, &initial};

    auto record = [&](std::size_t n, const SectorVector& v) {
        const auto [e, e2] = energies(v.amplitudes());
        rec.times.push_back(static_cast<double>(n) * cfg.dt);
        rec.norm.push_back(v.norm());
        rec.energy.push_back(e);
        rec.energy2.push_back(e2);
        rec.rows.push_back(meas.measure(v, ctx));
    };

    SectorVector psi = initial;
    std::size_t start = 0;
    bool resumed = false;
    if (opt.checkpoint && std::filesystem::exists(*opt.checkpoint)) {
        TrajectoryRecord probe = rec;
        VectorXc amps;
        std::size_t sample = 0;
        bool ok = false;
        try {
            ok = detail::decode_checkpoint(io::read_file(*opt.checkpoint), basis, opt.checkpoint_key, sample, amps, probe);
        } catch (const Error&) {
            ok = false;
        }
        if (ok && sample <= cfg.steps()) {
            rec = std::move(probe);
            psi = SectorVector(initial.basis_ptr(), std::move(amps));
            start = sample;
            resumed = true;
        }
    }
    if (!resumed) record(0, psi);

    const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.checkpoint_every / cfg.dt)));
    const ApplyFn applyH = [&H](const VectorXc& x, VectorXc& y) { H.apply(x, y); };
    for (std::size_t n = start; n < cfg.steps(); ++n) {
        try {
            const auto rep = lanczos_exp_step(applyH, psi.amplitudes(), cfg.dt, cfg);
            rec.max_subspace = std::max(rec.max_subspace, rep.subspace_dim);
        } catch (const NumericalError& e) {
            rec.complete = false;
            rec.failure = e.what();
            return rec;
        }
        record(n + 1, psi);
        if (opt.checkpoint && (n + 1) % every == 0 && n + 1 < cfg.steps())
            io::write_file_atomic(*opt.checkpoint,
                                  detail::encode_checkpoint(basis, opt.checkpoint_key, n + 1, psi.amplitudes(), rec));
        if (opt.progress) opt.progress(static_cast<double>(n + 1) * cfg.dt);
    }
    if (opt.checkpoint) std::filesystem::remove(*opt.checkpoint);
    return rec;
}

} // namespace thermalab
