#pragma once

// Canonical ensemble from full diagonalization of every momentum sector.
//
// Sectors k and L-k are complex conjugates of each other (H is real), so only
// k = 0..L/2 are diagonalized; mirrored eigenstates reuse the same energies,
// flip the sign of Pauli strings with an odd number of Y factors and carry the
// complex-conjugate reduced density matrix.
//
// Correlator rows hold the raw <H_0 H_r>_nn; thermal C_r subtracts eps(beta)^2.

#include "thermalab/dense_eigen.hpp"
#include "thermalab/io.hpp"
#include "thermalab/observables.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace thermalab {

struct ThermalOptions {
    int l_max = 3;
    std::size_t dense_guard = kDefaultDenseGuard;
    std::optional<std::filesystem::path> cache_dir;
    std::function<void(const std::string&)> log;
};

class SpectrumTable;
inline SpectrumTable full_diagonalize(const RingGeometry& geometry, const HamiltonianParams& params,
                                      const std::vector<ObservableSpec>& registered, const ThermalOptions& opt = {});

class SpectrumTable {
  public:
    static constexpr std::uint32_t kFormatVersion = 1;
    static constexpr int kConvention = 1;

    SpectrumTable() = default;

    const RingGeometry& geometry() const noexcept { return geometry_; }
    const HamiltonianParams& params() const noexcept { return params_; }
    int L() const noexcept { return geometry_.L; }
    int l_max() const noexcept { return l_max_; }
    std::size_t size() const noexcept { return energy_.size(); }

    const std::vector<double>& energies() const noexcept { return energy_; }
    const std::vector<int>& sector_of() const noexcept { return sector_; }
    const std::vector<std::string>& observable_ids() const noexcept { return ids_; }

    std::optional<std::size_t> observable_index(const std::string& id) const
    {
        for (std::size_t i = 0; i < ids_.size(); ++i)
            if (ids_[i] == id) return i;
        return std::nullopt;
    }

    std::size_t require_observable(const std::string& id) const
    {
        auto i = observable_index(id);
        if (!i) throw UsageError("observable '" + id + "' is not registered in the spectrum table");
        return *i;
    }

    double diag(std::size_t n, std::size_t obs) const { return diag_[n * ids_.size() + obs]; }

    // 2^l_max x 2^l_max density matrix of eigenstate n on sites 0..l_max-1.
    Eigen::Map<const MatrixXc> rdm(std::size_t n) const
    {
        const auto m = Eigen::Index{1} << l_max_;
        return Eigen::Map<const MatrixXc>(rdm_.data() + n * static_cast<std::size_t>(m * m), m, m);
    }

    // Per-sector eigenvalue ranges [begin, end) in storage order.
    const std::vector<std::pair<std::size_t, std::size_t>>& sector_ranges() const noexcept { return ranges_; }

    static std::string descriptor(const RingGeometry& g, const HamiltonianParams& p, int l_max,
                                  const std::vector<std::string>& ids)
    {
        std::ostringstream os;
        os << "L=" << g.L << ";hx=" << std::hexfloat << p.h_x << ";hz=" << p.h_z << std::defaultfloat
           << ";lmax=" << l_max << ";convention=" << kConvention << ";obs=";
        for (const auto& id : ids) os << id << ',';
        return os.str();
    }

    std::string descriptor() const { return descriptor(geometry_, params_, l_max_, ids_); }

    // "THSP" | u32 version | u32 descriptor length | descriptor | u64 states |
    // u32 sectors | sectors x (u64 begin, u64 end) | states x (i32 k, f64 E) |
    // states x observables f64 | states x 4^l_max x (f64 re, f64 im)
    std::string serialize() const
    {
        io::BinaryWriter w;
        w.put_bytes("THSP");
        w.put<std::uint32_t>(kFormatVersion);
        const auto d = descriptor();
        w.put<std::uint32_t>(static_cast<std::uint32_t>(d.size()));
        w.put_bytes(d);
        w.put<std::uint64_t>(energy_.size());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(ranges_.size()));
        for (const auto& [a, b] : ranges_) {
            w.put<std::uint64_t>(a);
            w.put<std::uint64_t>(b);
        }
        for (std::size_t n = 0; n < energy_.size(); ++n) {
            w.put<std::int32_t>(sector_[n]);
            w.put<double>(energy_[n]);
        }
        for (double x : diag_) w.put<double>(x);
        for (const auto& c : rdm_) {
            w.put<double>(c.real());
            w.put<double>(c.imag());
        }
        return w.bytes();
    }

    static std::optional<SpectrumTable> deserialize(const std::string& bytes, const std::string& expected_descriptor,
                                                    const RingGeometry& g, const HamiltonianParams& p, int l_max,
                                                    const std::vector<std::string>& ids)
    {
        io::BinaryReader r(bytes);
        if (r.get_bytes(4) != "THSP" || r.get<std::uint32_t>() != kFormatVersion) return std::nullopt;
        const auto dlen = r.get<std::uint32_t>();
        if (r.get_bytes(dlen) != expected_descriptor) return std::nullopt;
        SpectrumTable t;
        t.geometry_ = g;
        t.params_ = p;
        t.l_max_ = l_max;
        t.ids_ = ids;
        const auto n = r.get<std::uint64_t>();
        if (n != g.hilbert_dim()) return std::nullopt;
        const auto ns = r.get<std::uint32_t>();
        for (std::uint32_t s = 0; s < ns; ++s) {
            const auto a = r.get<std::uint64_t>();
            t.ranges_.emplace_back(a, r.get<std::uint64_t>());
        }
        t.sector_.resize(n);
        t.energy_.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            t.sector_[i] = r.get<std::int32_t>();
            t.energy_[i] = r.get<double>();
        }
        t.diag_.resize(n * ids.size());
        for (auto& x : t.diag_) x = r.get<double>();
        const std::size_t m2 = std::size_t{1} << (2 * l_max);
        t.rdm_.resize(n * m2);
        for (auto& c : t.rdm_) {
            const double re = r.get<double>();
            c = Complex(re, r.get<double>());
        }
        if (!r.at_end()) return std::nullopt;
        t.finish();
        return t;
    }

  private:
    friend SpectrumTable full_diagonalize(const RingGeometry&, const HamiltonianParams&,
                                          const std::vector<ObservableSpec>&, const ThermalOptions&);

    void finish()
    {
        e_min_ = *std::min_element(energy_.begin(), energy_.end());
        e_max_ = *std::max_element(energy_.begin(), energy_.end());
    }

  public:
    double e_min() const noexcept { return e_min_; }
    double e_max() const noexcept { return e_max_; }

  private:
    RingGeometry geometry_;
    HamiltonianParams params_;
    int l_max_ = 0;
    std::vector<std::string> ids_;
    std::vector<std::pair<std::size_t, std::size_t>> ranges_;
    std::vector<int> sector_;
    std::vector<double> energy_;
    std::vector<double> diag_;
    std::vector<Complex> rdm_;
    double e_min_ = 0.0;
    double e_max_ = 0.0;
};

// Observables always present in a spectrum table.
inline std::vector<ObservableSpec> default_thermal_observables(int L)
{
    std::vector<ObservableSpec> out{ObservableSpec::pauli("x", {0}), ObservableSpec::pauli("y", {0}),
                                    ObservableSpec::pauli("z", {0}), ObservableSpec::pauli("xx", {0, 1}),
                                    ObservableSpec::pauli("zz", {0, 1})};
    for (int r = 0; 2 * r <= L; ++r) out.push_back(ObservableSpec::correlator(r));
    return out;
}

namespace detail {

inline std::vector<ObservableSpec> merge_registered(int L, const std::vector<ObservableSpec>& extra)
{
    auto out = default_thermal_observables(L);
    for (const auto& s : extra) {
        if (!s.is_linear()) continue;
        s.validate(L);
        bool dup = false;
        for (const auto& o : out) dup = dup || o.id == s.id;
        if (!dup) out.push_back(s);
    }
    return out;
}

// <psi| P |psi> for a local Pauli sum on full-space amplitudes.
inline double full_expectation(const PauliSum& op, const VectorXc& psi)
{
    Complex acc{};
    for (const auto& [p, c] : op.terms()) {
        Complex t{};
        for (Eigen::Index b = 0; b < psi.size(); ++b) {
            const auto s = static_cast<State>(b);
            t += std::conj(psi[static_cast<Eigen::Index>(s ^ p.x)]) * p.phase_on(s) * psi[b];
        }
        acc += c * t;
    }
    return acc.real();
}

inline int odd_y(const PauliSum& op)
{
    // +1 if every term has an even number of Y factors, -1 if every term is odd.
    int sign = 0;
    for (const auto& [p, c] : op.terms()) {
        const int s = (std::popcount(p.x & p.z) & 1) ? -1 : 1;
        if (sign == 0) sign = s;
        if (sign != s) return 0;
    }
    return sign == 0 ? 1 : sign;
}

} // namespace detail

inline std::filesystem::path spectrum_cache_path(const std::filesystem::path& dir, const std::string& descriptor, int L)
{
    return dir / ("spectrum_L" + std::to_string(L) + "_" + io::sha1_hex(descriptor).substr(0, 12) + ".thsp");
}

inline SpectrumTable full_diagonalize(const RingGeometry& geometry, const HamiltonianParams& params,
                                      const std::vector<ObservableSpec>& registered, const ThermalOptions& opt)
{
    geometry.validate();
    params.validate();
    const int L = geometry.L;
    if (opt.l_max < 1 || opt.l_max >= L) throw UsageError("l_max must satisfy 1 <= l_max < L");
    const auto specs = detail::merge_registered(L, registered);
    std::vector<std::string> ids;
    for (const auto& s : specs) ids.push_back(s.id);
    const auto desc = SpectrumTable::descriptor(geometry, params, opt.l_max, ids);

    std::optional<std::filesystem::path> cache;
    if (opt.cache_dir) {
        cache = spectrum_cache_path(*opt.cache_dir, desc, L);
        if (std::filesystem::exists(*cache)) {
            try {
                if (auto t = SpectrumTable::deserialize(io::read_file(*cache), desc, geometry, params, opt.l_max, ids)) {
                    if (opt.log) opt.log("loaded spectrum cache " + cache->string());
                    return std::move(*t);
                }
            } catch (const Error&) {
            }
        }
    }

    // Per-observable evaluation on full-space eigenvectors.
    struct Eval {
        enum { pauli, correlator } kind;
        PauliSum op;
        int r = 0;
        int mirror_sign = 1;
    };
    std::vector<Eval> evals;
    for (const auto& s : specs) {
        if (s.kind == ObservableKind::correlator) {
            evals.push_back({Eval::correlator, {}, s.r, 1});
        } else {
            auto op = s.local_operator(params, L);
            const int sign = detail::odd_y(op);
            if (sign == 0) throw UsageError("observable " + s.id + " mixes real and imaginary Pauli terms");
            evals.push_back({Eval::pauli, std::move(op), 0, sign});
        }
    }
    std::vector<PauliSum> bonds;
    for (int r = 0; 2 * r <= L; ++r) bonds.push_back(bond_energy(params, r, L));

    const std::size_t nobs = specs.size();
    const auto m = Eigen::Index{1} << opt.l_max;
    const auto m2 = static_cast<std::size_t>(m * m);
    const auto N = static_cast<std::size_t>(geometry.hilbert_dim());

    SpectrumTable t;
    t.geometry_ = geometry;
    t.params_ = params;
    t.l_max_ = opt.l_max;
    t.ids_ = ids;
    t.sector_.reserve(N);
    t.energy_.reserve(N);
    t.diag_.reserve(N * nobs);
    t.rdm_.reserve(N * m2);

    for (int k = 0; 2 * k <= L; ++k) {
        const auto basis = build_sector_basis(geometry, {k, Reflection::none});
        const std::size_t dim = basis->dim();
        if (dim > opt.dense_guard)
            throw ResourceError("sector k=" + std::to_string(k) + " dimension " + std::to_string(dim) +
                                " exceeds dense guard " + std::to_string(opt.dense_guard));
        if (opt.log) opt.log("diagonalizing L=" + std::to_string(L) + " k=" + std::to_string(k) + " dim=" + std::to_string(dim));
        const MatrixXc Hs = build_sector_hamiltonian(*basis, params).to_dense();
        const auto es = basis->sector().real_characters(L) ? symmetric_eigensystem(Hs.real()) : hermitian_eigensystem(Hs);
        const Eigen::VectorXd& evals_k = es.values;
        const MatrixXc& evecs = es.vectors;

        const FullExpander expander(*basis);
        std::vector<double> diag(dim * nobs);
        std::vector<Complex> rdms(dim * m2);
        const auto nd = static_cast<std::int64_t>(dim);
#pragma omp parallel
        {
            VectorXc full, tmp;
            std::vector<VectorXc> phi(bonds.size());
#pragma omp for schedule(dynamic, 4)
            for (std::int64_t n = 0; n < nd; ++n) {
                expander.expand(evecs.col(n), full);
                const MatrixXc rho = partial_trace_full(full, L, opt.l_max);
                std::copy(rho.data(), rho.data() + m2, rdms.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * m2));
                bool have_phi = false;
                for (std::size_t o = 0; o < nobs; ++o) {
                    const auto& e = evals[o];
                    double val = 0.0;
                    if (e.kind == Eval::pauli) {
                        val = detail::full_expectation(e.op, full);
                    } else {
                        if (!have_phi) {
                            for (std::size_t r = 0; r < bonds.size(); ++r) {
                                phi[r].setZero(full.size());
                                bonds[r].apply_full(full, phi[r], static_cast<std::size_t>(full.size()));
                            }
                            have_phi = true;
                        }
                        val = phi[0].dot(phi[static_cast<std::size_t>(e.r)]).real();
                    }
                    diag[static_cast<std::size_t>(n) * nobs + o] = val;
                }
            }
        }

        auto append = [&](int sector_k, bool mirror) {
            const std::size_t begin = t.energy_.size();
            for (std::size_t n = 0; n < dim; ++n) {
                t.sector_.push_back(sector_k);
                t.energy_.push_back(evals_k[static_cast<Eigen::Index>(n)]);
                for (std::size_t o = 0; o < nobs; ++o)
                    t.diag_.push_back(mirror ? evals[o].mirror_sign * diag[n * nobs + o] : diag[n * nobs + o]);
                for (std::size_t q = 0; q < m2; ++q) t.rdm_.push_back(mirror ? std::conj(rdms[n * m2 + q]) : rdms[n * m2 + q]);
            }
            t.ranges_.emplace_back(begin, t.energy_.size());
        };
        append(k, false);
        if (k != 0 && 2 * k != L) append(L - k, true);
    }
    t.finish();
    if (cache) io::write_file_atomic(*cache, t.serialize());
    return t;
}

// ---------------------------------------------------------------------------

struct ThermalPoint {
    double beta = 0.0;
    double epsilon = 0.0;
    double v_tilde = 0.0;
    double s_tilde = 0.0;       // bits
    double log_z_per_site = 0.0;
};

// Normalized Gibbs weights exp(-beta E_n) / Z with a max shift.
inline std::vector<double> gibbs_weights(const std::vector<double>& energies, double beta, double* log_z = nullptr)
{
    if (energies.empty()) throw UsageError("empty spectrum");
    const auto [lo, hi] = std::minmax_element(energies.begin(), energies.end());
    const double shift = beta >= 0 ? *lo : *hi;
    std::vector<double> w(energies.size());
    double z = 0.0;
    for (std::size_t n = 0; n < energies.size(); ++n) z += (w[n] = std::exp(-beta * (energies[n] - shift)));
    for (auto& x : w) x /= z;
    if (log_z) *log_z = std::log(z) - beta * shift;
    return w;
}

inline ThermalPoint thermal_point(const std::vector<double>& energies, int L, double beta)
{
    double log_z = 0.0;
    const auto w = gibbs_weights(energies, beta, &log_z);
    double e1 = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) e1 += w[n] * energies[n];
    double c2 = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) c2 += w[n] * (energies[n] - e1) * (energies[n] - e1);
    ThermalPoint p;
    p.beta = beta;
    p.epsilon = e1 / L;
    p.v_tilde = c2 / L;
    p.log_z_per_site = log_z / L;
    p.s_tilde = (log_z + beta * e1) / std::numbers::ln2;
    return p;
}

class ThermalCurve {
  public:
    ThermalCurve(const SpectrumTable& table, double beta_min = -3.0, double beta_max = 3.0, double step = 1e-3)
        : energies_(table.energies()), L_(table.L())
    {
        if (!(beta_max > beta_min) || !(step > 0)) throw UsageError("invalid beta grid");
        const auto n = static_cast<std::size_t>(std::llround((beta_max - beta_min) / step));
        grid_.reserve(n + 1);
        for (std::size_t i = 0; i <= n; ++i) grid_.push_back(thermal_point(energies_, L_, beta_min + step * static_cast<double>(i)));
    }

    int L() const noexcept { return L_; }
    const std::vector<ThermalPoint>& grid() const noexcept { return grid_; }
    ThermalPoint at(double beta) const { return thermal_point(energies_, L_, beta); }
    const std::vector<double>& energies() const noexcept { return energies_; }

    double epsilon_min() const { return *std::min_element(energies_.begin(), energies_.end()) / L_; }
    double epsilon_max() const { return *std::max_element(energies_.begin(), energies_.end()) / L_; }

    std::string csv() const
    {
        std::string out = "beta,epsilon,v_tilde,S_tilde,log_Z_per_site\n";
        for (const auto& p : grid_)
            out += io::format_double(p.beta) + "," + io::format_double(p.epsilon) + "," + io::format_double(p.v_tilde) +
                   "," + io::format_double(p.s_tilde) + "," + io::format_double(p.log_z_per_site) + "\n";
        return out;
    }

  private:
    std::vector<double> energies_;
    int L_;
    std::vector<ThermalPoint> grid_;
};

// beta with eps(beta) = target: grid bracket, then Newton with bisection fallback.
inline double solve_beta(double eps_target, const ThermalCurve& curve)
{
    const double lo_e = curve.epsilon_min(), hi_e = curve.epsilon_max();
    if (!(eps_target > lo_e && eps_target < hi_e))
        throw DomainError("energy density " + io::format_double(eps_target) + " outside the spectrum interior (" +
                          io::format_double(lo_e) + ", " + io::format_double(hi_e) + ")");
    // eps decreases with beta.
    double b_lo = -std::numeric_limits<double>::infinity(), b_hi = std::numeric_limits<double>::infinity();
    double beta = 0.0;
    const auto& g = curve.grid();
    if (!g.empty()) {
        if (eps_target > g.front().epsilon) {
            b_hi = g.front().beta;
            beta = b_hi - 1.0;
        } else if (eps_target < g.back().epsilon) {
            b_lo = g.back().beta;
            beta = b_lo + 1.0;
        } else {
            std::size_t i = 0;
            while (i + 1 < g.size() && g[i + 1].epsilon > eps_target) ++i;
            b_lo = g[i].beta;
            b_hi = g[std::min(i + 1, g.size() - 1)].beta;
            const double e0 = g[i].epsilon, e1 = g[std::min(i + 1, g.size() - 1)].epsilon;
            beta = e0 == e1 ? b_lo : b_lo + (b_hi - b_lo) * (e0 - eps_target) / (e0 - e1);
        }
    }
    for (int it = 0; it < 200; ++it) {
        const auto p = curve.at(beta);
        const double f = p.epsilon - eps_target;
        if (std::abs(f) < 1e-13) return beta;
        if (f > 0) b_lo = std::max(b_lo, beta);
        else b_hi = std::min(b_hi, beta);
        double next = beta + f / p.v_tilde;  // d eps / d beta = -v~
        if (!(next > b_lo && next < b_hi) || !std::isfinite(next)) {
            if (std::isfinite(b_lo) && std::isfinite(b_hi)) next = 0.5 * (b_lo + b_hi);
            else next = std::isfinite(b_lo) ? b_lo + 2 * std::max(1.0, std::abs(b_lo)) : b_hi - 2 * std::max(1.0, std::abs(b_hi));
        }
        if (std::isfinite(b_lo) && std::isfinite(b_hi) && b_hi - b_lo < 1e-15 * std::max(1.0, std::abs(beta))) return beta;
        beta = next;
    }
    throw NumericalError("solve_beta did not converge for eps = " + io::format_double(eps_target));
}

inline double thermal_entropy(double beta, const ThermalCurve& curve) { return curve.at(beta).s_tilde; }

// Gibbs average of the raw diagonal row (for correlators: <H_0 H_r>).
inline double thermal_raw_expectation(std::size_t obs, double beta, const SpectrumTable& table)
{
    const auto w = gibbs_weights(table.energies(), beta);
    double acc = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) acc += w[n] * table.diag(n, obs);
    return acc;
}

inline double thermal_expectation(const ObservableSpec& spec, double beta, const SpectrumTable& table)
{
    if (!spec.is_linear()) throw UsageError("thermal expectation of " + spec.id + " needs thermal_rdm");
    const auto obs = table.require_observable(spec.id);
    const double raw = thermal_raw_expectation(obs, beta, table);
    if (spec.kind == ObservableKind::correlator) {
        const double eps = thermal_point(table.energies(), table.L(), beta).epsilon;
        return raw - eps * eps;
    }
    return raw;
}

struct ThermalRdm {
    ReducedDensityMatrix rho;
    double entropy = 0.0;  // bits
};

inline MatrixXc thermal_cluster_rdm(double beta, const SpectrumTable& table)
{
    const auto w = gibbs_weights(table.energies(), beta);
    const auto m = Eigen::Index{1} << table.l_max();
    MatrixXc rho = MatrixXc::Zero(m, m);
    for (std::size_t n = 0; n < w.size(); ++n) rho += w[n] * table.rdm(n);
    return (0.5 * (rho + rho.adjoint())).eval();
}

inline ThermalRdm thermal_rdm(double beta, int l, const SpectrumTable& table)
{
    if (l < 1 || l > table.l_max())
        throw UsageError("cluster size " + std::to_string(l) + " beyond cached l_max = " + std::to_string(table.l_max()));
    ReducedDensityMatrix r{l, reduce_rdm(thermal_cluster_rdm(beta, table), table.l_max(), 0, l)};
    const double s = entanglement_entropy(r);
    return {std::move(r), s};
}

inline double thermal_mutual_information(double beta, int l, int r, const SpectrumTable& table)
{
    if (l < 1 || r < 1 || l + r > table.l_max())
        throw UsageError("I_{l,r} needs l + r <= cached l_max = " + std::to_string(table.l_max()));
    const MatrixXc rho = reduce_rdm(thermal_cluster_rdm(beta, table), table.l_max(), 0, l + r);
    return mutual_information_from_rdm(rho, l, r);
}

// Thermal moments with h = H / L: <h^k O> for k = 0, 1, 2 and <h^k> for k <= 3.
struct ThermalMoments {
    double epsilon = 0, h2 = 0, h3 = 0;
    double o = 0, ho = 0, h2o = 0;
    double v_tilde = 0;
};

inline ThermalMoments thermal_moments(std::size_t obs, double beta, const SpectrumTable& table)
{
    const auto w = gibbs_weights(table.energies(), beta);
    const double L = table.L();
    ThermalMoments m;
    for (std::size_t n = 0; n < w.size(); ++n) {
        const double h = table.energies()[n] / L;
        const double o = table.diag(n, obs);
        m.epsilon += w[n] * h;
        m.h2 += w[n] * h * h;
        m.h3 += w[n] * h * h * h;
        m.o += w[n] * o;
        m.ho += w[n] * h * o;
        m.h2o += w[n] * h * h * o;
    }
    double c2 = 0;
    for (std::size_t n = 0; n < w.size(); ++n) {
        const double d = table.energies()[n] / L - m.epsilon;
        c2 += w[n] * d * d;
    }
    m.v_tilde = L * c2;
    return m;
}

// d^2 O~ / d eps^2 at inverse temperature beta, written with central moments:
//   (L/v)^3 <dh^3> (-<dh O>) + (L/v)^2 <dh^2 O> - (L/v) <O>,  dh = h - eps,
// which equals the raw-moment expression term by term after expansion.
// Correlators use the raw <H_0 H_r>: the shift eps^2 in C_r is the state's
// fixed energy, not a function of the thermal eps.
inline double second_derivative_from_rows(const std::vector<double>& energies, const std::vector<double>& rows, int L,
                                          double beta)
{
    if (rows.size() != energies.size()) throw UsageError("observable row count differs from the spectrum");
    const auto w = gibbs_weights(energies, beta);
    double eps = 0.0, o = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n) {
        eps += w[n] * energies[n] / L;
        o += w[n] * rows[n];
    }
    double c2 = 0, c3 = 0, cov1 = 0, cov2 = 0;
    for (std::size_t n = 0; n < w.size(); ++n) {
        const double d = energies[n] / L - eps;
        c2 += w[n] * d * d;
        c3 += w[n] * d * d * d;
        cov1 += w[n] * d * rows[n];
        cov2 += w[n] * d * d * rows[n];
    }
    const double v = L * c2;
    if (!(v > 1e-12)) throw DomainError("thermal variance vanishes at beta = " + io::format_double(beta));
    const double q = L / v;
    return -q * q * q * c3 * cov1 + q * q * cov2 - q * o;
}

inline std::vector<double> observable_rows(const SpectrumTable& table, std::size_t obs)
{
    std::vector<double> rows(table.size());
    for (std::size_t n = 0; n < rows.size(); ++n) rows[n] = table.diag(n, obs);
    return rows;
}

inline double thermal_second_derivative_at(const ObservableSpec& spec, double beta, const SpectrumTable& table)
{
    if (!spec.is_linear()) throw UsageError("second derivative needs a linear observable");
    return second_derivative_from_rows(table.energies(), observable_rows(table, table.require_observable(spec.id)),
                                       table.L(), beta);
}

inline double thermal_second_derivative(const ObservableSpec& spec, double epsilon, const SpectrumTable& table,
                                        const ThermalCurve& curve)
{
    return thermal_second_derivative_at(spec, solve_beta(epsilon, curve), table);
}

// Centered second difference of O~(eps) along the curve (raw rows for correlators).
inline double thermal_second_derivative_fd(const ObservableSpec& spec, double epsilon, double h,
                                           const SpectrumTable& table, const ThermalCurve& curve)
{
    const auto obs = table.require_observable(spec.id);
    auto f = [&](double e) { return thermal_raw_expectation(obs, solve_beta(e, curve), table); };
    return (f(epsilon + h) - 2.0 * f(epsilon) + f(epsilon - h)) / (h * h);
}

} // namespace thermalab
