#pragma once

// Measurements on translation-invariant sector states: averaged Pauli strings,
// bond-energy correlators C_r, reduced density matrices of contiguous clusters,
// von Neumann entropies, mutual information, Page baselines and fidelity.

#include "thermalab/operators.hpp"
#include "thermalab/sector_vector.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace thermalab {

enum class ObservableKind { pauli, correlator, entropy, mutual_information, fidelity };

// Identifiers: "sx", "sz", "sxsx01", "szsz01" (one s<op> per site followed by
// one offset digit per site; a lone single-site string may omit the offset),
// "C<r>", "S<l>", "I_<l>_<r>", "fid".
struct ObservableSpec {
    ObservableKind kind = ObservableKind::pauli;
    std::string id;
    std::string ops;
    std::vector<int> offsets;
    int r = 0;
    int l = 0;

    static ObservableSpec pauli(std::string ops, std::vector<int> offsets)
    {
        if (ops.empty() || ops.size() != offsets.size()) throw UsageError("pauli observable needs one offset per operator");
        ObservableSpec s;
        s.kind = ObservableKind::pauli;
        for (char c : ops) s.id += std::string("s") + c;
        if (!(ops.size() == 1 && offsets[0] == 0))
            for (int o : offsets) {
                if (o < 0 || o > 9) throw UsageError("pauli offsets must be single digits");
                s.id += static_cast<char>('0' + o);
            }
        s.ops = std::move(ops);
        s.offsets = std::move(offsets);
        return s;
    }

    static ObservableSpec correlator(int r)
    {
        if (r < 0) throw UsageError("correlator distance must be non-negative");
        ObservableSpec s;
        s.kind = ObservableKind::correlator;
        s.r = r;
        s.id = "C" + std::to_string(r);
        return s;
    }

    static ObservableSpec entropy(int l)
    {
        if (l < 1) throw UsageError("cluster size must be at least 1");
        ObservableSpec s;
        s.kind = ObservableKind::entropy;
        s.l = l;
        s.id = "S" + std::to_string(l);
        return s;
    }

    static ObservableSpec mutual_information(int l, int r)
    {
        if (l < 1 || r < 1) throw UsageError("cluster sizes must be at least 1");
        ObservableSpec s;
        s.kind = ObservableKind::mutual_information;
        s.l = l;
        s.r = r;
        s.id = "I_" + std::to_string(l) + "_" + std::to_string(r);
        return s;
    }

    static ObservableSpec fidelity()
    {
        ObservableSpec s;
        s.kind = ObservableKind::fidelity;
        s.id = "fid";
        return s;
    }

    static ObservableSpec parse(std::string_view id)
    {
        try {
            return parse_unchecked(id);
        } catch (const UsageError& e) {
            throw ConfigError("invalid observable identifier '" + std::string(id) + "': " + e.what());
        }
    }

    static ObservableSpec parse_unchecked(std::string_view id)
    {
        auto bad = [&] { return ConfigError("unknown observable identifier '" + std::string(id) + "'"); };
        auto to_int = [&](std::string_view t) {
            int v = 0;
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (ec != std::errc{} || p != t.data() + t.size() || t.empty()) throw bad();
            return v;
        };
        if (id == "fid") return fidelity();
        if (id.size() >= 2 && id[0] == 'C') return correlator(to_int(id.substr(1)));
        if (id.size() >= 2 && id[0] == 'S') return entropy(to_int(id.substr(1)));
        if (id.size() >= 5 && id.substr(0, 2) == "I_") {
            const auto rest = id.substr(2);
            const auto us = rest.find('_');
            if (us == std::string_view::npos) throw bad();
            return mutual_information(to_int(rest.substr(0, us)), to_int(rest.substr(us + 1)));
        }
        std::string ops;
        std::size_t pos = 0;
        while (pos + 1 < id.size() && id[pos] == 's' && std::string_view("xyz").find(id[pos + 1]) != std::string_view::npos) {
            ops += id[pos + 1];
            pos += 2;
        }
        if (ops.empty()) throw bad();
        const auto digits = id.substr(pos);
        std::vector<int> offsets;
        if (digits.empty() && ops.size() == 1) {
            offsets = {0};
        } else {
            if (digits.size() != ops.size()) throw bad();
            for (char c : digits) {
                if (c < '0' || c > '9') throw bad();
                offsets.push_back(c - '0');
            }
        }
        for (std::size_t a = 0; a < offsets.size(); ++a)
            for (std::size_t b = a + 1; b < offsets.size(); ++b)
                if (offsets[a] == offsets[b]) throw bad();
        auto s = pauli(ops, offsets);
        if (s.id != id) throw bad();
        return s;
    }

    bool is_linear() const noexcept { return kind == ObservableKind::pauli || kind == ObservableKind::correlator; }

    // Cluster length whose density matrix the measurement needs.
    int cluster_size() const noexcept
    {
        if (kind == ObservableKind::entropy) return l;
        if (kind == ObservableKind::mutual_information) return l + r;
        return 0;
    }

    void validate(int L) const
    {
        switch (kind) {
        case ObservableKind::pauli:
            for (int o : offsets)
                if (o >= L) throw UsageError("observable " + id + " does not fit on a ring of " + std::to_string(L));
            break;
        case ObservableKind::correlator:
            if (2 * r > L) throw UsageError("correlator distance " + std::to_string(r) + " exceeds L/2");
            break;
        case ObservableKind::entropy:
        case ObservableKind::mutual_information:
            if (cluster_size() >= L) throw UsageError("cluster of " + std::to_string(cluster_size()) + " sites needs L > " +
                                                      std::to_string(cluster_size()));
            break;
        case ObservableKind::fidelity: break;
        }
    }

    // Local operator whose translation average is measured (linear kinds only).
    PauliSum local_operator(const HamiltonianParams& p, int L) const
    {
        validate(L);
        if (kind == ObservableKind::pauli) {
            auto op = PauliSum::product(ops, offsets, L);
            if (!op.is_hermitian()) throw UsageError("observable " + id + " is not Hermitian");
            return op;
        }
        if (kind == ObservableKind::correlator) return bond_energy_product(p, r, L);
        throw UsageError("observable " + id + " is not a linear operator");
    }

    friend bool operator==(const ObservableSpec& a, const ObservableSpec& b) { return a.id == b.id; }
};

inline std::vector<ObservableSpec> parse_observables(const std::vector<std::string>& ids)
{
    std::vector<ObservableSpec> out;
    for (const auto& s : ids) {
        auto spec = ObservableSpec::parse(s);
        for (const auto& o : out)
            if (o.id == spec.id) throw ConfigError("duplicate observable identifier '" + s + "'");
        out.push_back(std::move(spec));
    }
    return out;
}

// sx, sz, sxsx01, szsz01, C0..C{L/2}, S1..S3, I_1_1, fid
inline std::vector<ObservableSpec> default_observables(int L)
{
    std::vector<ObservableSpec> out{ObservableSpec::pauli("x", {0}), ObservableSpec::pauli("z", {0}),
                                    ObservableSpec::pauli("xx", {0, 1}), ObservableSpec::pauli("zz", {0, 1})};
    for (int r = 0; 2 * r <= L; ++r) out.push_back(ObservableSpec::correlator(r));
    for (int l = 1; l <= 3 && l < L; ++l) out.push_back(ObservableSpec::entropy(l));
    if (L > 2) out.push_back(ObservableSpec::mutual_information(1, 1));
    out.push_back(ObservableSpec::fidelity());
    return out;
}

// Multiplicity of distance r on the ring: +-r coincide for r = 0 and r = L/2.
inline int correlator_weight(int r, int L) noexcept { return (r == 0 || 2 * r == L) ? 1 : 2; }

// ---------------------------------------------------------------------------
// Reduced density matrices. Cluster site q is bit q of the row index.

struct ReducedDensityMatrix {
    int l = 0;
    MatrixXc matrix;

    double trace() const { return matrix.trace().real(); }
    double hermiticity_error() const { return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff(); }
    double min_eigenvalue() const
    {
        Eigen::SelfAdjointEigenSolver<MatrixXc> es(matrix, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
};

// Keeps sites [first, first + count) of an n-site density matrix.
inline MatrixXc reduce_rdm(const MatrixXc& rho, int n, int first, int count)
{
    if (first < 0 || count < 0 || first + count > n) throw UsageError("reduce_rdm: site range outside cluster");
    const auto dim = Eigen::Index{1} << n;
    if (rho.rows() != dim || rho.cols() != dim) throw UsageError("reduce_rdm: matrix size does not match cluster");
    const State keep = low_mask(count) << first;
    MatrixXc out = MatrixXc::Zero(Eigen::Index{1} << count, Eigen::Index{1} << count);
    for (Eigen::Index a = 0; a < dim; ++a)
        for (Eigen::Index b = 0; b < dim; ++b) {
            const auto sa = static_cast<State>(a), sb = static_cast<State>(b);
            if ((sa & ~keep) != (sb & ~keep)) continue;
            out(static_cast<Eigen::Index>((sa & keep) >> first), static_cast<Eigen::Index>((sb & keep) >> first)) +=
                rho(a, b);
        }
    return out;
}

// rho_l of sites 0..l-1 from a full 2^L amplitude vector.
inline MatrixXc partial_trace_full(const VectorXc& full, int L, int l)
{
    const Eigen::Index m = Eigen::Index{1} << l;
    const Eigen::Index rest = Eigen::Index{1} << (L - l);
    if (full.size() != m * rest) throw UsageError("partial trace: vector length is not 2^L");
    Eigen::Map<const MatrixXc> M(full.data(), m, rest);
    MatrixXc rho = M * M.adjoint();
    return rho;
}

// rho_l = 2^{-l} sum_P <avg P> P over all Pauli strings on sites 0..l-1.
// Strings equal up to a ring translation share one averaged operator.
class PauliTomography {
  public:
    PauliTomography() = default;

    PauliTomography(const SymmetryBasis& basis, int l) : l_(l)
    {
        const int L = basis.L();
        if (l < 1 || l >= L) throw UsageError("tomography cluster must satisfy 1 <= l < L");
        std::map<PauliString, std::size_t> seen;
        const State n = State{1} << l;
        for (State x = 0; x < n; ++x)
            for (State z = 0; z < n; ++z) {
                const PauliString p{x, z};
                PauliString key = p;
                for (int j = 1; j < L; ++j) key = std::min(key, p.shifted(j, L));
                auto [it, fresh] = seen.try_emplace(key, ops_.size());
                if (fresh) {
                    PauliSum local;
                    local.add(key, 1.0);
                    ops_.emplace_back(basis, AveragedOperator(local, L));
                }
                strings_.push_back({p, it->second});
            }
    }

    int l() const noexcept { return l_; }
    std::size_t distinct_operators() const noexcept { return ops_.size(); }

    MatrixXc rdm(const VectorXc& psi) const
    {
        std::vector<double> t(ops_.size());
        for (std::size_t i = 0; i < ops_.size(); ++i) t[i] = ops_[i].expectation(psi);
        const Eigen::Index m = Eigen::Index{1} << l_;
        MatrixXc rho = MatrixXc::Zero(m, m);
        for (const auto& [p, idx] : strings_)
            for (Eigen::Index b = 0; b < m; ++b) {
                const auto s = static_cast<State>(b);
                rho(static_cast<Eigen::Index>(s ^ p.x), b) += t[idx] * p.phase_on(s);
            }
        rho /= static_cast<double>(m);
        return (0.5 * (rho + rho.adjoint())).eval();
    }

  private:
    struct Entry {
        PauliString p;
        std::size_t op;
    };
    int l_ = 0;
    std::vector<SectorOperator> ops_;
    std::vector<Entry> strings_;
};

struct RdmOptions {
    int tomography_max_l = 3;
    int expansion_max_L = 26;  // 2^26 complex amplitudes = 1 GiB
};

inline ReducedDensityMatrix rdm_by_tomography(const SectorVector& v, int l)
{
    return {l, PauliTomography(v.basis(), l).rdm(v.amplitudes())};
}

inline ReducedDensityMatrix rdm_by_partial_trace(const SectorVector& v, int l, const RdmOptions& opt = {})
{
    const int L = v.basis().L();
    if (l < 1 || l >= L) throw UsageError("cluster must satisfy 1 <= l < L");
    if (L > opt.expansion_max_L)
        throw ResourceError("full-space expansion at L = " + std::to_string(L) + " exceeds the guard L <= " +
                            std::to_string(opt.expansion_max_L));
    return {l, partial_trace_full(expand_to_full(v), L, l)};
}

inline ReducedDensityMatrix reduced_density_matrix(const SectorVector& v, int l, const RdmOptions& opt = {})
{
    if (l <= opt.tomography_max_l && l < v.basis().L()) return rdm_by_tomography(v, l);
    return rdm_by_partial_trace(v, l, opt);
}

// Von Neumann entropy in bits with eigenvalues clipped at zero.
inline double entropy_bits(const MatrixXc& rho)
{
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(rho, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (double p : es.eigenvalues())
        if (p > 0.0) s -= p * std::log2(p);
    return s;
}

inline double entanglement_entropy(const ReducedDensityMatrix& rho) { return entropy_bits(rho.matrix); }

// S_A + S_B - S_AB for A = sites 0..l-1, B = l..l+r-1, from rho_{l+r}.
inline double mutual_information_from_rdm(const MatrixXc& rho_ab, int l, int r)
{
    const double sa = entropy_bits(reduce_rdm(rho_ab, l + r, 0, l));
    const double sb = entropy_bits(reduce_rdm(rho_ab, l + r, l, r));
    return sa + sb - entropy_bits(rho_ab);
}

inline double mutual_information(const SectorVector& v, int l, int r, const RdmOptions& opt = {})
{
    if (l < 1 || r < 1) throw UsageError("cluster sizes must be at least 1");
    return mutual_information_from_rdm(reduced_density_matrix(v, l + r, opt).matrix, l, r);
}

// ---------------------------------------------------------------------------
// Page baselines for Haar-random pure states on 2^L amplitudes, in bits.
// Exact: S = sum_{k=n+1}^{mn} 1/k - (m-1)/(2n) nats with m = 2^l <= n = 2^{L-l}.

inline double page_entropy(int l, int L)
{
    if (l < 0 || l > L) throw UsageError("page entropy needs 0 <= l <= L");
    const int small = std::min(l, L - l);
    const double m = std::ldexp(1.0, small);
    const double n = std::ldexp(1.0, L - small);
    using boost::math::digamma;
    const double nats = digamma(m * n + 1.0) - digamma(n + 1.0) - (m - 1.0) / (2.0 * n);
    return nats / std::numbers::ln2;
}

inline double page_entropy_asymptotic(int l, int L) { return l - std::ldexp(1.0, 2 * l - L) / (2.0 * std::numbers::ln2); }

inline double page_mutual_information(int l, int L) { return 2.0 * page_entropy(l, L) - page_entropy(2 * l, L); }

inline double page_mutual_information_asymptotic(int l, int L)
{
    return std::ldexp(1.0, 4 * l - L) / (2.0 * std::numbers::ln2);
}

inline double fidelity(const SectorVector& initial, const SectorVector& current)
{
    return std::norm(initial.dot(current));
}

// ---------------------------------------------------------------------------

struct MeasureContext {
    double epsilon = 0.0;                  // conserved <H>/L of the trajectory
    const SectorVector* initial = nullptr;  // for fidelity
};

// Precomputed measurement plan for one basis and a list of observables.
class Measurer {
  public:
    Measurer(BasisPtr basis, const HamiltonianParams& params, std::vector<ObservableSpec> specs, RdmOptions opt = {})
        : basis_(std::move(basis)), specs_(std::move(specs)), opt_(opt)
    {
        const int L = basis_->L();
        linear_.resize(specs_.size());
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto& s = specs_[i];
            s.validate(L);
            if (s.is_linear()) linear_[i] = SectorOperator(*basis_, AveragedOperator(s.local_operator(params, L), L));
            cluster_ = std::max(cluster_, s.cluster_size());
        }
        if (cluster_ > 0 && cluster_ <= opt_.tomography_max_l) tomography_ = PauliTomography(*basis_, cluster_);
    }

    const std::vector<ObservableSpec>& specs() const noexcept { return specs_; }
    const BasisPtr& basis_ptr() const noexcept { return basis_; }

    std::vector<double> measure(const SectorVector& v, const MeasureContext& ctx) const
    {
        v.require_basis(*basis_);
        std::vector<double> out(specs_.size());
        MatrixXc rho;
        if (cluster_ > 0) rho = cluster_rdm(v);
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto& s = specs_[i];
            switch (s.kind) {
            case ObservableKind::pauli: out[i] = linear_[i].expectation(v.amplitudes()); break;
            case ObservableKind::correlator:
                out[i] = linear_[i].expectation(v.amplitudes()) - ctx.epsilon * ctx.epsilon;
                break;
            case ObservableKind::entropy: out[i] = entropy_bits(reduce_rdm(rho, cluster_, 0, s.l)); break;
            case ObservableKind::mutual_information:
                out[i] = mutual_information_from_rdm(reduce_rdm(rho, cluster_, 0, s.l + s.r), s.l, s.r);
                break;
            case ObservableKind::fidelity:
                if (!ctx.initial) throw UsageError("fidelity needs the initial state");
                out[i] = fidelity(*ctx.initial, v);
                break;
            }
        }
        return out;
    }

  private:
    MatrixXc cluster_rdm(const SectorVector& v) const
    {
        if (cluster_ <= opt_.tomography_max_l) return tomography_.rdm(v.amplitudes());
        return rdm_by_partial_trace(v, cluster_, opt_).matrix;
    }

    BasisPtr basis_;
    std::vector<ObservableSpec> specs_;
    RdmOptions opt_;
    std::vector<SectorOperator> linear_;
    int cluster_ = 0;
    PauliTomography tomography_;
};

inline double measure(const ObservableSpec& spec, const SectorVector& v, const HamiltonianParams& params,
                      const MeasureContext& ctx)
{
    return Measurer(v.basis_ptr(), params, {spec}).measure(v, ctx).front();
}

} // namespace thermalab
