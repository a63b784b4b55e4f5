#pragma once

// Mixed-field Ising ring and translation-averaged local operators.
//
//   H = sum_j H_j,
//   H_j = Z_j Z_{j+1} + (h_x/2)(X_j + X_{j+1}) + (h_z/2)(Z_j + Z_{j+1}).
//
// Local operators are only ever applied in their translation-averaged form
//   avg(O) = L^{-1} sum_j T^j O T^{-j},
// which commutes with every ring symmetry and therefore acts inside a sector.
// For a translation-invariant state <avg(O)> equals <O>.

#include "thermalab/basis.hpp"
#include "thermalab/sector_vector.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace thermalab {

struct HamiltonianParams {
    double h_x = -1.05;
    double h_z = 0.5;

    static HamiltonianParams benchmark() noexcept { return {-1.05, 0.5}; }

    void validate() const
    {
        if (!std::isfinite(h_x) || !std::isfinite(h_z)) throw ConfigError("fields must be finite");
    }

    friend bool operator==(const HamiltonianParams&, const HamiltonianParams&) = default;
};

// Bond energy H_j on the ring.
inline PauliSum bond_energy(const HamiltonianParams& p, int j, int L)
{
    PauliSum h = PauliSum::product("zz", {j, j + 1}, L);
    h += PauliSum::single('x', j, L, p.h_x / 2) + PauliSum::single('x', j + 1, L, p.h_x / 2);
    h += PauliSum::single('z', j, L, p.h_z / 2) + PauliSum::single('z', j + 1, L, p.h_z / 2);
    return h.prune();
}

// Hermitian part of H_0 H_r; for |r| > 1 the two bonds commute and this is H_0 H_r.
inline PauliSum bond_energy_product(const HamiltonianParams& p, int r, int L)
{
    const PauliSum a = bond_energy(p, 0, L);
    const PauliSum b = bond_energy(p, r, L);
    PauliSum s = a * b + b * a;
    s *= 0.5;
    return s.prune();
}

// Precomputed action of avg(O): all L translated copies of every term, with
// the 1/L weight and the i^{#y} factor folded into the coefficient.
class AveragedOperator {
  public:
    struct Term {
        State x;
        State z;
        Complex coeff;
    };

    AveragedOperator(const PauliSum& local, int L, double scale = 1.0) : L_(L)
    {
        if (!local.is_hermitian()) throw UsageError("averaged operator must be Hermitian");
        const State mask = low_mask(L);
        if ((local.support() & ~mask) != 0) throw UsageError("operator support exceeds ring length");
        PauliSum total;
        for (int j = 0; j < L; ++j) total += local.shifted(j, L);
        total *= scale / static_cast<double>(L);
        total.prune(1e-15);
        set_terms(total);
    }

    int L() const noexcept { return L_; }
    const std::vector<Term>& terms() const noexcept { return terms_; }
    bool reflection_symmetric() const noexcept { return reflection_symmetric_; }

    // (O + R O R) / 2. Inside a reflection sector it has the same expectation
    // values as O and, unlike O, commutes with R.
    AveragedOperator reflection_averaged() const
    {
        if (reflection_symmetric_) return *this;
        PauliSum total;
        for (const auto& t : terms_) {
            const Complex c = t.coeff / i_power(std::popcount(t.x & t.z));
            total.add({t.x, t.z}, 0.5 * c);
            total.add({reflect_sites(t.x, L_), reflect_sites(t.z, L_)}, 0.5 * c);
        }
        total.prune(1e-15);
        AveragedOperator out = *this;
        out.set_terms(total);
        return out;
    }

    // O|b> as a list of (bitstring, amplitude); duplicates are merged by callers.
    template <class Fn>
    void for_each_image(State b, Fn&& emit) const
    {
        for (const auto& t : terms_) {
            const bool minus = std::popcount(t.z & ~b) & 1;
            emit(b ^ t.x, minus ? -t.coeff : t.coeff);
        }
    }

  private:
    void set_terms(const PauliSum& total)
    {
        terms_.clear();
        for (const auto& [p, c] : total.terms()) {
            const Complex ph = i_power(std::popcount(p.x & p.z));
            terms_.push_back({p.x, p.z, c * ph});
        }
        std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
            return a.x != b.x ? a.x < b.x : a.z < b.z;
        });
        std::map<std::pair<State, State>, Complex> mirrored;
        for (const auto& t : terms_) mirrored[{reflect_sites(t.x, L_), reflect_sites(t.z, L_)}] += t.coeff;
        reflection_symmetric_ = mirrored.size() == terms_.size();
        for (const auto& t : terms_) {
            auto it = mirrored.find({t.x, t.z});
            if (it == mirrored.end() || std::abs(it->second - t.coeff) > 1e-13) reflection_symmetric_ = false;
        }
    }

    int L_;
    std::vector<Term> terms_;
    bool reflection_symmetric_ = false;
};

// Column r of the sector matrix: O|r~> = sum_b a_b chi(g_b) (n_s / n_r) |s~>.
// Requires `op` to commute with the sector's group; see sector_compatible().
template <class Fn>
void for_each_sector_element(const SymmetryBasis& basis, const AveragedOperator& op, std::size_t r, Fn&& emit)
{
    const State rep = basis.representative(r);
    const double nr = basis.norm(r);
    op.for_each_image(rep, [&](State b, Complex a) {
        const OrbitLookup hit = basis.lookup(b);
        if (!hit.found()) return;
        const auto s = static_cast<std::size_t>(hit.index);
        emit(s, a * hit.character * (basis.norm(s) / nr));
    });
}

inline AveragedOperator sector_compatible(const SymmetryBasis& basis, const AveragedOperator& op)
{
    return basis.has_reflection() ? op.reflection_averaged() : op;
}

// Matrix-free y = avg(O) x.
inline VectorXc apply_averaged(const SymmetryBasis& basis, const AveragedOperator& op_in, const VectorXc& x)
{
    const AveragedOperator op = sector_compatible(basis, op_in);
    if (op.L() != basis.L()) throw UsageError("operator and basis ring sizes differ");
    if (static_cast<std::size_t>(x.size()) != basis.dim()) throw UsageError("vector length does not match basis");
    VectorXc y = VectorXc::Zero(x.size());
    for (std::size_t r = 0; r < basis.dim(); ++r) {
        const Complex xr = x[static_cast<Eigen::Index>(r)];
        if (xr == Complex{}) continue;
        for_each_sector_element(basis, op, r, [&](std::size_t s, Complex v) {
            y[static_cast<Eigen::Index>(s)] += v * xr;
        });
    }
    return y;
}

// Compressed-row Hermitian sector operator assembled from the matrix-free
// kernel. Row r is the conjugate of enumerated column r, so rows can be
// processed independently.
class SectorOperator {
  public:
    SectorOperator() = default;

    SectorOperator(const SymmetryBasis& basis, const AveragedOperator& op_in) : dim_(basis.dim())
    {
        const AveragedOperator op = sector_compatible(basis, op_in);
        if (op.L() != basis.L()) throw UsageError("operator and basis ring sizes differ");
        row_ptr_.reserve(dim_ + 1);
        row_ptr_.push_back(0);
        std::vector<std::pair<std::size_t, Complex>> col;
        for (std::size_t r = 0; r < dim_; ++r) {
            col.clear();
            for_each_sector_element(basis, op, r, [&](std::size_t s, Complex v) { col.emplace_back(s, v); });
            std::sort(col.begin(), col.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            for (std::size_t n = 0; n < col.size();) {
                std::size_t m = n;
                Complex acc{};
                while (m < col.size() && col[m].first == col[n].first) acc += col[m++].second;
                if (std::abs(acc) > 1e-15) {
                    cols_.push_back(static_cast<std::uint32_t>(col[n].first));
                    vals_.push_back(std::conj(acc));
                }
                n = m;
            }
            row_ptr_.push_back(cols_.size());
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t nonzeros() const noexcept { return vals_.size(); }

    void apply(const VectorXc& x, VectorXc& y) const
    {
        y.resize(static_cast<Eigen::Index>(dim_));
        const auto n = static_cast<std::int64_t>(dim_);
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < n; ++r) {
            Complex acc{};
            for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) acc += vals_[e] * x[cols_[e]];
            y[r] = acc;
        }
    }

    VectorXc operator*(const VectorXc& x) const
    {
        VectorXc y;
        apply(x, y);
        return y;
    }

    // <x|O|x>, real for Hermitian O.
    double expectation(const VectorXc& x) const
    {
        double acc = 0.0;
        const auto n = static_cast<std::int64_t>(dim_);
#pragma omp parallel for reduction(+ : acc) schedule(static)
        for (std::int64_t r = 0; r < n; ++r) {
            Complex row{};
            for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) row += vals_[e] * x[cols_[e]];
            acc += (std::conj(x[r]) * row).real();
        }
        return acc;
    }

    MatrixXc to_dense() const
    {
        MatrixXc m = MatrixXc::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
        for (std::size_t r = 0; r < dim_; ++r)
            for (std::size_t e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e)
                m(static_cast<Eigen::Index>(r), cols_[e]) += vals_[e];
        return m;
    }

  private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> cols_;
    std::vector<Complex> vals_;
};

// H = L avg(H_0).
inline AveragedOperator hamiltonian_operator(const HamiltonianParams& p, int L)
{
    p.validate();
    return AveragedOperator(bond_energy(p, 0, L), L, static_cast<double>(L));
}

inline SectorOperator build_sector_hamiltonian(const SymmetryBasis& basis, const HamiltonianParams& p)
{
    return SectorOperator(basis, hamiltonian_operator(p, basis.L()));
}

inline SectorVector apply_hamiltonian(const SymmetryBasis& basis, const HamiltonianParams& p, const SectorVector& v)
{
    v.require_basis(basis);
    return SectorVector(v.basis_ptr(), apply_averaged(basis, hamiltonian_operator(p, basis.L()), v.amplitudes()));
}

inline SectorVector apply_translation_averaged_operator(const SymmetryBasis& basis, const PauliSum& local,
                                                        const SectorVector& v)
{
    v.require_basis(basis);
    return SectorVector(v.basis_ptr(), apply_averaged(basis, AveragedOperator(local, basis.L()), v.amplitudes()));
}

// Largest sector dimension admitted for dense storage (16 bytes per entry).
inline constexpr std::size_t kDefaultDenseGuard = 12000;

inline MatrixXc build_dense_hamiltonian(const SymmetryBasis& basis, const HamiltonianParams& p,
                                        std::size_t guard = kDefaultDenseGuard)
{
    if (basis.dim() > guard)
        throw ResourceError("sector dimension " + std::to_string(basis.dim()) + " exceeds dense guard " +
                            std::to_string(guard));
    return build_sector_hamiltonian(basis, p).to_dense();
}

} // namespace thermalab
