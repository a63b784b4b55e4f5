#pragma once

#include "thermalab/basis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace thermalab {

using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

// Amplitudes of a state over one sector basis.
class SectorVector {
  public:
    SectorVector() = default;

    explicit SectorVector(BasisPtr basis)
        : basis_(std::move(basis)), amps_(VectorXc::Zero(static_cast<Eigen::Index>(basis_->dim())))
    {
    }

    SectorVector(BasisPtr basis, VectorXc amps) : basis_(std::move(basis)), amps_(std::move(amps))
    {
        if (static_cast<std::size_t>(amps_.size()) != basis_->dim())
            throw UsageError("sector vector length does not match basis dimension");
    }

    const SymmetryBasis& basis() const { return *basis_; }
    const BasisPtr& basis_ptr() const noexcept { return basis_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(amps_.size()); }

    const VectorXc& amplitudes() const noexcept { return amps_; }
    VectorXc& amplitudes() noexcept { return amps_; }

    double norm() const { return amps_.norm(); }

    SectorVector& normalize()
    {
        const double n = norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("cannot normalize a zero or non-finite vector");
        amps_ /= n;
        return *this;
    }

    Complex dot(const SectorVector& other) const
    {
        require_same_basis(other);
        return amps_.dot(other.amps_);
    }

    void require_same_basis(const SectorVector& other) const
    {
        if (!basis_ || !other.basis_ || !basis_->same_as(*other.basis_))
            throw UsageError("sector vectors belong to different bases");
    }

    void require_basis(const SymmetryBasis& b) const
    {
        if (!basis_ || !basis_->same_as(b)) throw UsageError("vector does not belong to this basis");
    }

  private:
    BasisPtr basis_;
    VectorXc amps_;
};

// Orbit members of every representative with their overlaps <b|s~>, for
// repeated expansion of sector vectors onto all 2^L bitstrings.
class FullExpander {
  public:
    explicit FullExpander(const SymmetryBasis& basis) : dim_(basis.geometry().hilbert_dim())
    {
        const int L = basis.L();
        std::vector<Complex> chi;
        for (const auto& g : basis.group()) chi.push_back(std::conj(basis.character(g)));
        std::vector<std::pair<State, Complex>> orbit;
        for (std::size_t i = 0; i < basis.dim(); ++i) {
            const State s = basis.representative(i);
            const double n = basis.norm(i);
            orbit.clear();
            for (std::size_t gi = 0; gi < chi.size(); ++gi) orbit.emplace_back(basis.group()[gi].act(s, L), chi[gi] * n);
            std::stable_sort(orbit.begin(), orbit.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            for (std::size_t m = 0; m < orbit.size(); ++m) {
                if (m > 0 && orbit[m].first == orbit[m - 1].first) continue;
                entries_.push_back({orbit[m].first, static_cast<std::uint32_t>(i), orbit[m].second});
            }
        }
    }

    State full_dim() const noexcept { return dim_; }

    void expand(const VectorXc& c, VectorXc& full) const
    {
        full.setZero(static_cast<Eigen::Index>(dim_));
        for (const auto& e : entries_) full[static_cast<Eigen::Index>(e.b)] = e.coeff * c[e.rep];
    }

    VectorXc expand(const VectorXc& c) const
    {
        VectorXc full;
        expand(c, full);
        return full;
    }

  private:
    struct Entry {
        State b;
        std::uint32_t rep;
        Complex coeff;
    };
    State dim_;
    std::vector<Entry> entries_;
};

// Expands sector amplitudes onto all 2^L bitstrings.
inline VectorXc expand_to_full(const SymmetryBasis& basis, const VectorXc& c) { return FullExpander(basis).expand(c); }

inline VectorXc expand_to_full(const SectorVector& v) { return expand_to_full(v.basis(), v.amplitudes()); }

// Orthogonal projection of a full-space vector into the sector,
// returned in sector coordinates: c_s = sum_b <s~|b> psi(b).
inline VectorXc project_from_full(const SymmetryBasis& basis, const VectorXc& full)
{
    const int L = basis.L();
    VectorXc c = VectorXc::Zero(static_cast<Eigen::Index>(basis.dim()));
    const auto& group = basis.group();
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const State s = basis.representative(i);
        const double n = basis.norm(i);
        Complex acc{};
        for (const auto& g : group)
            acc += basis.character(g) * full[static_cast<Eigen::Index>(g.act(s, L))];
        // The group sum visits each orbit member |Stab| = |G| n^2 times.
        c[static_cast<Eigen::Index>(i)] = acc / (static_cast<double>(group.size()) * n);
    }
    return c;
}

} // namespace thermalab
