#pragma once

// Pauli strings on an L-site ring.
//
// Conventions: site j <-> bit j, spin up <-> bit 1, sigma^z = +1 on bit 1.
// A canonical string is stored as (x_mask, z_mask) and stands for
//     prod_j  i^{x_j z_j} X_j^{x_j} Z_j^{z_j}
// so that a site carrying both bits is sigma^y = i X Z. Every canonical string
// is Hermitian; a PauliSum is Hermitian iff all of its coefficients are real.

#include "thermalab/errors.hpp"

#include <bit>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace thermalab {

using Complex = std::complex<double>;
using State = std::uint64_t;

inline constexpr int kMaxSites = 62;

constexpr State low_mask(int L) noexcept { return (State{1} << L) - 1; }

// T^n: site j -> site j+n (mod L).
constexpr State rotate_sites(State b, int n, int L) noexcept
{
    if (n == 0) return b;
    const State m = low_mask(L);
    return ((b << n) | (b >> (L - n))) & m;
}

// R: site j -> site L-1-j.
constexpr State reflect_sites(State b, int L) noexcept
{
    State out = 0;
    for (int j = 0; j < L; ++j)
        if ((b >> j) & 1U) out |= State{1} << (L - 1 - j);
    return out;
}

inline Complex i_power(int n) noexcept
{
    switch (((n % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
    }
}

struct PauliString {
    State x = 0;
    State z = 0;

    friend auto operator<=>(const PauliString&, const PauliString&) = default;

    int weight() const noexcept { return std::popcount(x | z); }

    // P|b> = phase * |b ^ x>
    Complex phase_on(State b) const noexcept
    {
        const int ny = std::popcount(x & z);
        const int nminus = std::popcount(z & ~b);
        Complex ph = i_power(ny);
        return (nminus & 1) ? -ph : ph;
    }

    PauliString shifted(int n, int L) const noexcept
    {
        return {rotate_sites(x, n, L), rotate_sites(z, n, L)};
    }
};

// Product of canonical strings: returns (phase, canonical string).
inline std::pair<Complex, PauliString> multiply(const PauliString& a, const PauliString& b) noexcept
{
    const PauliString c{a.x ^ b.x, a.z ^ b.z};
    const int ya = std::popcount(a.x & a.z);
    const int yb = std::popcount(b.x & b.z);
    const int yc = std::popcount(c.x & c.z);
    const int swaps = std::popcount(a.z & b.x);
    Complex ph = i_power(ya + yb - yc);
    if (swaps & 1) ph = -ph;
    return {ph, c};
}

class PauliSum {
  public:
    PauliSum() = default;

    static PauliSum identity(double c = 1.0)
    {
        PauliSum s;
        s.add({0, 0}, c);
        return s;
    }

    // Single-site operator: 'x', 'y', 'z' or 'i' on `site`.
    static PauliSum single(char op, int site, int L, double c = 1.0)
    {
        PauliSum s;
        s.add(single_string(op, site, L), c);
        return s;
    }

    // Product string, e.g. ops="xx", sites={0,1}.
    static PauliSum product(const std::string& ops, const std::vector<int>& sites, int L, double c = 1.0)
    {
        if (ops.size() != sites.size())
            throw UsageError("pauli product: operator/site count mismatch");
        PauliSum s = identity(c);
        for (std::size_t n = 0; n < ops.size(); ++n)
            s = s * single(ops[n], sites[n], L);
        return s;
    }

    void add(const PauliString& p, Complex c)
    {
        auto [it, inserted] = terms_.try_emplace(p, c);
        if (!inserted) it->second += c;
    }

    const std::map<PauliString, Complex>& terms() const noexcept { return terms_; }

    bool empty() const noexcept { return terms_.empty(); }

    // Removes numerically cancelled terms.
    PauliSum& prune(double tol = 1e-14)
    {
        std::erase_if(terms_, [tol](const auto& kv) { return std::abs(kv.second) <= tol; });
        return *this;
    }

    bool is_hermitian(double tol = 1e-13) const noexcept
    {
        for (const auto& [p, c] : terms_)
            if (std::abs(c.imag()) > tol) return false;
        return true;
    }

    State support() const noexcept
    {
        State s = 0;
        for (const auto& [p, c] : terms_) s |= p.x | p.z;
        return s;
    }

    PauliSum shifted(int n, int L) const
    {
        PauliSum out;
        for (const auto& [p, c] : terms_) out.add(p.shifted(n, L), c);
        return out;
    }

    PauliSum adjoint() const
    {
        PauliSum out;
        for (const auto& [p, c] : terms_) out.add(p, std::conj(c));
        return out;
    }

    PauliSum& operator+=(const PauliSum& o)
    {
        for (const auto& [p, c] : o.terms_) add(p, c);
        return *this;
    }

    PauliSum& operator*=(Complex c)
    {
        for (auto& [p, v] : terms_) v *= c;
        return *this;
    }

    friend PauliSum operator+(PauliSum a, const PauliSum& b) { return a += b; }
    friend PauliSum operator*(PauliSum a, Complex c) { return a *= c; }
    friend PauliSum operator*(Complex c, PauliSum a) { return a *= c; }

    friend PauliSum operator*(const PauliSum& a, const PauliSum& b)
    {
        PauliSum out;
        for (const auto& [pa, ca] : a.terms_)
            for (const auto& [pb, cb] : b.terms_) {
                auto [ph, pc] = multiply(pa, pb);
                out.add(pc, ph * ca * cb);
            }
        return out.prune();
    }

    // Dense action on a full-space amplitude array of length 2^L.
    template <class In, class Out>
    void apply_full(const In& in, Out& out, std::size_t dim) const
    {
        for (std::size_t b = 0; b < dim; ++b) out[b] = 0.0;
        for (const auto& [p, c] : terms_)
            for (std::size_t b = 0; b < dim; ++b) {
                const State s = static_cast<State>(b);
                out[s ^ p.x] += c * p.phase_on(s) * in[b];
            }
    }

  private:
    static PauliString single_string(char op, int site, int L)
    {
        if (L < 1 || L > kMaxSites) throw UsageError("pauli: ring size out of range");
        const int j = ((site % L) + L) % L;
        const State bit = State{1} << j;
        switch (op) {
        case 'x': case 'X': return {bit, 0};
        case 'y': case 'Y': return {bit, bit};
        case 'z': case 'Z': return {0, bit};
        case 'i': case 'I': return {0, 0};
        default: throw UsageError(std::string("pauli: unknown operator '") + op + "'");
        }
    }

    std::map<PauliString, Complex> terms_;
};

} // namespace thermalab
