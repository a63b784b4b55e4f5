#pragma once

// Symmetry-adapted bases of the spin-1/2 ring.
//
// A sector is a 1D irrep of the ring's symmetry group G: translations T^j
// (character e^{2 pi i k j / L}) optionally extended by the reflection R
// (character +-1, only for k = 0 or k = L/2). Sector states are
//     |s~> = P|s> / n_s,   P = |G|^{-1} sum_g chi(g)^* g,   n_s = ||P|s>||,
// where the representative s is the smallest integer in its orbit. For a
// bitstring b = g s the overlap is <b|s~> = chi(g)^* n_s.

#include "thermalab/errors.hpp"
#include "thermalab/io.hpp"
#include "thermalab/pauli.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace thermalab {

struct RingGeometry {
    int L = 0;

    void validate() const
    {
        if (L < 2) throw ConfigError("ring needs at least 2 sites");
        if (L > 40) throw ResourceError("ring size " + std::to_string(L) + " exceeds the 2^L addressing bound");
    }

    State hilbert_dim() const noexcept { return State{1} << L; }

    friend bool operator==(const RingGeometry&, const RingGeometry&) = default;
};

enum class Reflection : std::int8_t { none = 0, even = 1, odd = -1 };

inline std::string to_string(Reflection r)
{
    switch (r) {
    case Reflection::even: return "+";
    case Reflection::odd: return "-";
    default: return "none";
    }
}

struct SectorSpec {
    int k = 0;
    Reflection reflection = Reflection::none;

    friend bool operator==(const SectorSpec&, const SectorSpec&) = default;

    bool real_characters(int L) const noexcept { return k == 0 || 2 * k == L; }

    void validate(const RingGeometry& g) const
    {
        if (k < 0 || k >= g.L)
            throw ConfigError("momentum index " + std::to_string(k) + " outside [0, L)");
        if (reflection != Reflection::none && !real_characters(g.L))
            throw ConfigError("reflection sector requires k = 0 or k = L/2 (got k = " + std::to_string(k) + ")");
    }
};

inline std::string sector_label(const RingGeometry& g, const SectorSpec& s)
{
    return "L" + std::to_string(g.L) + "_k" + std::to_string(s.k) + "_R" +
           (s.reflection == Reflection::even ? "p" : s.reflection == Reflection::odd ? "m" : "n");
}

// Element T^shift R^reflect of the ring's symmetry group.
struct GroupElement {
    int shift = 0;
    bool reflect = false;

    State act(State b, int L) const noexcept
    {
        return rotate_sites(reflect ? reflect_sites(b, L) : b, shift, L);
    }
};

// Where a bitstring lives inside a sector basis: b = g s with s = rep(index),
// `character` = chi(g).
struct OrbitLookup {
    std::int64_t index = -1;
    Complex character{};

    bool found() const noexcept { return index >= 0; }
};

class SymmetryBasis {
  public:
    static constexpr std::uint32_t kFormatVersion = 1;

    SymmetryBasis(RingGeometry geometry, SectorSpec sector)
        : geometry_(geometry), sector_(sector)
    {
        geometry_.validate();
        sector_.validate(geometry_);
        build_group();
        enumerate();
    }

    const RingGeometry& geometry() const noexcept { return geometry_; }
    const SectorSpec& sector() const noexcept { return sector_; }
    int L() const noexcept { return geometry_.L; }
    std::size_t dim() const noexcept { return reps_.size(); }

    const std::vector<State>& representatives() const noexcept { return reps_; }
    const std::vector<double>& norms() const noexcept { return norms_; }
    const std::vector<GroupElement>& group() const noexcept { return group_; }

    State representative(std::size_t i) const { return reps_.at(i); }
    double norm(std::size_t i) const { return norms_.at(i); }

    Complex character(const GroupElement& g) const noexcept
    {
        const double angle = 2.0 * std::numbers::pi * sector_.k * g.shift / geometry_.L;
        Complex chi = std::polar(1.0, angle);
        if (g.reflect && sector_.reflection == Reflection::odd) chi = -chi;
        return chi;
    }

    // Smallest orbit member of b and the element g with g b = min.
    std::pair<State, GroupElement> canonicalize(State b) const noexcept
    {
        State best = b;
        GroupElement arg{};
        const int L = geometry_.L;
        for (int j = 1; j < L; ++j) {
            const State c = rotate_sites(b, j, L);
            if (c < best) { best = c; arg = {j, false}; }
        }
        if (has_reflection()) {
            const State rb = reflect_sites(b, L);
            for (int j = 0; j < L; ++j) {
                const State c = rotate_sites(rb, j, L);
                if (c < best) { best = c; arg = {j, true}; }
            }
        }
        return {best, arg};
    }

    OrbitLookup lookup(State b) const noexcept
    {
        auto [rep, g] = canonicalize(b);
        auto it = std::lower_bound(reps_.begin(), reps_.end(), rep);
        if (it == reps_.end() || *it != rep) return {};
        // g b = s, so b = g^{-1} s and chi(g^{-1}) = conj(chi(g)).
        return {static_cast<std::int64_t>(it - reps_.begin()), std::conj(character(g))};
    }

    bool has_reflection() const noexcept { return sector_.reflection != Reflection::none; }

    bool same_as(const SymmetryBasis& other) const noexcept
    {
        return this == &other || (geometry_ == other.geometry_ && sector_ == other.sector_);
    }

    std::string label() const { return sector_label(geometry_, sector_); }

    // Binary layout (all little endian):
    //   "THLB" | u32 version | u16 L | u16 k | i8 reflection | u64 dim |
    //   dim x u64 representative | dim x f64 norm
    std::string serialize() const
    {
        io::BinaryWriter w;
        w.put_bytes("THLB");
        w.put<std::uint32_t>(kFormatVersion);
        w.put<std::uint16_t>(static_cast<std::uint16_t>(geometry_.L));
        w.put<std::uint16_t>(static_cast<std::uint16_t>(sector_.k));
        w.put<std::int8_t>(static_cast<std::int8_t>(sector_.reflection));
        w.put<std::uint64_t>(reps_.size());
        for (State s : reps_) w.put<std::uint64_t>(s);
        for (double n : norms_) w.put<double>(n);
        return w.bytes();
    }

    static SymmetryBasis deserialize(const std::string& bytes)
    {
        io::BinaryReader r(bytes);
        if (r.get_bytes(4) != "THLB") throw Error("not a basis cache (bad magic)");
        if (r.get<std::uint32_t>() != kFormatVersion) throw Error("unsupported basis cache version");
        RingGeometry g{r.get<std::uint16_t>()};
        SectorSpec sec;
        sec.k = r.get<std::uint16_t>();
        sec.reflection = static_cast<Reflection>(r.get<std::int8_t>());
        const auto dim = r.get<std::uint64_t>();
        std::vector<State> reps(dim);
        std::vector<double> norms(dim);
        for (auto& s : reps) s = r.get<std::uint64_t>();
        for (auto& n : norms) n = r.get<double>();
        SymmetryBasis b(g, sec, std::move(reps), std::move(norms));
        return b;
    }

    // Header of the binary layout alone (checkpoints embed it).
    std::string header_bytes() const
    {
        io::BinaryWriter w;
        w.put_bytes("THLB");
        w.put<std::uint32_t>(kFormatVersion);
        w.put<std::uint16_t>(static_cast<std::uint16_t>(geometry_.L));
        w.put<std::uint16_t>(static_cast<std::uint16_t>(sector_.k));
        w.put<std::int8_t>(static_cast<std::int8_t>(sector_.reflection));
        return w.bytes();
    }

  private:
    SymmetryBasis(RingGeometry g, SectorSpec s, std::vector<State> reps, std::vector<double> norms)
        : geometry_(g), sector_(s), reps_(std::move(reps)), norms_(std::move(norms))
    {
        geometry_.validate();
        sector_.validate(geometry_);
        build_group();
        if (reps_.size() != norms_.size()) throw Error("corrupt basis cache");
    }

    void build_group()
    {
        group_.clear();
        for (int j = 0; j < geometry_.L; ++j) group_.push_back({j, false});
        if (has_reflection())
            for (int j = 0; j < geometry_.L; ++j) group_.push_back({j, true});
    }

    // n_s^2 = |G|^{-1} sum_{g s = s} chi(g)^*
    double norm_of(State s) const noexcept
    {
        Complex acc{};
        for (const auto& g : group_)
            if (g.act(s, geometry_.L) == s) acc += std::conj(character(g));
        const double n2 = acc.real() / static_cast<double>(group_.size());
        return n2 > 1e-10 ? std::sqrt(n2) : 0.0;
    }

    void enumerate()
    {
        const int L = geometry_.L;
        const State total = geometry_.hilbert_dim();
        for (State b = 0; b < total; ++b) {
            bool is_min = true;
            for (int j = 1; j < L && is_min; ++j)
                if (rotate_sites(b, j, L) < b) is_min = false;
            if (is_min && has_reflection()) {
                const State rb = reflect_sites(b, L);
                for (int j = 0; j < L && is_min; ++j)
                    if (rotate_sites(rb, j, L) < b) is_min = false;
            }
            if (!is_min) continue;
            const double n = norm_of(b);
            if (n > 0.0) {
                reps_.push_back(b);
                norms_.push_back(n);
            }
        }
    }

    RingGeometry geometry_;
    SectorSpec sector_;
    std::vector<GroupElement> group_;
    std::vector<State> reps_;
    std::vector<double> norms_;
};

using BasisPtr = std::shared_ptr<const SymmetryBasis>;

inline BasisPtr build_sector_basis(RingGeometry geometry, SectorSpec sector)
{
    return std::make_shared<const SymmetryBasis>(geometry, sector);
}

// Loads a cached basis when present and valid, otherwise builds and stores it.
inline BasisPtr load_or_build_basis(RingGeometry geometry, SectorSpec sector,
                                    const std::optional<std::filesystem::path>& cache_dir)
{
    if (!cache_dir) return build_sector_basis(geometry, sector);
    const auto path = *cache_dir / ("basis_" + sector_label(geometry, sector) + ".thlb");
    if (std::filesystem::exists(path)) {
        try {
            auto b = SymmetryBasis::deserialize(io::read_file(path));
            if (b.geometry() == geometry && b.sector() == sector)
                return std::make_shared<const SymmetryBasis>(std::move(b));
        } catch (const Error&) {
            // fall through and rebuild a corrupt cache
        }
    }
    auto b = build_sector_basis(geometry, sector);
    io::write_file_atomic(path, b->serialize());
    return b;
}

// All momentum sectors of a ring without reflection split.
inline std::vector<SectorSpec> momentum_sectors(int L)
{
    std::vector<SectorSpec> out;
    for (int k = 0; k < L; ++k) out.push_back({k, Reflection::none});
    return out;
}

} // namespace thermalab
