#pragma once

// Translation-invariant Bloch product states
//     |psi> = prod_j [cos(theta/2)|up>_j + e^{i phi} sin(theta/2)|down>_j],
// their closed-form energy density, energy variance density and initial
// correlators, the named catalog of initial states, and random sector states.

#include "thermalab/operators.hpp"
#include "thermalab/sector_vector.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace thermalab {

struct BlochParams {
    double theta = 0.0;
    double phi = 0.0;

    static BlochParams from_fractions(double theta_over_pi, double phi_over_pi) noexcept
    {
        return {theta_over_pi * std::numbers::pi, phi_over_pi * std::numbers::pi};
    }
};

struct BlochDerived {
    double u_xx = 0.0;
    double u_x = 0.0;
    double u_y = 0.0;
    double epsilon = 0.0;
    double variance = 0.0;
    double c0 = 0.0;  // <C_0>
    double c1 = 0.0;  // <C_{+-1}>; <C_r> = 0 for |r| > 1
};

inline double bloch_energy_density(const BlochParams& p, const HamiltonianParams& h) noexcept
{
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    return c * c + h.h_z * c + h.h_x * std::cos(p.phi) * s;
}

inline BlochDerived bloch_variance_density(const BlochParams& p, const HamiltonianParams& h) noexcept
{
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    BlochDerived d;
    d.u_xx = s * s;
    d.u_x = -2.0 * c * s + h.h_x * std::cos(p.phi) * c - h.h_z * s;
    d.u_y = h.h_x * std::sin(p.phi);
    d.epsilon = bloch_energy_density(p, h);
    const double ux2 = d.u_x * d.u_x, uy2 = d.u_y * d.u_y;
    d.c0 = d.u_xx * d.u_xx + 0.5 * ux2 + 0.5 * uy2;
    d.c1 = 0.25 * ux2 + 0.25 * uy2;
    d.variance = d.u_xx * d.u_xx + ux2 + uy2;
    return d;
}

// Product state projected into the k=0, R=+ sector it lives in. With
// n_s = |orbit|^{-1/2} the sector amplitude is psi(s) / n_s.
inline SectorVector build_bloch_state(const BlochParams& p, BasisPtr basis, double* projected_norm = nullptr)
{
    if (basis->sector().k != 0 || basis->sector().reflection != Reflection::even)
        throw UsageError("Bloch states live in the k=0, R=+ sector");
    const int L = basis->L();
    const Complex up(std::cos(p.theta / 2), 0.0);
    const Complex down = std::polar(std::sin(p.theta / 2), p.phi);
    SectorVector v(basis);
    auto& a = v.amplitudes();
    for (std::size_t i = 0; i < basis->dim(); ++i) {
        const State s = basis->representative(i);
        const int n_up = std::popcount(s);
        const Complex amp = std::pow(up, n_up) * std::pow(down, L - n_up);
        a[static_cast<Eigen::Index>(i)] = amp / basis->norm(i);
    }
    if (projected_norm) *projected_norm = v.norm();
    v.normalize();
    return v;
}

// ---------------------------------------------------------------------------
// Catalog of named initial states.

struct CatalogEntry {
    std::string name;
    double theta_over_pi = 0.0;
    double phi_over_pi = 0.0;
    double epsilon_ref = 0.0;
    bool epsilon_inferred = false;  // filled from the series energy, not listed per row
    double v_ref = 0.0;
    std::optional<double> v_tilde_ref;
    std::optional<double> beta_ref;

    BlochParams params() const noexcept { return BlochParams::from_fractions(theta_over_pi, phi_over_pi); }
};

namespace detail {

struct RawEntry {
    const char* name;
    double theta_over_pi;
    double phi_over_pi;
    double epsilon;  // NaN -> series value
    double v;
    double v_tilde;  // NaN -> not listed
    double beta;     // NaN -> not listed
};

inline constexpr double kNone = std::numeric_limits<double>::quiet_NaN();

// Angles and reference values of the named initial states. Rows whose energy
// is only given for the series carry NaN here and get the series energy.
inline constexpr std::array<RawEntry, 64> kRawCatalog{{
    {"X_+", 0.5, 0, -1.0500, 1.2500, 0.6130, +0.7186},
    {"Z_+", 0, 0, +1.5000, 1.1025, 0.9670, -0.7275},
    {"E_-", 0.552172, 0, -1.0909, 0.9475, 0.5080, +0.7918},
    {"E_+", -0.135159, 0, +1.7184, 0.0288, 0.0201, -1.5975},
    {"Y_+", 0.5, 0.5, 0, 2.3525, 2.3525, -0.0000},
    {"y_1", 0.27, 0.071211, kNone, 4.5498, kNone, kNone},
    {"y_2", 0.335, 0.318136, kNone, 3.8344, kNone, kNone},
    {"y_3", 0.4, 0.419455, kNone, 3.1615, kNone, kNone},
    {"y_4", 0.465, 0.479579, kNone, 2.5961, kNone, kNone},
    {"y_6", 0.53, 0.511634, kNone, 2.1820, kNone, kNone},
    {"y_7", 0.595, 0.51922, kNone, 1.9373, kNone, kNone},
    {"z_1", 0.2046, 0.17081, kNone, 4.3441, kNone, kNone},
    {"z_2", 0.2846, 0.419324, kNone, 3.7471, kNone, kNone},
    {"z_3", 0.3646, 0.541178, kNone, 3.0981, kNone, kNone},
    {"z_4", 0.4446, 0.620907, +0.5000, 2.4788, 2.4795, -0.2044},
    {"z_5", 0.5246, 0.66991, kNone, 1.9540, kNone, kNone},
    {"z_6", 0.6046, 0.689459, kNone, 1.5612, kNone, kNone},
    {"z_7", 0.6846, 0.681326, kNone, 1.3068, kNone, kNone},
    {"Z_-", 1, 0, kNone, 1.1025, kNone, kNone},
    {"a_1", 0.23954, 0, kNone, 4.6537, kNone, kNone},
    {"a_2", 0.3218, 0.364508, kNone, 3.8445, kNone, kNone},
    {"a_3", 0.4018, 0.479667, kNone, 3.0785, kNone, kNone},
    {"a_4", 0.4818, 0.545186, +0.1801, 2.4397, 2.4409, -0.0750},
    {"a_5", 0.5618, 0.574644, kNone, 1.9952, kNone, kNone},
    {"a_6", 0.6418, 0.571113, kNone, 1.7627, kNone, kNone},
    {"b_1", 0.223, 0.135305, kNone, 4.5187, kNone, kNone},
    {"b_2", 0.303, 0.39516, kNone, 3.8278, kNone, kNone},
    {"b_3", 0.383, 0.513387, kNone, 3.1166, kNone, kNone},
    {"b_4", 0.463, 0.586065, +0.3500, 2.4794, 2.4794, -0.1440},
    {"b_5", 0.543, 0.625346, kNone, 1.9842, kNone, kNone},
    {"b_6", 0.623, 0.633627, kNone, 1.6609, kNone, kNone},
    {"b_7", 0.703, 0.612991, kNone, 1.5001, kNone, kNone},
    {"c_1", -0.18, 0.804752, kNone, 4.0489, kNone, kNone},
    {"c_2", -0.26, 0.556808, kNone, 3.5706, kNone, kNone},
    {"c_3", -0.34, 0.429533, kNone, 3.0112, kNone, kNone},
    {"c_4", -0.42, 0.340407, +0.6750, 2.4345, 2.4364, -0.2755},
    {"c_5", -0.5, 0.277749, kNone, 1.8969, kNone, kNone},
    {"c_6", -0.58, 0.241765, kNone, 1.4397, kNone, kNone},
    {"c_7", -0.66, 0.23333, kNone, 1.0842, kNone, kNone},
    {"c_8", -0.74, 0.245595, kNone, 0.8324, kNone, kNone},
    {"c_9", -0.82, 0.26067, kNone, 0.6716, kNone, kNone},
    {"d_1", -0.151, 0.795424, kNone, 3.6393, kNone, kNone},
    {"d_2", -0.231, 0.537251, kNone, 3.2877, kNone, kNone},
    {"d_3", -0.311, 0.403645, kNone, 2.8378, kNone, kNone},
    {"d_4", -0.391, 0.303874, +0.8522, 2.3311, 2.3325, -0.3496},
    {"d_5", -0.471, 0.223441, kNone, 1.8107, kNone, kNone},
    {"d_6", -0.551, 0.161157, kNone, 1.3147, kNone, kNone},
    {"d_7", -0.631, 0.122279, kNone, 0.8735, kNone, kNone},
    {"d_8", -0.711, 0.107143, kNone, 0.5074, kNone, kNone},
    {"d_9", -0.821446, 0, kNone, 0.1447, kNone, kNone},
    {"x_1", 0.1295, 0.291985, kNone, 3.0024, kNone, kNone},
    {"x_2", 0.2045, 0.504394, kNone, 2.7872, kNone, kNone},
    {"x_3", 0.2795, 0.630833, kNone, 2.4865, kNone, kNone},
    {"x_4", 0.3545, 0.735193, +1.0500, 2.1132, 2.1145, -0.4382},
    {"x_5", 0.4295, 0.836335, kNone, 1.6845, kNone, kNone},
    {"X_-", 0.5, 1, kNone, 1.2500, kNone, kNone},
    {"l_1", 0.7996, 0.2692, -0.1608, 2.2269, 2.2270, +0.0701},
    {"l_2", 0.7257, 0.3281, -0.3114, 2.0652, 2.0653, +0.1402},
    {"l_3", 0.6785, 0.335, -0.4236, 1.9147, 1.9147, +0.1966},
    {"l_4", 0.61, 0.3391, -0.5330, 1.7427, 1.7427, +0.2564},
    {"l_5", 0.608, 0.29, -0.6625, 1.6163, 1.5064, +0.3361},
    {"l_6", 0.607, 0.24, -0.7787, 1.4735, 1.2653, +0.4200},
    {"l_7", 0.6035, 0.185, -0.8893, 1.3084, 1.0124, +0.5174},
    {"l_8", 0.6, 0.12, -0.9875, 1.1389, 0.7718, +0.6280},
}};

// Energy shared by each equal-energy series, keyed by the series letter.
inline std::optional<double> series_energy(std::string_view name)
{
    if (name.size() < 2) return std::nullopt;
    if (name == "Z_-") return 0.5;
    if (name == "X_-") return 1.05;
    switch (name[0]) {
    case 'y': return 0.0;
    case 'z': return 0.5;
    case 'a': return 0.1801;
    case 'b': return 0.35;
    case 'c': return 0.675;
    case 'd': return 0.8522;
    case 'x': return 1.05;
    default: return std::nullopt;
    }
}

} // namespace detail

inline const std::vector<CatalogEntry>& catalog()
{
    static const std::vector<CatalogEntry> entries = [] {
        std::vector<CatalogEntry> out;
        for (const auto& r : detail::kRawCatalog) {
            CatalogEntry e;
            e.name = r.name;
            e.theta_over_pi = r.theta_over_pi;
            e.phi_over_pi = r.phi_over_pi;
            if (std::isnan(r.epsilon)) {
                e.epsilon_ref = detail::series_energy(r.name).value();
                e.epsilon_inferred = true;
            } else {
                e.epsilon_ref = r.epsilon;
            }
            e.v_ref = r.v;
            if (!std::isnan(r.v_tilde)) e.v_tilde_ref = r.v_tilde;
            if (!std::isnan(r.beta)) e.beta_ref = r.beta;
            out.push_back(std::move(e));
        }
        return out;
    }();
    return entries;
}

inline const CatalogEntry& catalog_lookup(std::string_view name)
{
    for (const auto& e : catalog())
        if (e.name == name) return e;
    throw ConfigError("unknown catalog state '" + std::string(name) + "'");
}

inline bool catalog_contains(std::string_view name)
{
    for (const auto& e : catalog())
        if (e.name == name) return true;
    return false;
}

// Same-energy series in catalog order, e.g. "y" -> y_1 .. y_4, Y_+, y_6, y_7.
inline std::vector<std::string> catalog_series(std::string_view letter)
{
    if (letter == "y") return {"y_1", "y_2", "y_3", "y_4", "Y_+", "y_6", "y_7"};
    std::vector<std::string> out;
    for (const auto& e : catalog())
        if (e.name.size() == 3 && e.name.substr(0, 1) == letter && e.name[1] == '_' &&
            std::islower(static_cast<unsigned char>(e.name[0])))
            out.push_back(e.name);
    if (letter == "z") out.push_back("Z_-");
    if (letter == "x") out.push_back("X_-");
    return out;
}

inline std::string catalog_csv()
{
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string();
        std::ostringstream os;
        os << *v;
        return os.str();
    };
    std::ostringstream os;
    os << "name,theta_over_pi,phi_over_pi,epsilon_ref,v_ref,v_tilde_ref,beta_ref\n";
    for (const auto& e : catalog()) {
        os << e.name << ',' << e.theta_over_pi << ',' << e.phi_over_pi << ',' << e.epsilon_ref << ',' << e.v_ref
           << ',' << opt(e.v_tilde_ref) << ',' << opt(e.beta_ref) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Random sector states: every amplitude r e^{i phi} with phi ~ U[0, 2pi).
// By default r is the modulus of a standard complex normal variate, which makes
// the normalized vector exactly Haar distributed on the sector. `real_normal`
// draws r ~ N(0,1) instead; that variant carries a small entropy deficit.

enum class RandomRecipe { complex_normal, real_normal };

inline SectorVector sample_sector_random_state(BasisPtr basis, std::uint64_t seed,
                                               RandomRecipe recipe = RandomRecipe::complex_normal)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    SectorVector v(basis);
    for (auto& a : v.amplitudes()) {
        double r = normal(rng);
        if (recipe == RandomRecipe::complex_normal) r = std::hypot(r, normal(rng));
        a = std::polar(r, angle(rng));
    }
    v.normalize();
    return v;
}

} // namespace thermalab
