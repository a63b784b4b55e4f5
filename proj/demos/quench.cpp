// Quench a product state, then compare the long-time average of a few local
// observables with the canonical ensemble at the same energy density.

#include "thermalab/thermalab.hpp"

#include <cstdio>
#include <string>

using namespace thermalab;

int main(int argc, char** argv)
{
    const std::string name = argc > 1 ? argv[1] : "z_4";
    const int L = argc > 2 ? std::stoi(argv[2]) : 12;
    const auto h = HamiltonianParams::benchmark();

    const auto basis = build_sector_basis(RingGeometry{L}, {0, Reflection::even});
    const auto psi = build_bloch_state(catalog_lookup(name).params(), basis);
    const auto obs = parse_observables({"sz", "sx", "C0", "C1", "C2", "S1", "S2"});
    KrylovConfig cfg;
    cfg.t_final = 60;
    const auto rec = evolve_and_measure(psi, h, obs, cfg);
    std::printf("%s at L=%d: eps %.6f, v %.6f, sector dim %zu\n", name.c_str(), L, rec.epsilon, rec.variance,
                basis->dim());

    const auto table = full_diagonalize(RingGeometry{10}, h, {});
    const ThermalCurve curve(table);
    const double beta = solve_beta(rec.epsilon, curve);
    std::printf("beta(eps) at L~=10: %.6f\n\n", beta);
    std::printf("%-4s %12s %12s %12s\n", "obs", "O_bar", "delta_O2", "thermal");
    for (const auto& o : obs) {
        const auto st = equilibrium_stats(rec.series(o.id));
        const double th = detail::thermal_value(o, beta, &table);
        std::printf("%-4s %12.6f %12.3e %12.6f\n", o.id.c_str(), st.o_bar, st.delta_o2, th);
    }
}
