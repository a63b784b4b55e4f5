// Entanglement entropy of a cluster after a quench against the Page value of a
// random state and the thermal entropy density.

#include "thermalab/thermalab.hpp"

#include <cstdio>

using namespace thermalab;

int main()
{
    const int L = 14;
    const auto h = HamiltonianParams::benchmark();
    const auto basis = build_sector_basis(RingGeometry{L}, {0, Reflection::even});
    const auto psi = build_bloch_state(catalog_lookup("Y_+").params(), basis);
    KrylovConfig cfg;
    cfg.t_final = 40;
    cfg.dt = 0.5;
    const auto rec = evolve_and_measure(psi, h, parse_observables({"S1", "S2", "S3"}), cfg);
    std::printf("%6s %10s %10s %10s\n", "t", "S1", "S2", "S3");
    for (std::size_t n = 0; n < rec.times.size(); n += 8)
        std::printf("%6.1f %10.6f %10.6f %10.6f\n", rec.times[n], rec.rows[n][0], rec.rows[n][1], rec.rows[n][2]);
    std::printf("\nPage    %10.6f %10.6f %10.6f\n", page_entropy(1, L), page_entropy(2, L), page_entropy(3, L));
}
