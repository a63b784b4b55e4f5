#include "oracles.hpp"
#include "thermalab/operators.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace thermalab;

namespace {

const HamiltonianParams kBench = HamiltonianParams::benchmark();

std::vector<double> sorted_eigs(const Eigen::MatrixXcd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("PauliSum Hamiltonian equals the Kronecker-product construction")
{
    for (int L : {2, 3, 5}) {
        PauliSum H;
        for (int j = 0; j < L; ++j) H += bond_energy(kBench, j, L);
        const auto a = oracle::dense_full(H, L);
        const auto b = oracle::kron_hamiltonian(L, kBench.h_x, kBench.h_z);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("L=4 spectrum over all momentum sectors matches brute force")
{
    const int L = 4;
    std::vector<double> sectors;
    for (const auto& s : momentum_sectors(L)) {
        auto b = build_sector_basis({L}, s);
        auto e = sorted_eigs(build_dense_hamiltonian(*b, kBench));
        sectors.insert(sectors.end(), e.begin(), e.end());
    }
    std::sort(sectors.begin(), sectors.end());
    const auto full = sorted_eigs(oracle::kron_hamiltonian(L, kBench.h_x, kBench.h_z));
    REQUIRE(full.size() == sectors.size());
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(std::abs(full[i] - sectors[i]) < 1e-12);
}

TEST_CASE("sector Hamiltonian equals P H P restricted by the dense projector")
{
    const int L = 4;
    for (auto [k, refl] : std::vector<std::pair<int, int>>{{0, 1}, {0, 0}, {1, 0}, {2, -1}}) {
        auto b = build_sector_basis({L}, {k, static_cast<Reflection>(refl)});
        const auto P = oracle::dense_projector(L, k, refl);
        const auto H = oracle::kron_hamiltonian(L, kBench.h_x, kBench.h_z);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(P * H * P);
        // eigenvalues of PHP on the range of P; compare extremes of the sector block
        const auto sec = sorted_eigs(build_dense_hamiltonian(*b, kBench));
        std::vector<double> proj;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> pe(P);
        Eigen::MatrixXcd Q = pe.eigenvectors().rightCols(static_cast<Eigen::Index>(b->dim()));
        auto restricted = sorted_eigs(Q.adjoint() * H * Q);
        REQUIRE(restricted.size() == sec.size());
        CHECK(std::abs(restricted.front() - sec.front()) < 1e-12);
        CHECK(std::abs(restricted.back() - sec.back()) < 1e-12);
        for (std::size_t i = 0; i < sec.size(); ++i) CHECK(std::abs(restricted[i] - sec[i]) < 1e-12);
    }
}

TEST_CASE("kernels are Hermitian and linear on random vectors")
{
    std::mt19937_64 rng(7);
    for (auto sec : {SectorSpec{0, Reflection::even}, SectorSpec{3, Reflection::none}, SectorSpec{5, Reflection::odd}}) {
        auto b = build_sector_basis({10}, sec);
        const auto n = static_cast<Eigen::Index>(b->dim());
        const auto Hop = hamiltonian_operator(kBench, 10);
        const auto Hs = build_sector_hamiltonian(*b, kBench);
        for (int trial = 0; trial < 5; ++trial) {
            const auto u = oracle::random_complex(n, rng);
            const auto v = oracle::random_complex(n, rng);
            const auto Hu = apply_averaged(*b, Hop, u);
            const auto Hv = apply_averaged(*b, Hop, v);
            CHECK(std::abs(u.dot(Hv) - std::conj(v.dot(Hu))) < 1e-12 * (1 + std::abs(u.dot(Hv))));
            const Complex a(0.3, -1.2);
            const auto lin = apply_averaged(*b, Hop, (a * u + v).eval());
            CHECK((lin - (a * Hu + Hv)).norm() < 1e-12 * lin.norm());
            CHECK((Hs * u - Hu).norm() < 1e-12 * Hu.norm());
        }
    }
}

TEST_CASE("dense Hamiltonian agrees with matrix-free application at L=10")
{
    std::mt19937_64 rng(11);
    auto b = build_sector_basis({10}, {0, Reflection::even});
    const auto M = build_dense_hamiltonian(*b, kBench);
    for (int trial = 0; trial < 20; ++trial) {
        SectorVector v(b, oracle::random_complex(static_cast<Eigen::Index>(b->dim()), rng));
        const auto w = apply_hamiltonian(*b, kBench, v);
        CHECK((M * v.amplitudes() - w.amplitudes()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("trace of H over all sectors vanishes")
{
    double tr = 0;
    for (const auto& s : momentum_sectors(8)) tr += build_dense_hamiltonian(*build_sector_basis({8}, s), kBench).trace().real();
    CHECK(std::abs(tr) < 1e-10);
}

TEST_CASE("averaged operators act inside the sector: no leakage in the full space")
{
    std::mt19937_64 rng(3);
    const int L = 8;
    auto b = build_sector_basis({L}, {0, Reflection::even});
    const auto P = oracle::dense_projector(L, 0, 1);
    for (const auto& local : {bond_energy_product(kBench, 2, L), PauliSum::product("xy", {0, 1}, L) + PauliSum::product("yx", {0, 1}, L),
                              PauliSum::single('z', 0, L)}) {
        PauliSum avg_full;
        for (int j = 0; j < L; ++j) avg_full += local.shifted(j, L);
        avg_full *= 1.0 / L;
        const auto c = oracle::random_complex(static_cast<Eigen::Index>(b->dim()), rng);
        const auto full_in = expand_to_full(*b, c);
        const Eigen::VectorXcd full_out = oracle::dense_full(avg_full, L) * full_in;
        const auto sector_out = apply_averaged(*b, AveragedOperator(local, L), c);
        CHECK((full_out - expand_to_full(*b, sector_out)).norm() < 1e-12 * (1 + full_out.norm()));
        CHECK((full_out - P * full_out).norm() < 1e-12 * (1 + full_out.norm()));
    }
}

TEST_CASE("expansion is an isometry and projection inverts it")
{
    std::mt19937_64 rng(5);
    for (auto sec : {SectorSpec{0, Reflection::even}, SectorSpec{2, Reflection::none}, SectorSpec{3, Reflection::odd}}) {
        auto b = build_sector_basis({6}, sec);
        auto c = oracle::random_complex(static_cast<Eigen::Index>(b->dim()), rng);
        const auto full = expand_to_full(*b, c);
        CHECK(std::abs(full.norm() - c.norm()) < 1e-12);
        CHECK((project_from_full(*b, full) - c).norm() < 1e-12);
    }
}

TEST_CASE("averaged operator basics")
{
    const int L = 6;
    auto b = build_sector_basis({L}, {0, Reflection::even});
    std::mt19937_64 rng(1);
    SectorVector v(b, oracle::random_complex(static_cast<Eigen::Index>(b->dim()), rng));
    const auto same = apply_translation_averaged_operator(*b, PauliSum::identity(), v);
    CHECK((same.amplitudes() - v.amplitudes()).norm() < 1e-14);

    // All-up representative is the last one (2^L - 1).
    SectorVector up(b);
    up.amplitudes()[static_cast<Eigen::Index>(b->dim() - 1)] = 1.0;
    REQUIRE(b->representatives().back() == low_mask(L));
    const SectorOperator sz(*b, AveragedOperator(PauliSum::single('z', 0, L), L));
    CHECK(std::abs(sz.expectation(up.amplitudes()) - 1.0) < 1e-14);
    const auto Hs = build_sector_hamiltonian(*b, kBench);
    CHECK(std::abs(Hs.expectation(up.amplitudes()) / L - 1.5) < 1e-14);

    CHECK_THROWS_AS(AveragedOperator(PauliSum::single('z', 7, 12), L), UsageError);
    auto other = build_sector_basis({L}, {1, Reflection::none});
    CHECK_THROWS_AS(apply_hamiltonian(*other, kBench, v), UsageError);
    CHECK_THROWS_AS(build_dense_hamiltonian(*b, kBench, 3), ResourceError);
}
