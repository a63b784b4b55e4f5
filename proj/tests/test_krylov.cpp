#include "oracles.hpp"
#include "thermalab/bloch.hpp"
#include "thermalab/krylov.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

using namespace thermalab;

namespace {

const HamiltonianParams kBench = HamiltonianParams::benchmark();

BasisPtr k0_even(int L) { return build_sector_basis({L}, {0, Reflection::even}); }

// exp(-i H t) from a dense eigendecomposition.
struct SpectralPropagator {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es;

    explicit SpectralPropagator(const MatrixXc& H) : es(H) {}

    VectorXc operator()(const VectorXc& v, double t) const
    {
        const MatrixXc& U = es.eigenvectors();
        VectorXc c = U.adjoint() * v;
        for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::polar(1.0, -t * es.eigenvalues()[k]);
        return U * c;
    }
};

} // namespace

TEST_CASE("Zero time step is the identity")
{
    const auto b = k0_even(8);
    const auto H = build_sector_hamiltonian(*b, kBench);
    const auto v = sample_sector_random_state(b, 1);
    const auto [w, rep] = lanczos_exp_step(H, v, 0.0, KrylovConfig{});
    CHECK(w.amplitudes() == v.amplitudes());
    CHECK(rep.substeps == 0);
}

TEST_CASE("Single step matches the dense spectral propagator")
{
    const auto b = k0_even(10);
    const auto H = build_sector_hamiltonian(*b, kBench);
    const SpectralPropagator exact(H.to_dense());
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto v = sample_sector_random_state(b, seed);
        const auto [w, rep] = lanczos_exp_step(H, v, 0.1, KrylovConfig{});
        CHECK((w.amplitudes() - exact(v.amplitudes(), 0.1)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(w.norm() - 1) < 1e-12);
        CHECK(rep.error_estimate <= 1e-12);
        CHECK(rep.subspace_dim >= 2);
        CHECK(rep.subspace_dim <= 30);
    }
}

TEST_CASE("Eigenvectors only pick up a phase")
{
    const auto b = k0_even(8);
    const auto H = build_sector_hamiltonian(*b, kBench);
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(H.to_dense());
    for (Eigen::Index k : {Eigen::Index{0}, es.eigenvalues().size() / 2}) {
        const SectorVector v(b, es.eigenvectors().col(k));
        const auto [w, rep] = lanczos_exp_step(H, v, 0.1, KrylovConfig{});
        const VectorXc expect = std::polar(1.0, -0.1 * es.eigenvalues()[k]) * v.amplitudes();
        CHECK((w.amplitudes() - expect).cwiseAbs().maxCoeff() < 1e-11);
        CHECK(rep.subspace_dim <= 2);
    }
}

TEST_CASE("Sub-stepping when the subspace is too small")
{
    const auto b = k0_even(10);
    const auto H = build_sector_hamiltonian(*b, kBench);
    const SpectralPropagator exact(H.to_dense());
    const auto v = sample_sector_random_state(b, 9);
    KrylovConfig cfg;
    cfg.m_max = 6;
    const auto [w, rep] = lanczos_exp_step(H, v, 1.0, cfg);
    CHECK(rep.substeps > 1);
    CHECK((w.amplitudes() - exact(v.amplitudes(), 1.0)).cwiseAbs().maxCoeff() < 1e-10);

    cfg.m_max = 2;
    cfg.max_halvings = 0;
    CHECK_THROWS_AS(lanczos_exp_step(H, v, 1.0, cfg), NumericalError);
}

TEST_CASE("Long propagation against the dense propagator")
{
    const auto b = k0_even(10);
    const auto H = build_sector_hamiltonian(*b, kBench);
    const SpectralPropagator exact(H.to_dense());
    const auto v0 = build_bloch_state(catalog_lookup("z_4").params(), b);
    KrylovConfig cfg;
    VectorXc psi = v0.amplitudes();
    const ApplyFn apply = [&H](const VectorXc& x, VectorXc& y) { H.apply(x, y); };
    for (int n = 1; n <= 1000; ++n) {
        lanczos_exp_step(apply, psi, cfg.dt, cfg);
        if (n == 10 || n == 100 || n == 1000) {
            INFO("t = " << n * cfg.dt);
            CHECK((psi - exact(v0.amplitudes(), n * cfg.dt)).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    CHECK(std::abs(psi.norm() - 1) < 1e-9);
}

TEST_CASE("Frozen classical state")
{
    const HamiltonianParams ising{0.0, 0.5};
    const auto b = k0_even(8);
    KrylovConfig cfg;
    cfg.t_final = 5;
    const auto rec = evolve_and_measure(build_bloch_state({0, 0}, b), ising, parse_observables({"sz", "fid"}), cfg);
    REQUIRE(rec.complete);
    CHECK(rec.rows.size() == 51);
    for (const auto& r : rec.rows) {
        CHECK(std::abs(r[0] - 1) < 1e-13);
        CHECK(std::abs(r[1] - 1) < 1e-13);
    }
}

TEST_CASE("Trajectory conservation laws and the correlator sum rule")
{
    const int L = 14;
    const auto b = k0_even(L);
    std::vector<std::string> ids;
    for (int r = 0; r <= L / 2; ++r) ids.push_back("C" + std::to_string(r));
    KrylovConfig cfg;
    cfg.t_final = 20;
    for (const char* name : {"Y_+", "z_4"}) {
        INFO(name);
        const auto p = catalog_lookup(name).params();
        const auto rec = evolve_and_measure(build_bloch_state(p, b), kBench, parse_observables(ids), cfg);
        REQUIRE(rec.complete);
        CHECK(std::abs(rec.variance - bloch_variance_density(p, kBench).variance) < 1e-10);
        for (const auto& row : rec.rows) {
            double sum = 0;
            for (int r = 0; r <= L / 2; ++r) sum += correlator_weight(r, L) * row[static_cast<std::size_t>(r)];
            CHECK(std::abs(sum - rec.variance) < 1e-9);
        }
        CHECK(rec.max_norm_drift() < 1e-9);
        CHECK(rec.max_energy_drift() < 1e-9);
        CHECK(rec.max_variance_drift() < 1e-9);
    }
}

TEST_CASE("Sampling step does not change the dynamics")
{
    const auto b = k0_even(10);
    const auto v = build_bloch_state(catalog_lookup("y_3").params(), b);
    const auto obs = parse_observables({"sx", "C2", "S2"});
    KrylovConfig fine, coarse;
    fine.t_final = coarse.t_final = 10;
    coarse.dt = 0.5;
    const auto a = evolve_and_measure(v, kBench, obs, fine);
    const auto c = evolve_and_measure(v, kBench, obs, coarse);
    REQUIRE(c.rows.size() == 21);
    for (std::size_t n = 0; n < c.rows.size(); ++n) {
        CHECK(std::abs(a.times[5 * n] - c.times[n]) < 1e-12);
        for (std::size_t k = 0; k < obs.size(); ++k) CHECK(std::abs(a.rows[5 * n][k] - c.rows[n][k]) < 1e-8);
    }
}

TEST_CASE("Observable series match the dense propagator")
{
    const int L = 10;
    const auto b = k0_even(L);
    const auto H = build_sector_hamiltonian(*b, kBench);
    const SpectralPropagator exact(H.to_dense());
    const auto v = build_bloch_state(catalog_lookup("a_4").params(), b);
    const auto obs = parse_observables({"sz", "sxsx01", "C1", "S3", "I_1_1", "fid"});
    KrylovConfig cfg;
    cfg.t_final = 30;
    const auto rec = evolve_and_measure(v, kBench, obs, cfg);
    const Measurer m(b, kBench, obs);
    for (std::size_t n = 0; n < rec.rows.size(); n += 7) {
        const SectorVector w(b, exact(v.amplitudes(), rec.times[n]));
        const auto ref = m.measure(w, {rec.epsilon, &v});
        for (std::size_t k = 0; k < obs.size(); ++k) CHECK(std::abs(rec.rows[n][k] - ref[k]) < 1e-9);
    }
}

TEST_CASE("Eigenstate fidelity stays at one")
{
    const auto b = k0_even(8);
    const auto H = build_sector_hamiltonian(*b, kBench);
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(H.to_dense());
    const SectorVector v(b, es.eigenvectors().col(3));
    KrylovConfig cfg;
    cfg.t_final = 10;
    const auto rec = evolve_and_measure(v, kBench, parse_observables({"fid"}), cfg);
    for (const auto& r : rec.rows) CHECK(std::abs(r[0] - 1) < 1e-12);
}

TEST_CASE("Interrupted runs resume from the checkpoint with identical output")
{
    const auto dir = std::filesystem::temp_directory_path() / "thermalab_test_ckpt";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const auto b = k0_even(10);
    const auto v = build_bloch_state(catalog_lookup("b_4").params(), b);
    const auto obs = parse_observables({"sz", "C2", "S1"});
    KrylovConfig cfg;
    cfg.t_final = 25;
    const auto clean = evolve_and_measure(v, kBench, obs, cfg);

    EvolveOptions opt;
    opt.checkpoint = dir / "run.thck";
    opt.checkpoint_key = "b_4/L10";
    opt.progress = [](double t) {
        if (t > 13.05) throw std::runtime_error("interrupted");
    };
    CHECK_THROWS(evolve_and_measure(v, kBench, obs, cfg, opt));
    REQUIRE(std::filesystem::exists(*opt.checkpoint));

    // A checkpoint written under another key is ignored.
    EvolveOptions other = opt;
    other.progress = nullptr;
    other.checkpoint_key = "something else";
    const auto copy = dir / "copy.thck";
    std::filesystem::copy_file(*opt.checkpoint, copy);
    other.checkpoint = copy;
    CHECK(evolve_and_measure(v, kBench, obs, cfg, other).csv() == clean.csv());

    opt.progress = nullptr;
    const auto resumed = evolve_and_measure(v, kBench, obs, cfg, opt);
    CHECK(resumed.csv() == clean.csv());
    CHECK_FALSE(std::filesystem::exists(*opt.checkpoint));
    std::filesystem::remove_all(dir);
}

TEST_CASE("Propagation failures are flagged with partial results")
{
    const auto b = k0_even(10);
    KrylovConfig cfg;
    cfg.m_max = 2;
    cfg.max_halvings = 0;
    cfg.dt = 1.0;
    cfg.t_final = 5;
    const auto rec = evolve_and_measure(sample_sector_random_state(b, 3), kBench, parse_observables({"sz"}), cfg);
    CHECK_FALSE(rec.complete);
    CHECK_FALSE(rec.failure.empty());
    CHECK(rec.rows.size() == 1);
}

TEST_CASE("Krylov configuration validation")
{
    KrylovConfig c;
    CHECK_NOTHROW(c.validate());
    c.m_max = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.dt = 0.3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.step_tolerance = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    const auto b = k0_even(6);
    CHECK_THROWS_AS(evolve_and_measure(build_bloch_state({0, 0}, b), kBench, {}, KrylovConfig{}), UsageError);
}
