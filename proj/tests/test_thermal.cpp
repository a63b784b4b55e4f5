#include "oracles.hpp"
#include "thermalab/bloch.hpp"
#include "thermalab/thermal.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

using namespace thermalab;

namespace {

const HamiltonianParams kBench = HamiltonianParams::benchmark();

// Gibbs state built from the dense full-space Hamiltonian.
struct DenseGibbs {
    int L;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;

    explicit DenseGibbs(int L_) : L(L_), es(oracle::kron_hamiltonian(L_, kBench.h_x, kBench.h_z)) {}

    Eigen::MatrixXcd rho(double beta) const
    {
        const auto& E = es.eigenvalues();
        Eigen::VectorXd w = (-beta * (E.array() - (beta > 0 ? E.minCoeff() : E.maxCoeff()))).exp();
        w /= w.sum();
        return es.eigenvectors() * w.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    }

    // Tr(rho O) without the full product.
    static double trace_product(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& op)
    {
        return rho.cwiseProduct(op.transpose()).sum().real();
    }

    Eigen::MatrixXcd averaged(const PauliSum& local) const
    {
        PauliSum avg;
        for (int j = 0; j < L; ++j) avg += local.shifted(j, L);
        avg *= 1.0 / L;
        return oracle::dense_full(avg, L);
    }

    Eigen::MatrixXcd hamiltonian() const { return oracle::kron_hamiltonian(L, kBench.h_x, kBench.h_z); }

    Eigen::MatrixXcd bond_product(int r) const
    {
        PauliSum acc;
        for (int j = 0; j < L; ++j) {
            const auto a = bond_energy(kBench, j, L);
            const auto b = bond_energy(kBench, j + r, L);
            acc += a * b + b * a;
        }
        acc *= 0.5 / L;
        return oracle::dense_full(acc, L);
    }

    Eigen::MatrixXcd cluster_rdm(const Eigen::MatrixXcd& r, int l) const
    {
        const Eigen::Index m = Eigen::Index{1} << l, rest = Eigen::Index{1} << (L - l);
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(m, m);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < m; ++b)
                for (Eigen::Index e = 0; e < rest; ++e) out(a, b) += r(a + m * e, b + m * e);
        return out;
    }
};

const SpectrumTable& table10()
{
    static const SpectrumTable t =
        full_diagonalize({10}, kBench, parse_observables({"sysz02", "sxsysz012", "szsz02"}), ThermalOptions{});
    return t;
}

const DenseGibbs& dense10()
{
    static const DenseGibbs g(10);
    return g;
}

} // namespace

TEST_CASE("Sector spectra reproduce the full spectrum")
{
    const auto& t = table10();
    REQUIRE(t.size() == 1024);
    std::vector<double> e = t.energies();
    std::sort(e.begin(), e.end());
    const auto& ref = dense10().es.eigenvalues();
    double worst = 0;
    for (std::size_t n = 0; n < e.size(); ++n) worst = std::max(worst, std::abs(e[n] - ref[static_cast<Eigen::Index>(n)]));
    CHECK(worst < 1e-10);
    CHECK(t.sector_ranges().size() == 10);
    CHECK(std::abs(t.e_min() - ref.minCoeff()) < 1e-10);
    CHECK(std::abs(t.e_max() - ref.maxCoeff()) < 1e-10);
    CHECK(t.observable_index("C5"));
    CHECK_FALSE(t.observable_index("C6"));
    CHECK(t.observable_index("sysz02"));
}

TEST_CASE("Thermal expectations match the dense Gibbs state")
{
    const auto& t = table10();
    const auto& g = dense10();
    for (double beta : {-0.7, -0.1, 0.0, 0.3, 1.2}) {
        INFO("beta = " << beta);
        const auto rho = g.rho(beta);
        const auto H = g.hamiltonian();
        const double eps = DenseGibbs::trace_product(rho, H) / 10;
        for (const char* id : {"sx", "sy", "sz", "sxsx01", "szsz01", "sysz02", "sxsysz012", "szsz02"}) {
            INFO(id);
            const auto spec = ObservableSpec::parse(id);
            const double ref = DenseGibbs::trace_product(rho, g.averaged(spec.local_operator(kBench, 10)));
            CHECK(std::abs(thermal_expectation(spec, beta, t) - ref) < 1e-11);
        }
        for (int r = 0; r <= 5; ++r) {
            INFO("C" << r);
            const double ref = DenseGibbs::trace_product(rho, g.bond_product(r)) - eps * eps;
            CHECK(std::abs(thermal_expectation(ObservableSpec::correlator(r), beta, t) - ref) < 1e-10);
        }
        const auto p = thermal_point(t.energies(), 10, beta);
        CHECK(std::abs(p.epsilon - eps) < 1e-12);
        double sum = 0;
        for (int r = 0; r <= 5; ++r) sum += correlator_weight(r, 10) * thermal_expectation(ObservableSpec::correlator(r), beta, t);
        CHECK(std::abs(sum - p.v_tilde) < 1e-10);

        const double var = DenseGibbs::trace_product(rho, H * H) - std::pow(10 * eps, 2);
        CHECK(std::abs(p.v_tilde - var / 10) < 1e-9);
        const auto& E = g.es.eigenvalues();
        Eigen::VectorXd w = (-beta * (E.array() - E.minCoeff())).exp();
        w /= w.sum();
        double s = 0;
        for (double x : w)
            if (x > 1e-300) s -= x * std::log2(x);
        CHECK(std::abs(p.s_tilde - s) < 1e-9);
    }
    CHECK(std::abs(thermal_point(t.energies(), 10, 0.0).s_tilde - 10) < 1e-12);
    CHECK_THROWS_AS(thermal_expectation(ObservableSpec::entropy(2), 0.1, t), UsageError);
    CHECK_THROWS_AS(thermal_expectation(ObservableSpec::parse("sysy03"), 0.1, t), UsageError);
}

TEST_CASE("Thermal reduced density matrices")
{
    const auto& t = table10();
    const auto& g = dense10();
    for (double beta : {-0.4, 0.0, 0.8}) {
        INFO("beta = " << beta);
        const auto rho = g.rho(beta);
        const auto full = thermal_cluster_rdm(beta, t);
        CHECK((full - g.cluster_rdm(rho, 3)).cwiseAbs().maxCoeff() < 1e-12);
        for (int l = 1; l <= 3; ++l) {
            const auto r = thermal_rdm(beta, l, t);
            CHECK((r.rho.matrix - g.cluster_rdm(rho, l)).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(std::abs(r.entropy - oracle::von_neumann_bits(g.cluster_rdm(rho, l))) < 1e-10);
        }
        const double mi = thermal_mutual_information(beta, 1, 2, t);
        const double ref = oracle::von_neumann_bits(g.cluster_rdm(rho, 1)) + thermal_rdm(beta, 2, t).entropy -
                           oracle::von_neumann_bits(g.cluster_rdm(rho, 3));
        CHECK(mi >= -1e-12);
        CHECK(std::abs(mi - ref) < 1e-10);
    }
    CHECK(std::abs(thermal_rdm(0.0, 3, t).entropy - 3) < 1e-12);
    CHECK_THROWS_AS(thermal_rdm(0.1, 4, t), UsageError);
    CHECK_THROWS_AS(thermal_mutual_information(0.1, 2, 2, t), UsageError);
}

TEST_CASE("Inverse temperature from the energy density")
{
    const auto& t = table10();
    const ThermalCurve curve(t);
    CHECK(curve.grid().size() == 6001);
    for (double beta : {-2.5, -0.3, 0.0, 0.05, 0.9, 2.9, 4.5}) {
        const double eps = curve.at(beta).epsilon;
        CHECK(std::abs(solve_beta(eps, curve) - beta) < 1e-9);
    }
    for (std::size_t i = 1; i < curve.grid().size(); ++i) CHECK(curve.grid()[i].epsilon < curve.grid()[i - 1].epsilon);
    CHECK_THROWS_AS(solve_beta(curve.epsilon_min() - 0.1, curve), DomainError);
    CHECK_THROWS_AS(solve_beta(curve.epsilon_max(), curve), DomainError);
    const auto csv = curve.csv();
    CHECK(csv.rfind("beta,epsilon,v_tilde,S_tilde,log_Z_per_site\n", 0) == 0);
}

TEST_CASE("Second derivative with respect to the energy density")
{
    const auto& t = table10();
    const ThermalCurve curve(t);
    for (const char* name : {"z_4", "x_2", "b_4"}) {
        INFO(name);
        const double eps = bloch_variance_density(catalog_lookup(name).params(), kBench).epsilon;
        const double beta = solve_beta(eps, curve);
        for (const char* id : {"sx", "sz", "sxsx01", "C0", "C1", "C3"}) {
            INFO(id);
            const auto spec = ObservableSpec::parse(id);
            const double d2 = thermal_second_derivative(spec, eps, t, curve);
            const double fd = thermal_second_derivative_fd(spec, eps, 2e-3, t, curve);
            CHECK(std::abs(d2 - fd) < 1e-4 * std::max(1.0, std::abs(d2)));

            // Raw-moment form of the same expression.
            const auto m = thermal_moments(t.require_observable(id), beta, t);
            const double q = 10 / m.v_tilde, e = m.epsilon;
            const double raw = q * q * q * (m.h3 - e * e * e) * (e * m.o - m.ho) +
                               q * q * (m.h2o + e * m.ho - 2 * e * e * m.o) - q * m.o;
            CHECK(std::abs(raw - d2) < 1e-8 * std::max(1.0, std::abs(d2)));
        }
        // sum_r w_r <H_0 H_r> = v~ + L eps^2, so its curvature is v~'' + 2 L.
        double sum = 0;
        for (int r = 0; r <= 5; ++r) sum += correlator_weight(r, 10) * thermal_second_derivative(ObservableSpec::correlator(r), eps, t, curve);
        const double h = 2e-3;
        auto v = [&](double e) { return curve.at(solve_beta(e, curve)).v_tilde; };
        const double v2 = (v(eps + h) - 2 * v(eps) + v(eps - h)) / (h * h);
        CHECK(std::abs(sum - (2 * 10 + v2)) < 1e-3 * std::abs(sum));
    }
}

TEST_CASE("Spectrum cache round trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "thermalab_test_thsp";
    std::filesystem::remove_all(dir);
    ThermalOptions opt;
    opt.cache_dir = dir;
    int loads = 0;
    opt.log = [&](const std::string& s) { loads += s.rfind("loaded", 0) == 0; };
    const auto a = full_diagonalize({8}, kBench, parse_observables({"sysz02"}), opt);
    CHECK(loads == 0);
    const auto path = spectrum_cache_path(dir, a.descriptor(), 8);
    REQUIRE(std::filesystem::exists(path));
    CHECK(path.filename().string().rfind("spectrum_L8_", 0) == 0);
    const auto b = full_diagonalize({8}, kBench, parse_observables({"sysz02"}), opt);
    CHECK(loads == 1);
    CHECK(a.serialize() == b.serialize());

    // Different fields give a different key.
    const auto c = full_diagonalize({8}, {-1.0, 0.5}, parse_observables({"sysz02"}), opt);
    CHECK(loads == 1);
    CHECK(c.descriptor() != a.descriptor());

    // A corrupt file is rebuilt.
    io::write_file_atomic(path, "THSPgarbage");
    const auto d = full_diagonalize({8}, kBench, parse_observables({"sysz02"}), opt);
    CHECK(loads == 1);
    CHECK(d.serialize() == a.serialize());
    std::filesystem::remove_all(dir);
}

TEST_CASE("Dense guard refuses oversized sectors")
{
    ThermalOptions opt;
    opt.dense_guard = 20;
    CHECK_THROWS_AS(full_diagonalize({8}, kBench, {}, opt), ResourceError);
    opt = {};
    opt.l_max = 8;
    CHECK_THROWS_AS(full_diagonalize({8}, kBench, {}, opt), UsageError);
}

TEST_CASE("Dense eigensystems")
{
    std::mt19937_64 rng(11);
    for (Eigen::Index n : {Eigen::Index{1}, Eigen::Index{40}, Eigen::Index{700}}) {
        INFO("n = " << n);
        MatrixXc M = oracle::random_complex(n * n, rng).reshaped(n, n);
        M = (M + M.adjoint()).eval();
        const auto c = hermitian_eigensystem(M);
        CHECK((M * c.vectors - c.vectors * c.values.asDiagonal()).cwiseAbs().maxCoeff() < 1e-10 * n);
        CHECK((c.vectors.adjoint() * c.vectors - MatrixXc::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-11);
        for (Eigen::Index k = 1; k < n; ++k) CHECK(c.values[k] >= c.values[k - 1]);
        const Eigen::MatrixXd R = M.real();
        const auto r = symmetric_eigensystem(R);
        CHECK((R * r.vectors.real() - r.vectors.real() * r.values.asDiagonal()).cwiseAbs().maxCoeff() < 1e-10 * n);
        CHECK(r.vectors.imag().cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(hermitian_eigensystem(MatrixXc::Zero(3, 2)), UsageError);
}

TEST_CASE("Small ring spectrum and traces")
{
    const auto t = full_diagonalize({4}, kBench, {}, ThermalOptions{});
    REQUIRE(t.size() == 16);
    std::vector<double> e = t.energies();
    std::sort(e.begin(), e.end());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(oracle::kron_hamiltonian(4, kBench.h_x, kBench.h_z));
    for (std::size_t n = 0; n < 16; ++n) CHECK(std::abs(e[n] - es.eigenvalues()[static_cast<Eigen::Index>(n)]) < 1e-12);
    for (const auto& [a, b] : t.sector_ranges())
        for (std::size_t n = a + 1; n < b; ++n) CHECK(t.energies()[n] >= t.energies()[n - 1]);

    const auto& big = table10();
    for (const char* id : {"sz", "sx", "sxsx01"}) {
        double tr = 0;
        const auto obs = big.require_observable(id);
        for (std::size_t n = 0; n < big.size(); ++n) tr += big.diag(n, obs);
        CHECK(std::abs(tr) < 1e-9);
    }
}

TEST_CASE("Entropy limits and the constant observable")
{
    const auto& t = table10();
    const ThermalCurve curve(t);
    CHECK(thermal_entropy(0.0, curve) == Catch::Approx(10).epsilon(1e-14));
    // Nondegenerate ground state.
    CHECK(thermal_entropy(200.0, curve) < 1e-9);
    for (const auto& p : curve.grid()) CHECK(p.v_tilde > 0);

    const std::vector<double> ones(t.size(), 1.0);
    for (double beta : {-0.5, 0.0, 0.7}) CHECK(std::abs(second_derivative_from_rows(t.energies(), ones, 10, beta)) < 1e-10);
    // O = h is linear in eps.
    std::vector<double> h;
    for (double e : t.energies()) h.push_back(e / 10);
    CHECK(std::abs(second_derivative_from_rows(t.energies(), h, 10, 0.4)) < 1e-9);
    CHECK_THROWS_AS(second_derivative_from_rows(t.energies(), {1.0}, 10, 0.0), UsageError);
    CHECK_THROWS_AS(second_derivative_from_rows({1.0, 1.0}, {1.0, 2.0}, 1, 0.0), DomainError);
}
