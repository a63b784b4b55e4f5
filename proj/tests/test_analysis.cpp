#include "oracles.hpp"
#include "thermalab/analysis.hpp"
#include "thermalab/bloch.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace thermalab;

namespace {

const HamiltonianParams kBench = HamiltonianParams::benchmark();

std::vector<double> grid(double t_f, double dt)
{
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(std::llround(t_f / dt));
    for (std::size_t i = 0; i <= n; ++i) t.push_back(static_cast<double>(i) * dt);
    return t;
}

template <class Fn>
std::vector<double> sample(const std::vector<double>& t, Fn&& f)
{
    std::vector<double> y;
    for (double x : t) y.push_back(f(x));
    return y;
}

} // namespace

TEST_CASE("Equilibrium statistics")
{
    const auto t = grid(100, 0.1);
    const auto c = equilibrium_stats(t, sample(t, [](double) { return 0.37; }));
    CHECK(c.o_bar == Catch::Approx(0.37).epsilon(1e-14));
    CHECK(c.delta_o2 == Catch::Approx(0).margin(1e-15));
    CHECK(c.t_start == Catch::Approx(75));
    CHECK(c.t_end == Catch::Approx(100));
    CHECK(c.samples == 251);

    const double w = 3.0;
    const auto s = equilibrium_stats(t, sample(t, [&](double x) { return std::sin(w * x); }));
    CHECK(std::abs(s.o_bar) < 1.0 / (w * 25));
    CHECK(std::abs(s.delta_o2 - 0.5) < 1.0 / (w * 25));

    // Linear in the series for the mean.
    const auto a = sample(t, [](double x) { return std::exp(-x / 10) + 0.1 * std::cos(x); });
    const auto b = sample(t, [](double x) { return std::sin(0.3 * x); });
    std::vector<double> mix(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
    CHECK(equilibrium_stats(t, mix).o_bar ==
          Catch::Approx(2.0 * equilibrium_stats(t, a).o_bar - 0.5 * equilibrium_stats(t, b).o_bar).margin(1e-14));

    const auto half = equilibrium_stats(t, b, 0.5);
    CHECK(half.t_start == Catch::Approx(50));
    const std::vector<double> shortt{0, 1, 2}, shorty{1, 2, 3};
    CHECK_THROWS_AS(equilibrium_stats(shortt, shorty), UsageError);
    CHECK_THROWS_AS(equilibrium_stats(t, b, 0.0), UsageError);
    CHECK_THROWS_AS(equilibrium_stats(t, std::vector<double>(3)), UsageError);
}

TEST_CASE("Fluctuation scaling fit")
{
    const std::vector<double> s{8.1, 9.7, 11.2, 12.9};
    std::vector<double> d;
    for (double x : s) d.push_back(std::exp2(-x));
    const auto f = fluctuation_scaling(s, d);
    CHECK(f.slope == Catch::Approx(-1).epsilon(1e-12));
    CHECK(f.prefactor() == Catch::Approx(1).epsilon(1e-10));
    CHECK(f.r2 == Catch::Approx(1).epsilon(1e-12));
    for (auto& x : d) x *= 3.0;
    CHECK(fluctuation_scaling(s, d).prefactor() == Catch::Approx(3).epsilon(1e-10));
    CHECK_THROWS_AS(fluctuation_scaling({1, 2}, {0.1, 0.2}), FitError);
    CHECK_THROWS_AS(fluctuation_scaling({1, 1, 1}, {0.1, 0.2, 0.3}), FitError);
    CHECK_THROWS_AS(fluctuation_scaling({1, 2, 3}, {0.1, 0.0, 0.3}), FitError);
}

TEST_CASE("ETH deviation fit through the origin")
{
    std::vector<DeviationPoint> pts;
    for (double x : {-0.3, -0.1, 0.05, 0.2, 0.4}) pts.push_back({x, 0.5 * x * 7.0, "s", 14, "C2"});
    const auto f = eth_deviation_fit(pts);
    CHECK(f.slope == Catch::Approx(7).epsilon(1e-13));
    CHECK(f.residual_rms < 1e-14);
    CHECK(f.residuals.size() == 5);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0, 1e-3);
    for (auto& p : pts) p.y += noise(rng);
    CHECK(std::abs(eth_deviation_fit(pts).slope - 7) < 0.1);

    CHECK_THROWS_AS(eth_deviation_fit({pts[0], pts[1]}), FitError);
    std::vector<DeviationPoint> zero(3);
    CHECK_THROWS_AS(eth_deviation_fit(zero), FitError);
}

TEST_CASE("Quadratic entropy deviation fit")
{
    const std::vector<double> x{-0.4, -0.2, 0.0, 0.1, 0.3, 0.5};
    std::vector<double> y;
    for (double v : x) y.push_back(-1.7 * v * v + 0.02 * v + 0.003);
    const auto f = entropy_deviation_fit(x, y);
    CHECK(f.a == Catch::Approx(-1.7).epsilon(1e-12));
    CHECK(f.b == Catch::Approx(0.02).epsilon(1e-10));
    CHECK(f.c == Catch::Approx(0.003).epsilon(1e-10));
    CHECK(f.residual_rms < 1e-14);
    CHECK_THROWS_AS(entropy_deviation_fit({1, 2, 3}, {1, 2, 3}), FitError);
    CHECK_THROWS_AS(entropy_deviation_fit({1, 1, 2, 2}, {1, 2, 3, 4}), FitError);
}

TEST_CASE("Area-law extraction")
{
    const double per_site = 0.93;
    const double g = 0.027;
    const auto r = area_law_extract({per_site + g, 2 * per_site + g + 1e-4, 3 * per_site + g - 1e-4}, per_site, 0.028, 0.0276);
    REQUIRE(r.g.size() == 3);
    CHECK(r.g_mean == Catch::Approx(g).margin(1e-12));
    CHECK(r.g_spread == Catch::Approx(2e-4).margin(1e-12));
    CHECK(r.i_bar == 0.028);
    const auto zero = area_law_extract({1.0, 2.0, 3.0}, 1.0, 0.0, 0.0);
    CHECK(zero.g_mean == 0.0);
    CHECK(zero.g_spread == 0.0);
    CHECK_THROWS_AS(area_law_extract({}, 1.0, 0, 0), UsageError);
}

TEST_CASE("Relaxation time of a synthetic exponential")
{
    const auto t = grid(100, 0.1);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0, 1e-8);
    const double o_inf = 0.25;
    const auto y = sample(t, [&](double x) { return o_inf + 0.8 * std::exp(-x / 5) + noise(rng); });
    const auto st = equilibrium_stats(t, y);
    CHECK(std::abs(st.o_bar - o_inf) < 1e-7);
    const auto f = fit_relaxation_time(t, y, st, std::pair{5.0, 40.0});
    REQUIRE(f.accepted);
    CHECK(std::abs(f.tau - 5) < 0.1);
    CHECK(f.ci_lo <= f.tau);
    CHECK(f.ci_hi >= f.tau);
    CHECK(f.r2 > 0.99);
    CHECK(f.excluded == 0);

    // SNR 100 against the signal at the window start.
    std::normal_distribution<double> loud(0, 0.01 * 0.8 * std::exp(-1.0));
    const auto y2 = sample(t, [&](double x) { return 0.8 * std::exp(-x / 5) + loud(rng) * std::exp(-(x - 5) / 5); });
    EquilibriumStats exact;
    const auto f2 = fit_relaxation_time(t, y2, exact, std::pair{5.0, 25.0});
    REQUIRE(f2.accepted);
    CHECK(std::abs(f2.tau - 5) < 0.1);

    // Default window: from the initial peak to 0.75 t_f while the signal stays above the floor.
    const auto win = default_fit_window(t, y, st);
    CHECK(win.first == Catch::Approx(0));
    CHECK(win.second == Catch::Approx(75));
    const auto fd = fit_relaxation_time(t, y, st);
    CHECK(fd.accepted);
    CHECK(std::abs(fd.tau - 5) < 0.1);

    // With a higher floor it ends at the first crossing and later points are dropped.
    std::normal_distribution<double> mid(0, 1e-5);
    const auto y3 = sample(t, [&](double x) { return 0.8 * std::exp(-x / 5) + mid(rng); });
    const auto st3 = equilibrium_stats(t, y3);
    const auto w3 = default_fit_window(t, y3, st3);
    CHECK(w3.second < 60);
    CHECK(w3.second > 40);
    const auto f3 = fit_relaxation_time(t, y3, st3, std::pair{5.0, 75.0});
    CHECK(f3.excluded > 0);
    CHECK(f3.accepted);

    // Deterministic.
    const auto again = fit_relaxation_time(t, y, st, std::pair{5.0, 40.0});
    CHECK(again.tau == f.tau);
    CHECK(again.ci_lo == f.ci_lo);
}

TEST_CASE("Default window starts at the transient peak")
{
    const auto t = grid(100, 0.1);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0, 1e-4);
    // Rises first, then decays with tau = 4.
    const auto y = sample(t, [&](double x) { return (1 - std::exp(-2 * x)) * std::exp(-x / 4) + noise(rng); });
    const auto st = equilibrium_stats(t, y);
    const auto w = default_fit_window(t, y, st);
    const double peak = std::log(1 + 2 * 4.0) / 2;
    CHECK(std::abs(w.first - peak) < 0.11);
    CHECK(w.second > 25);
    CHECK(w.second < 50);
    const auto f = fit_relaxation_time(t, y, st, std::pair{3.0, w.second});
    REQUIRE(f.accepted);
    CHECK(std::abs(f.tau - 4) < 0.1);
}

TEST_CASE("Unreliable relaxation fits are rejected")
{
    const auto t = grid(100, 0.1);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0, 1);
    const auto y = sample(t, [&](double) { return noise(rng); });
    EquilibriumStats zero;
    const auto f = fit_relaxation_time(t, y, zero, std::pair{10.0, 60.0});
    CHECK_FALSE(f.accepted);
    CHECK_FALSE(f.reason.empty());

    const auto flat = sample(t, [](double) { return 1.0; });
    const auto g = fit_relaxation_time(t, flat, equilibrium_stats(t, flat), std::pair{10.0, 60.0});
    CHECK_FALSE(g.accepted);
    CHECK(g.points == 0);

    const auto grow = sample(t, [](double x) { return std::exp(x / 20); });
    CHECK_FALSE(fit_relaxation_time(t, grow, zero, std::pair{10.0, 60.0}).accepted);
    CHECK_FALSE(fit_relaxation_time(t, grow, zero, std::pair{60.0, 10.0}).accepted);
}

TEST_CASE("Power-law probe")
{
    const auto t = grid(100, 0.1);
    const auto p = powerlaw_probe(t, sample(t, [](double x) { return 1.0 + 2.0 / std::sqrt(x + 1e-300); }), 1.0, {2.0, 80.0});
    CHECK(p.slope == Catch::Approx(-0.5).epsilon(0.02));
    CHECK(p.power_law_like);
    const auto e = powerlaw_probe(t, sample(t, [](double x) { return std::exp(-x / 5); }), 0.0, {2.0, 80.0});
    CHECK_FALSE(e.power_law_like);
    CHECK(e.slope_drift > 1);
    CHECK(powerlaw_probe(t, sample(t, [](double x) { return std::pow(x, -0.75); }), 0.0, {0.0, 50.0}).excluded == 1);
    CHECK_THROWS_AS(powerlaw_probe(t, sample(t, [](double) { return 0.0; }), 0.0, {2.0, 80.0}), FitError);
}

TEST_CASE("Block averages")
{
    const auto t = grid(10, 0.5);
    const auto b = block_average(t, sample(t, [](double x) { return x; }), 2.0);
    REQUIRE(b.value.size() == 6);
    CHECK(b.value[0] == Catch::Approx(0.75));
    CHECK(b.t_mid[0] == Catch::Approx(1.0));
    CHECK(b.value.back() == Catch::Approx(10.0));
    CHECK_THROWS_AS(block_average(t, t, 0.0), UsageError);
}

TEST_CASE("Heisenberg scan of the return probability")
{
    const auto b = build_sector_basis({8}, {0, Reflection::even});
    HeisenbergOptions opt;
    opt.t_final = 2000;
    opt.windows = {100.0};

    const auto es = hermitian_eigensystem(build_sector_hamiltonian(*b, kBench).to_dense());
    const SectorVector eig(b, es.vectors.col(2));
    const auto e = heisenberg_scan(eig, kBench, opt);
    CHECK(std::abs(e.plateau - 1) < 1e-9);
    CHECK(std::abs(e.ipr - 1) < 1e-12);
    CHECK(e.onset == Catch::Approx(50));

    const auto y = build_bloch_state(catalog_lookup("Y_+").params(), b);
    const auto s = heisenberg_scan(y, kBench, opt);
    // Independent sum_j |c_j|^4 from the full-space spectrum.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> full(oracle::kron_hamiltonian(8, kBench.h_x, kBench.h_z));
    const Eigen::VectorXcd c = full.eigenvectors().adjoint() * expand_to_full(y);
    // Degenerate levels across sectors do not mix a k = 0 state, but guard by
    // summing weights inside each degenerate block.
    double ipr = 0;
    const auto& E = full.eigenvalues();
    for (Eigen::Index i = 0; i < E.size();) {
        Eigen::Index j = i;
        double w = 0;
        while (j < E.size() && E[j] - E[i] < 1e-9) w += std::norm(c[j++]);
        ipr += w * w;
        i = j;
    }
    CHECK(std::abs(s.ipr - ipr) < 1e-10);
    CHECK(std::abs(s.plateau - s.ipr) < 0.1 * s.ipr);
    CHECK(s.fidelity.front() == Catch::Approx(1).epsilon(1e-14));
    CHECK(s.fidelity.size() == 2001);
    CHECK(s.blocks.front().value.size() == 21);

    HeisenbergOptions big;
    big.max_L = 6;
    CHECK_THROWS_AS(heisenberg_scan(y, kBench, big), ResourceError);
}
