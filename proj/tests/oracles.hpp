#pragma once

// Brute-force full-space references used only by the test suites. Nothing
// here goes through the sector machinery it is used to check.

#include "thermalab/operators.hpp"

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <random>

namespace oracle {

using thermalab::Complex;
using thermalab::State;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

inline MatrixXcd dense_full(const thermalab::PauliSum& op, int L)
{
    const auto n = static_cast<Eigen::Index>(State{1} << L);
    MatrixXcd m = MatrixXcd::Zero(n, n);
    for (const auto& [p, c] : op.terms())
        for (Eigen::Index b = 0; b < n; ++b) {
            const auto s = static_cast<State>(b);
            m(static_cast<Eigen::Index>(s ^ p.x), b) += c * p.phase_on(s);
        }
    return m;
}

// Full-space H built site by site from 2x2 Pauli matrices via Kronecker products.
inline MatrixXcd kron_hamiltonian(int L, double hx, double hz)
{
    const auto n = static_cast<Eigen::Index>(1) << L;
    Eigen::Matrix2cd X, Z, I;
    X << 0, 1, 1, 0;
    Z << -1, 0, 0, 1;  // basis order (bit 0 = down, bit 1 = up)
    I.setIdentity();
    auto site_op = [&](const std::vector<std::pair<int, Eigen::Matrix2cd>>& ops) {
        MatrixXcd out = MatrixXcd::Identity(1, 1);
        for (int j = L - 1; j >= 0; --j) {
            Eigen::Matrix2cd f = I;
            for (const auto& [s, m] : ops)
                if (((s % L) + L) % L == j) f = m * f;
            MatrixXcd next(out.rows() * 2, out.cols() * 2);
            for (Eigen::Index a = 0; a < out.rows(); ++a)
                for (Eigen::Index b = 0; b < out.cols(); ++b)
                    next.block(2 * a, 2 * b, 2, 2) = out(a, b) * f;
            out = next;
        }
        return out;
    };
    MatrixXcd H = MatrixXcd::Zero(n, n);
    for (int j = 0; j < L; ++j) {
        H += site_op({{j, Z}, {j + 1, Z}});
        H += hx / 2 * (site_op({{j, X}}) + site_op({{j + 1, X}}));
        H += hz / 2 * (site_op({{j, Z}}) + site_op({{j + 1, Z}}));
    }
    return H;
}

// Symmetrization projector on 2^L, built from explicit permutation matrices.
inline MatrixXcd dense_projector(int L, int k, int refl)
{
    const auto n = static_cast<Eigen::Index>(State{1} << L);
    MatrixXcd P = MatrixXcd::Zero(n, n);
    const int nrefl = refl == 0 ? 1 : 2;
    const double order = static_cast<double>(L * nrefl);
    for (int r = 0; r < nrefl; ++r)
        for (int j = 0; j < L; ++j) {
            Complex chi = std::polar(1.0, 2 * std::numbers::pi * k * j / L);
            if (r == 1 && refl < 0) chi = -chi;
            for (Eigen::Index b = 0; b < n; ++b) {
                State s = static_cast<State>(b);
                if (r == 1) {
                    State t = 0;
                    for (int q = 0; q < L; ++q)
                        if ((s >> q) & 1) t |= State{1} << (L - 1 - q);
                    s = t;
                }
                State out = 0;
                for (int q = 0; q < L; ++q)
                    if ((s >> q) & 1) out |= State{1} << ((q + j) % L);
                P(static_cast<Eigen::Index>(out), b) += std::conj(chi) / order;
            }
        }
    return P;
}

// rank(P) = Tr(P) = |G|^{-1} sum_g chi(g)^* #fixed points of g.
inline long projector_trace(int L, int k, int refl)
{
    const State n = State{1} << L;
    const int nrefl = refl == 0 ? 1 : 2;
    Complex acc{};
    for (int r = 0; r < nrefl; ++r)
        for (int j = 0; j < L; ++j) {
            Complex chi = std::polar(1.0, 2 * std::numbers::pi * k * j / L);
            if (r == 1 && refl < 0) chi = -chi;
            long fixed = 0;
            for (State s = 0; s < n; ++s) {
                State t = s;
                if (r == 1) t = thermalab::reflect_sites(t, L);
                t = thermalab::rotate_sites(t, j, L);
                if (t == s) ++fixed;
            }
            acc += std::conj(chi) * static_cast<double>(fixed);
        }
    return std::lround(acc.real() / (L * nrefl));
}

inline VectorXcd random_complex(Eigen::Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    VectorXcd v(n);
    for (auto& x : v) x = Complex(g(rng), g(rng));
    return v;
}

inline double von_neumann_bits(const MatrixXcd& rho)
{
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho);
    double s = 0;
    for (double p : es.eigenvalues())
        if (p > 0) s -= p * std::log2(p);
    return s;
}

// Reduced density matrix of sites 0..l-1 by explicit index sums.
inline MatrixXcd partial_trace_first(const VectorXcd& psi, int L, int l)
{
    const Eigen::Index m = Eigen::Index{1} << l;
    const Eigen::Index rest = Eigen::Index{1} << (L - l);
    MatrixXcd rho = MatrixXcd::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) {
            Complex acc{};
            for (Eigen::Index e = 0; e < rest; ++e) acc += psi[a + m * e] * std::conj(psi[b + m * e]);
            rho(a, b) = acc;
        }
    return rho;
}


// Sector projector applied to a full-space vector with explicit bit loops.
inline VectorXcd apply_projector(const VectorXcd& psi, int L, int k, int refl)
{
    const auto n = psi.size();
    VectorXcd out = VectorXcd::Zero(n);
    const int nrefl = refl == 0 ? 1 : 2;
    const double order = static_cast<double>(L * nrefl);
    for (int r = 0; r < nrefl; ++r)
        for (int j = 0; j < L; ++j) {
            Complex chi = std::polar(1.0, 2 * std::numbers::pi * k * j / L);
            if (r == 1 && refl < 0) chi = -chi;
            for (Eigen::Index b = 0; b < n; ++b) {
                State s = static_cast<State>(b);
                if (r == 1) {
                    State t = 0;
                    for (int q = 0; q < L; ++q)
                        if ((s >> q) & 1) t |= State{1} << (L - 1 - q);
                    s = t;
                }
                State o = 0;
                for (int q = 0; q < L; ++q)
                    if ((s >> q) & 1) o |= State{1} << ((q + j) % L);
                out[static_cast<Eigen::Index>(o)] += std::conj(chi) / order * psi[b];
            }
        }
    return out;
}

// Product state prod_j [cos(t/2)|up> + e^{i p} sin(t/2)|down>] on 2^L amplitudes.
inline VectorXcd bloch_full(int L, double theta, double phi)
{
    const Complex up = std::cos(theta / 2);
    const Complex down = std::polar(std::sin(theta / 2), phi);
    VectorXcd v(Eigen::Index{1} << L);
    for (Eigen::Index b = 0; b < v.size(); ++b) {
        Complex a = 1;
        for (int q = 0; q < L; ++q) a *= ((b >> q) & 1) ? up : down;
        v[b] = a;
    }
    return v;
}

} // namespace oracle
