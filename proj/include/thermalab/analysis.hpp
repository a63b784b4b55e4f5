#pragma once

// Post-processing of trajectories: late-time averages, fluctuation and ETH
// scaling fits, area-law extraction and relaxation-time fits.

#include "thermalab/dense_eigen.hpp"
#include "thermalab/krylov.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace thermalab {

struct EquilibriumStats {
    double o_bar = 0.0;
    double delta_o2 = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::size_t samples = 0;

    double noise_floor() const noexcept { return std::sqrt(delta_o2); }
};

namespace detail {

inline void require_same_length(const std::vector<double>& t, const std::vector<double>& y)
{
    if (t.size() != y.size()) throw UsageError("time and value arrays differ in length");
}

inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y, std::size_t a, std::size_t b)
{
    double s = 0.0;
    for (std::size_t i = a; i + 1 <= b; ++i) s += 0.5 * (t[i + 1] - t[i]) * (y[i] + y[i + 1]);
    return s;
}

struct LineFit {
    double slope = 0, intercept = 0, r2 = 0, residual_rms = 0, slope_se = 0;
    std::size_t n = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n < 2) throw FitError("line fit needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 1e-300)) throw FitError("degenerate x spread");
    LineFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.residual_rms = std::sqrt(ss / n);
    f.r2 = syy > 0 ? 1.0 - ss / syy : 1.0;
    f.slope_se = n > 2 ? std::sqrt(ss / static_cast<double>(n - 2) / sxx) : std::numeric_limits<double>::infinity();
    return f;
}

} // namespace detail

// Trapezoidal average over the trailing fraction of [0, t_f].
inline EquilibriumStats equilibrium_stats(const std::vector<double>& t, const std::vector<double>& y,
                                          double fraction = 0.25)
{
    detail::require_same_length(t, y);
    if (!(fraction > 0 && fraction <= 1)) throw UsageError("averaging fraction must lie in (0, 1]");
    if (static_cast<double>(t.size()) < 4.0 / fraction)
        throw UsageError("series has " + std::to_string(t.size()) + " samples; need at least " +
                         std::to_string(static_cast<int>(std::ceil(4.0 / fraction))));
    const double t_f = t.back();
    const double t_a = t_f - fraction * t_f;
    std::size_t a = 0;
    while (a < t.size() && t[a] < t_a - 1e-9 * std::max(1.0, std::abs(t_f))) ++a;
    const std::size_t b = t.size() - 1;
    if (a >= b) throw UsageError("averaging window is empty");
    const double width = t[b] - t[a];
    std::vector<double> y2(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) y2[i] = y[i] * y[i];
    EquilibriumStats s;
    s.o_bar = detail::trapezoid(t, y, a, b) / width;
    s.delta_o2 = std::max(0.0, detail::trapezoid(t, y2, a, b) / width - s.o_bar * s.o_bar);
    s.t_start = t[a];
    s.t_end = t[b];
    s.samples = b - a + 1;
    return s;
}

inline EquilibriumStats equilibrium_stats(const TimeSeries& s, double fraction = 0.25)
{
    return equilibrium_stats(s.t, s.value, fraction);
}

// log2 dO^2 = log2 M - rate * S~.
struct FluctuationFit {
    double slope = 0.0;
    double log2_prefactor = 0.0;
    double r2 = 0.0;

    double prefactor() const { return std::exp2(log2_prefactor); }
};

inline FluctuationFit fluctuation_scaling(const std::vector<double>& s_tilde, const std::vector<double>& delta_o2)
{
    detail::require_same_length(s_tilde, delta_o2);
    if (s_tilde.size() < 3) throw FitError("fluctuation scaling needs at least three sizes");
    std::vector<double> ly;
    for (double d : delta_o2) {
        if (!(d > 0)) throw FitError("fluctuations must be positive for a log fit");
        ly.push_back(std::log2(d));
    }
    const auto f = detail::fit_line(s_tilde, ly);
    return {f.slope, f.intercept, f.r2};
}

struct DeviationPoint {
    double x = 0.0;  // (v - v~) / L
    double y = 0.0;  // O_bar - O~
    std::string state;
    int L = 0;
    std::string observable;
};

struct EthFit {
    double slope = 0.0;  // estimate of d^2 O / d eps^2
    double residual_rms = 0.0;
    std::vector<double> residuals;
};

// Least squares for y = (x / 2) * slope.
inline EthFit eth_deviation_fit(const std::vector<DeviationPoint>& pts)
{
    if (pts.size() < 3) throw FitError("deviation fit needs at least three points");
    double sxx = 0, sxy = 0, xmax = 0;
    for (const auto& p : pts) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw FitError("non-finite deviation point for " + p.state);
        sxx += p.x * p.x;
        sxy += p.x * p.y;
        xmax = std::max(xmax, std::abs(p.x));
    }
    if (!(sxx > 1e-24 * std::max(1.0, xmax * xmax))) throw FitError("deviation points have no x spread");
    EthFit f;
    f.slope = 2.0 * sxy / sxx;
    double ss = 0;
    for (const auto& p : pts) {
        const double r = p.y - 0.5 * p.x * f.slope;
        f.residuals.push_back(r);
        ss += r * r;
    }
    f.residual_rms = std::sqrt(ss / static_cast<double>(pts.size()));
    return f;
}

struct QuadraticFit {
    double a = 0.0, b = 0.0, c = 0.0;
    double residual_rms = 0.0;
};

inline QuadraticFit entropy_deviation_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    detail::require_same_length(x, y);
    const auto n = static_cast<Eigen::Index>(x.size());
    if (n < 4) throw FitError("quadratic fit needs at least four points");
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        A(i, 0) = xi * xi;
        A(i, 1) = xi;
        A(i, 2) = 1.0;
        rhs[i] = y[static_cast<std::size_t>(i)];
    }
    const auto qr = A.colPivHouseholderQr();
    if (qr.rank() < 3) throw FitError("quadratic fit is degenerate");
    const Eigen::VectorXd c = qr.solve(rhs);
    return {c[0], c[1], c[2], std::sqrt((A * c - rhs).squaredNorm() / static_cast<double>(n))};
}

struct AreaLawResult {
    std::vector<double> g;  // g[l-1] = S_bar_l - l S~ / L~
    double g_mean = 0.0;
    double g_spread = 0.0;  // max - min over l
    double i_bar = 0.0;
    double i_tilde = 0.0;
};

inline AreaLawResult area_law_extract(const std::vector<double>& s_bar, double s_tilde_per_site, double i_bar_11,
                                      double i_tilde_11)
{
    if (s_bar.empty()) throw UsageError("area-law extraction needs at least l = 1");
    AreaLawResult r;
    for (std::size_t l = 1; l <= s_bar.size(); ++l) r.g.push_back(s_bar[l - 1] - static_cast<double>(l) * s_tilde_per_site);
    const auto [lo, hi] = std::minmax_element(r.g.begin(), r.g.end());
    r.g_spread = *hi - *lo;
    for (double g : r.g) r.g_mean += g;
    r.g_mean /= static_cast<double>(r.g.size());
    r.i_bar = i_bar_11;
    r.i_tilde = i_tilde_11;
    return r;
}

// ---------------------------------------------------------------------------

struct RelaxationOptions {
    double r2_threshold = 0.8;
    double noise_factor = 3.0;
    double confidence = 0.95;
    std::size_t min_points = 5;
};

struct RelaxationFit {
    double tau = std::numeric_limits<double>::quiet_NaN();
    double t_a = 0.0, t_b = 0.0;
    double slope = 0.0, intercept = 0.0;
    double residual_rms = 0.0;
    double r2 = 0.0;
    double ci_lo = std::numeric_limits<double>::quiet_NaN();
    double ci_hi = std::numeric_limits<double>::quiet_NaN();
    std::size_t points = 0;
    std::size_t excluded = 0;
    bool accepted = false;
    std::string reason;
};

// |O - O_bar| below this is treated as noise.
inline double relaxation_threshold(const EquilibriumStats& stats, const RelaxationOptions& opt = {})
{
    return std::max(opt.noise_factor * stats.noise_floor(),
                    10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(stats.o_bar)));
}

// From the largest deviation in the first half of the run to the first local
// maximum of |O - O_bar| below the noise threshold, capped at 0.75 t_f.
inline std::pair<double, double> default_fit_window(const std::vector<double>& t, const std::vector<double>& y,
                                                    const EquilibriumStats& stats, const RelaxationOptions& opt = {})
{
    detail::require_same_length(t, y);
    if (t.empty()) throw UsageError("empty series");
    const double t_f = t.back();
    const double thr = relaxation_threshold(stats, opt);
    auto d = [&](std::size_t i) { return std::abs(y[i] - stats.o_bar); };
    std::size_t a = 0;
    for (std::size_t i = 1; i < t.size() && t[i] <= 0.5 * t_f; ++i)
        if (d(i) > d(a)) a = i;
    double t_b = 0.75 * t_f;
    for (std::size_t i = a + 1; i + 1 < t.size() && t[i] < t_b; ++i)
        if (d(i) < thr && d(i) >= d(i - 1) && d(i) >= d(i + 1)) {
            t_b = t[i];
            break;
        }
    return {t[a], std::max(t[a], t_b)};
}

inline RelaxationFit fit_relaxation_time(const std::vector<double>& t, const std::vector<double>& y,
                                         const EquilibriumStats& stats,
                                         std::optional<std::pair<double, double>> window = std::nullopt,
                                         const RelaxationOptions& opt = {})
{
    detail::require_same_length(t, y);
    const auto [t_a, t_b] = window ? *window : default_fit_window(t, y, stats, opt);
    RelaxationFit f;
    f.t_a = t_a;
    f.t_b = t_b;
    if (!(t_b > t_a)) {
        f.reason = "empty fit window";
        return f;
    }
    const double thr = relaxation_threshold(stats, opt);
    std::vector<double> xs, ls;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_a || t[i] > t_b) continue;
        const double d = std::abs(y[i] - stats.o_bar);
        if (d < thr) {
            ++f.excluded;
            continue;
        }
        xs.push_back(t[i]);
        ls.push_back(std::log(d));
    }
    f.points = xs.size();
    if (xs.size() < opt.min_points) {
        f.reason = "too few points above the noise floor (" + std::to_string(xs.size()) + ")";
        return f;
    }
    detail::LineFit lf;
    try {
        lf = detail::fit_line(xs, ls);
    } catch (const FitError& e) {
        f.reason = e.what();
        return f;
    }
    f.slope = lf.slope;
    f.intercept = lf.intercept;
    f.r2 = lf.r2;
    f.residual_rms = lf.residual_rms;
    if (!(lf.slope < 0)) {
        f.reason = "deviation does not decay";
        return f;
    }
    f.tau = -1.0 / lf.slope;
    if (xs.size() > 2 && std::isfinite(lf.slope_se)) {
        const boost::math::students_t dist(static_cast<double>(xs.size() - 2));
        const double q = boost::math::quantile(boost::math::complement(dist, 0.5 * (1.0 - opt.confidence)));
        const double s_lo = lf.slope - q * lf.slope_se, s_hi = lf.slope + q * lf.slope_se;
        f.ci_lo = -1.0 / s_lo;
        f.ci_hi = s_hi < 0 ? -1.0 / s_hi : std::numeric_limits<double>::infinity();
    }
    if (f.r2 < opt.r2_threshold) {
        f.reason = "no reliable tau: R^2 = " + io::format_double(f.r2);
        return f;
    }
    f.accepted = true;
    return f;
}

inline RelaxationFit fit_relaxation_time(const TimeSeries& s, const EquilibriumStats& stats,
                                         std::optional<std::pair<double, double>> window = std::nullopt,
                                         const RelaxationOptions& opt = {})
{
    return fit_relaxation_time(s.t, s.value, stats, window, opt);
}

struct PowerLawProbe {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_drift = 0.0;  // |s_late - s_early| / |s|
    std::size_t points = 0;
    std::size_t excluded = 0;
    bool power_law_like = false;
};

// Slope of ln|O - O_bar| against ln t, plus the drift between the two halves of the window in ln t.
inline PowerLawProbe powerlaw_probe(const std::vector<double>& t, const std::vector<double>& y, double o_bar,
                                    std::pair<double, double> window, double drift_tolerance = 0.1)
{
    detail::require_same_length(t, y);
    PowerLawProbe p;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < window.first || t[i] > window.second) continue;
        const double d = std::abs(y[i] - o_bar);
        if (!(t[i] > 0) || !(d > 0)) {
            ++p.excluded;
            continue;
        }
        lx.push_back(std::log(t[i]));
        ly.push_back(std::log(d));
    }
    p.points = lx.size();
    if (lx.size() < 6) throw FitError("power-law probe needs at least six positive points");
    const auto f = detail::fit_line(lx, ly);
    p.slope = f.slope;
    p.intercept = f.intercept;
    const double mid = 0.5 * (lx.front() + lx.back());
    std::vector<double> ax, ay, bx, by;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        (lx[i] < mid ? ax : bx).push_back(lx[i]);
        (lx[i] < mid ? ay : by).push_back(ly[i]);
    }
    if (ax.size() < 3 || bx.size() < 3) throw FitError("power-law probe window too narrow in log time");
    const double s1 = detail::fit_line(ax, ay).slope, s2 = detail::fit_line(bx, by).slope;
    p.slope_drift = std::abs(s2 - s1) / std::max(std::abs(p.slope), 1e-300);
    p.power_law_like = p.slope_drift < drift_tolerance;
    return p;
}

// ---------------------------------------------------------------------------

struct HeisenbergOptions {
    double t_final = 1e5;
    double dt = 1.0;
    std::vector<double> windows{100.0, 1000.0};
    int max_L = 12;
};

struct BlockAverage {
    double width = 0.0;
    std::vector<double> t_mid;
    std::vector<double> value;
};

struct HeisenbergScan {
    std::vector<double> t;
    std::vector<double> fidelity;
    std::vector<BlockAverage> blocks;
    double plateau = 0.0;        // mean fidelity over the second half of the run
    double ipr = 0.0;            // sum_j |c_j|^4
    double onset = std::numeric_limits<double>::quiet_NaN();  // first widest-block midpoint within 20% of the plateau
};

inline BlockAverage block_average(const std::vector<double>& t, const std::vector<double>& y, double width)
{
    detail::require_same_length(t, y);
    if (!(width > 0)) throw UsageError("block width must be positive");
    BlockAverage b;
    b.width = width;
    std::size_t i = 0;
    while (i < t.size()) {
        const double start = t[i];
        double s = 0;
        std::size_t n = 0;
        while (i < t.size() && t[i] < start + width) {
            s += y[i++];
            ++n;
        }
        b.t_mid.push_back(start + 0.5 * width);
        b.value.push_back(s / static_cast<double>(n));
    }
    return b;
}

// sum_j |<j|psi>|^4 over the eigenbasis of the sector Hamiltonian.
inline double inverse_participation(const SectorVector& psi, const HamiltonianParams& params,
                                    std::size_t dense_guard = kDefaultDenseGuard)
{
    const auto& basis = psi.basis();
    if (basis.dim() > dense_guard) throw ResourceError("sector too large for a dense decomposition");
    const auto es = hermitian_eigensystem(build_sector_hamiltonian(basis, params).to_dense());
    const VectorXc c = es.vectors.adjoint() * psi.amplitudes();
    return c.cwiseAbs2().cwiseAbs2().sum();
}

inline HeisenbergScan heisenberg_scan(const SectorVector& initial, const HamiltonianParams& params,
                                      const HeisenbergOptions& opt = {})
{
    if (initial.basis().L() > opt.max_L)
        throw ResourceError("Heisenberg scan limited to L <= " + std::to_string(opt.max_L));
    KrylovConfig cfg;
    cfg.dt = opt.dt;
    cfg.t_final = opt.t_final;
    cfg.validate();
    const auto H = build_sector_hamiltonian(initial.basis(), params);
    const ApplyFn apply = [&H](const VectorXc& x, VectorXc& y) { H.apply(x, y); };
    HeisenbergScan s;
    VectorXc psi = initial.amplitudes();
    const VectorXc& psi0 = initial.amplitudes();
    const std::size_t steps = cfg.steps();
    s.t.reserve(steps + 1);
    s.fidelity.reserve(steps + 1);
    for (std::size_t n = 0; n <= steps; ++n) {
        if (n > 0) lanczos_exp_step(apply, psi, cfg.dt, cfg);
        s.t.push_back(static_cast<double>(n) * cfg.dt);
        s.fidelity.push_back(std::norm(psi0.dot(psi)));
    }
    for (double w : opt.windows) s.blocks.push_back(block_average(s.t, s.fidelity, w));
    double acc = 0;
    std::size_t cnt = 0;
    for (std::size_t n = 0; n < s.t.size(); ++n)
        if (s.t[n] >= 0.5 * opt.t_final) {
            acc += s.fidelity[n];
            ++cnt;
        }
    s.plateau = acc / static_cast<double>(cnt);
    s.ipr = inverse_participation(initial, params);
    if (!s.blocks.empty()) {
        const auto& b = *std::max_element(s.blocks.begin(), s.blocks.end(),
                                          [](const auto& x, const auto& y) { return x.width < y.width; });
        for (std::size_t k = 0; k < b.value.size(); ++k)
            if (std::abs(b.value[k] - s.plateau) <= 0.2 * s.plateau) {
                s.onset = b.t_mid[k];
                break;
            }
    }
    return s;
}

} // namespace thermalab
