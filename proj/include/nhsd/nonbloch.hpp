#pragma once

#include <Eigen/Eigenvalues>
#include <limits>

#include "nhsd/geometry.hpp"

// Non-Bloch analysis: the Ronkin function and its landscape, extraction of
// mu_GBZ from the Wasserstein metric, open-boundary spectra by dense
// diagonalization, and OBC/GBZ reconstruction from intersection tracking.

namespace nhsd {

// ---------------------------------------------------------------------------
// Ronkin function.
// ---------------------------------------------------------------------------

/// V(E, mu) = (1/n_k) sum_k [ ln|E - E+| + ln|E - E-| ], the k average of
/// ln|det[E - H(beta)]| for the two-band model.  Convex in mu; flat around
/// its minimum iff E lies outside the open-boundary spectrum.
inline double ronkin(const ModelParams& p, Complex e_ref, double mu, int n_k) {
    if (n_k < 64) throw std::invalid_argument("ronkin: n_k < 64");
    double acc = 0.0;
    for (int j = 0; j < n_k; ++j) {
        const double k = two_pi * j / n_k;
        const Complex beta = momentum_to_beta(k, mu);
        const Complex root = std::sqrt(bloch_e1(p, beta) * bloch_e2(p, beta));
        const double d1 = std::abs(e_ref - root);
        const double d2 = std::abs(e_ref + root);
        if (d1 < 1e-9 || d2 < 1e-9)
            throw SingularityError("ronkin: reference energy on a sampled energy", mu);
        acc += std::log(d1) + std::log(d2);
    }
    return acc / n_k;
}

struct RonkinGrid {
    std::vector<Complex> e_refs;
    std::vector<double> mus;
    Eigen::MatrixXd values;  // rows: e_refs, cols: mus; NaN marks singular cells
    int n_k = 0;
};

/// Dense evaluation of the Ronkin function over a (reference energy, mu)
/// grid.  Singular cells are marked NaN, never fabricated.
inline RonkinGrid ronkin_landscape(const ModelParams& p,
                                   const std::vector<Complex>& e_grid,
                                   const std::vector<double>& mu_grid, int n_k,
                                   unsigned jobs = 1) {
    if (e_grid.empty() || mu_grid.empty())
        throw std::invalid_argument("ronkin_landscape: empty grid");
    RonkinGrid g;
    g.e_refs = e_grid;
    g.mus = mu_grid;
    g.n_k = n_k;
    g.values.resize(static_cast<Eigen::Index>(e_grid.size()),
                    static_cast<Eigen::Index>(mu_grid.size()));
    parallel_for(e_grid.size(), jobs, [&](std::size_t i) {
        for (std::size_t j = 0; j < mu_grid.size(); ++j) {
            double v;
            try {
                v = ronkin(p, e_grid[i], mu_grid[j], n_k);
            } catch (const SingularityError&) {
                v = std::numeric_limits<double>::quiet_NaN();
            }
            g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    });
    return g;
}

// ---------------------------------------------------------------------------
// mu_GBZ extraction.
// ---------------------------------------------------------------------------

struct MuGbzResult {
    double mu_gbz = 0.0;
    bool ep_nearby = false;  // an EP radius lies within 0.02 of the minimizer
};

/// Golden-section minimization of the integral-method Wasserstein metric over
/// mu.  Valid in the circular-GBZ regime (delta2 = 0); the range must bracket
/// an interior minimum.
inline MuGbzResult extract_mu_gbz(const ModelParams& p, double mu_lo, double mu_hi,
                                  int n_mu, int n_k, double tol = 1e-4) {
    if (p.delta2 != 0.0)
        throw std::domain_error("extract_mu_gbz: requires delta2 = 0 (circular GBZ)");
    if (!(mu_lo < mu_hi) || n_mu < 3)
        throw std::invalid_argument("extract_mu_gbz: bad mu range");

    const auto gw = [&](double m) {
        return wasserstein_metric(p, m, n_k, WassersteinMethod::Integral);
    };

    // Coarse bracket of the interior minimum.
    int best = -1;
    std::vector<double> grid(n_mu), val(n_mu);
    for (int i = 0; i < n_mu; ++i) {
        grid[i] = mu_lo + (mu_hi - mu_lo) * i / (n_mu - 1);
        val[i] = gw(grid[i]);
        if (best < 0 || val[i] < val[best]) best = i;
    }
    if (best == 0 || best == n_mu - 1)
        throw std::runtime_error("extract_mu_gbz: no interior minimum in range");

    double a = grid[best - 1], b = grid[best + 1];
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = gw(x1), f2 = gw(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a); f1 = gw(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a); f2 = gw(x2);
        }
    }
    MuGbzResult r;
    r.mu_gbz = 0.5 * (a + b);
    for (double m : exceptional_mu_values(p))
        if (std::abs(m - r.mu_gbz) < 0.02) r.ep_nearby = true;
    return r;
}

/// Closed-form GBZ radius exponent for delta2 = 0: the geometric mean of the
/// two EP radii, mu = -(1/2) ln((eta+gamma)/(eta-gamma)).
inline double mu_gbz_closed_form(const ModelParams& p) {
    return -0.5 * std::log((p.eta + p.gamma) / (p.eta - p.gamma));
}

// ---------------------------------------------------------------------------
// Open-boundary spectra.
// ---------------------------------------------------------------------------

enum class ObcMethod { Diagonalization, IntersectionTrace };

struct ObcSpectrum {
    std::vector<Complex> eigenvalues;  // sorted by real part (diagonalization)
    int n_cells = 0;
    ObcMethod method = ObcMethod::Diagonalization;
    bool conditioning_warning = false;
};

namespace detail {

/// Gauge exponent used to balance the skin effect before diagonalization:
/// the mean of the two middle exceptional-point mu values (the GBZ annulus
/// midpoint), zero when no EPs exist.
inline double balance_exponent(const ModelParams& p) {
    std::vector<double> mus = exceptional_mu_values(p);
    if (mus.empty()) return 0.0;
    std::sort(mus.begin(), mus.end());
    if (mus.size() == 1) return mus[0];
    const std::size_t h = mus.size() / 2;
    return 0.5 * (mus[h - 1] + mus[h]);
}

}  // namespace detail

/// Dense eigenvalues of the open-boundary Hamiltonian.  The matrix is first
/// balanced by the diagonal gauge similarity D = diag(e^{mu_hat * m}) per
/// cell, which removes the exponential eigenvector conditioning of the skin
/// effect without changing the spectrum; residuals are verified pairwise in
/// the balanced frame.
inline ObcSpectrum obc_spectrum(const ModelParams& p, int n_cells) {
    if (n_cells < 2) throw std::invalid_argument("obc_spectrum: n_cells < 2");
    if (n_cells > 200)
        throw std::invalid_argument("obc_spectrum: n_cells above the hard cap 200");

    const double mu_hat = detail::balance_exponent(p);
    const double up = std::exp(mu_hat), dn = std::exp(-mu_hat);

    const int n = 2 * n_cells;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    const auto R = [](int m) { return 2 * (m - 1); };
    const auto L = [](int m) { return 2 * (m - 1) + 1; };
    for (int m = 1; m <= n_cells; ++m) {
        h(L(m), R(m)) += Complex(0, -(p.eta + p.gamma));
        h(R(m), L(m)) += Complex(0, p.eta - p.gamma);
    }
    for (int m = 2; m <= n_cells; ++m) {
        h(R(m - 1), L(m)) += -p.delta1 * dn;
        h(L(m), R(m - 1)) += -p.delta1 * up;
        h(L(m - 1), R(m)) += -p.delta2 * dn;
        h(R(m), L(m - 1)) += -p.delta2 * up;
    }

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(h, true);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("obc_spectrum: eigensolver failed to converge");

    const double hnorm = h.norm();
    ObcSpectrum s;
    s.n_cells = n_cells;
    s.method = ObcMethod::Diagonalization;
    s.eigenvalues.resize(n);
    for (int i = 0; i < n; ++i) {
        const Complex lam = solver.eigenvalues()(i);
        const Eigen::VectorXcd v = solver.eigenvectors().col(i);
        const double resid = (h * v - lam * v).norm() / hnorm;
        if (resid > 1e-8)
            throw std::runtime_error("obc_spectrum: eigenpair residual above 1e-8");
        s.eigenvalues[static_cast<std::size_t>(i)] = lam;
    }
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end(),
              [](Complex x, Complex y) {
                  return x.real() != y.real() ? x.real() < y.real()
                                              : x.imag() < y.imag();
              });

    // Residual skin-effect dynamic range after balancing.
    std::vector<double> mus = exceptional_mu_values(p);
    double spread = 0.0;
    for (double m : mus) spread = std::max(spread, std::abs(m - mu_hat));
    if (spread * n > 25.0) s.conditioning_warning = true;
    return s;
}

// ---------------------------------------------------------------------------
// GBZ curves.
// ---------------------------------------------------------------------------

enum class GbzSource { WassersteinMin, RonkinMin, IntersectionTrace };

struct GbzCurve {
    std::vector<Complex> betas;
    GbzSource source = GbzSource::WassersteinMin;
    ModelParams params;
};

/// Circular GBZ at radius e^{-mu_gbz} (valid for delta2 = 0).
inline GbzCurve gbz_circle(const ModelParams& p, double mu_gbz, int n) {
    GbzCurve c;
    c.source = GbzSource::WassersteinMin;
    c.params = p;
    c.betas.resize(n);
    for (int j = 0; j < n; ++j)
        c.betas[j] = momentum_to_beta(two_pi * j / n, mu_gbz);
    return c;
}

/// For each mu, collect the qualifying (unambiguous) self-intersections of
/// both bands; their energies form the OBC arc point cloud and their beta
/// pairs sample the GBZ.  Empty results are allowed.
inline std::pair<ObcSpectrum, GbzCurve> trace_obc_via_intersections(
    const ModelParams& p, const std::vector<double>& mu_values, int n_k,
    unsigned jobs = 1) {
    std::vector<std::vector<IntersectionPoint>> per_mu(mu_values.size());
    const std::vector<double> eps = exceptional_mu_values(p);
    parallel_for(mu_values.size(), jobs, [&](std::size_t i) {
        const auto [a, b] = sample_band_loop(p, mu_values[i], n_k, eps);
        auto pts = self_intersections(p, a, b);
        if (a.closed_after == LoopClosure::TwoPi) {
            // The chiral partner band has its own crossings (mirror images).
            auto pts_b = self_intersections(p, b, a);
            pts.insert(pts.end(), pts_b.begin(), pts_b.end());
        }
        per_mu[i] = std::move(pts);
    });

    ObcSpectrum cloud;
    cloud.method = ObcMethod::IntersectionTrace;
    GbzCurve gbz;
    gbz.source = GbzSource::IntersectionTrace;
    gbz.params = p;
    for (const auto& pts : per_mu) {
        for (const auto& ip : pts) {
            if (!ip.qualifies_as_obc || ip.ambiguous) continue;
            cloud.eigenvalues.push_back(ip.energy);
            gbz.betas.push_back(ip.beta_pair.first);
            gbz.betas.push_back(ip.beta_pair.second);
        }
    }
    return {cloud, gbz};
}

/// Directed Hausdorff distance: the largest distance from a point of `from`
/// to its nearest point of `to`.
inline double directed_hausdorff(const std::vector<Complex>& from,
                                 const std::vector<Complex>& to) {
    if (from.empty() || to.empty())
        throw std::invalid_argument("directed_hausdorff: empty set");
    double worst = 0.0;
    for (const Complex& f : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const Complex& t : to) best = std::min(best, std::abs(f - t));
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace nhsd
