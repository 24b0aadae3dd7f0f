#pragma once

#include <array>
#include <optional>

#include "nhsd/model.hpp"

// Digital twin of the cavity spectroscopy: Green's-function transmission
// synthesis with a seeded detector-noise model, nonlinear least-squares
// inversion of traces back to complex eigenenergies, and the full
// (mu, k) scan pipeline producing fitted band loops.

namespace nhsd {

struct CavityParams {
    double t = 0.9;         // field retention per round trip, in (0, 1)
    double omega_fsr = 1.0; // free spectral range; detunings are in these units
    double kappa = 1.0;     // mirror coupling magnitude (overall scale only)

    void validate() const {
        if (!(t > 0.0 && t < 1.0))
            throw std::invalid_argument("CavityParams: t must be in (0,1)");
        if (!(omega_fsr > 0.0))
            throw std::invalid_argument("CavityParams: omega_fsr must be > 0");
    }
};

/// G(beta, dw) = sum_s 1/(1 - t exp(i(2 pi dw/Omega - E_s(beta)))).
/// Divergence (t e^{Im E_s} >= 1) is an error, not a NaN.
inline Complex greens_function(const ModelParams& p, const CavityParams& c,
                               Complex beta, double dw) {
    const auto [ep, em] = band_energies(p, beta);
    const double x = two_pi * dw / c.omega_fsr;
    Complex g(0, 0);
    for (const Complex es : {ep, em}) {
        if (c.t * std::exp(es.imag()) >= 1.0)
            throw DivergenceError("greens_function: t e^{Im E} >= 1, round-trip sum diverges");
        g += 1.0 / (1.0 - c.t * std::exp(Complex(0, 1) * (x - es)));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Trace synthesis.
// ---------------------------------------------------------------------------

struct NoiseSpec {
    bool enabled = false;
    double sigma_rel = 0.02;    // multiplicative Gaussian
    double floor_frac = 1e-4;   // additive floor, relative to the trace peak
    std::uint64_t seed = 0;
};

struct TransmissionTrace {
    Complex beta;
    std::vector<double> detunings;
    std::vector<double> intensities;
    std::optional<std::uint64_t> noise_seed;
};

/// Synthesize intensities s*|G|^2*(1+eps_mult) + eps_add on the given
/// detuning grid, s = kappa^2.  The Gaussian stream is derived from
/// (seed, stream_a, stream_b) so parallel scan order never changes results.
inline TransmissionTrace synth_transmission(const ModelParams& p, const CavityParams& c,
                                            Complex beta, std::vector<double> dw_grid,
                                            const NoiseSpec& noise,
                                            std::uint64_t stream_a = 0,
                                            std::uint64_t stream_b = 0) {
    c.validate();
    if (!std::is_sorted(dw_grid.begin(), dw_grid.end()))
        throw std::invalid_argument("synth_transmission: detuning grid not sorted");
    TransmissionTrace tr;
    tr.beta = beta;
    tr.detunings = std::move(dw_grid);
    tr.intensities.resize(tr.detunings.size());
    const double s = c.kappa * c.kappa;
    double peak = 0.0;
    for (std::size_t i = 0; i < tr.detunings.size(); ++i) {
        const double v = s * std::norm(greens_function(p, c, beta, tr.detunings[i]));
        tr.intensities[i] = v;
        peak = std::max(peak, v);
    }
    if (noise.enabled) {
        tr.noise_seed = noise.seed;
        GaussianStream rng(noise.seed, stream_a, stream_b);
        const double floor_sigma = noise.floor_frac * peak;
        for (double& v : tr.intensities) {
            v = v * (1.0 + noise.sigma_rel * rng.gaussian()) + floor_sigma * rng.gaussian();
            v = std::max(v, 0.0);
        }
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Model fitting.
// ---------------------------------------------------------------------------

struct PeakEstimate {
    int band = +1;                       // +1 / -1
    double re_E = 0.0;                   // wrapped to (-pi, pi]
    double im_E = 0.0;
    double fit_residual = 0.0;           // weighted rms
    std::array<double, 4> covariance_diag{0, 0, 0, 0};
};

enum class FitOutcome { Ok, MergedPeakFallback };

struct FitResult {
    PeakEstimate plus;
    PeakEstimate minus;
    FitOutcome outcome = FitOutcome::Ok;
};

struct FitInit {
    // Explicit initialization: (Re E+, Im E+, Re E-, Im E-, scale).
    std::array<double, 5> params{0, 0, 0, 0, 1};
};

namespace detail {

inline double two_band_intensity(double x, const double* q, double t) {
    const Complex gp = 1.0 / (1.0 - t * std::exp(Complex(0, 1) * (x - Complex(q[0], q[1]))));
    const Complex gm = 1.0 / (1.0 - t * std::exp(Complex(0, 1) * (x - Complex(q[2], q[3]))));
    return q[4] * std::norm(gp + gm);
}

inline double merged_intensity(double x, const double* q, double t) {
    const Complex g = 2.0 / (1.0 - t * std::exp(Complex(0, 1) * (x - Complex(q[0], q[1]))));
    return q[2] * std::norm(g);
}

/// Dampened Gauss-Newton (Levenberg-Marquardt) on weighted residuals
/// r_i = (model(x_i) - y_i) / w_i with a forward-difference Jacobian.
template <int NP, typename Model>
struct LmFit {
    std::array<double, NP> params;
    double rms = 0.0;
    bool converged = false;
    Eigen::Matrix<double, NP, NP> jtj;
};

template <int NP, typename Model>
LmFit<NP, Model> levenberg_marquardt(const std::vector<double>& x,
                                     const std::vector<double>& y,
                                     const std::vector<double>& w,
                                     std::array<double, NP> q, Model model,
                                     int max_iter = 300) {
    using Vec = Eigen::Matrix<double, NP, 1>;
    using Mat = Eigen::Matrix<double, NP, NP>;
    const std::size_t n = x.size();
    Eigen::VectorXd r(n), rt(n);
    Eigen::MatrixXd J(n, NP);

    const auto residuals = [&](const std::array<double, NP>& p, Eigen::VectorXd& out) {
        for (std::size_t i = 0; i < n; ++i)
            out(static_cast<Eigen::Index>(i)) = (model(x[i], p.data()) - y[i]) / w[i];
        return out.squaredNorm();
    };

    double cost = residuals(q, r);
    double lambda = 1e-3;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        for (int c = 0; c < NP; ++c) {
            std::array<double, NP> qh = q;
            const double h = 1e-7 * std::max(1.0, std::abs(q[c]));
            qh[c] += h;
            for (std::size_t i = 0; i < n; ++i)
                J(static_cast<Eigen::Index>(i), c) =
                    ((model(x[i], qh.data()) - y[i]) / w[i] - r(static_cast<Eigen::Index>(i))) / h;
        }
        const Mat jtj = (J.transpose() * J).eval();
        const Vec g = J.transpose() * r;
        if (g.template lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, cost)) {
            converged = true;
            break;
        }
        bool stepped = false;
        for (int tries = 0; tries < 25; ++tries) {
            Mat m = jtj;
            for (int c = 0; c < NP; ++c)
                m(c, c) += lambda * std::max(jtj(c, c), 1e-12);
            const Vec step = m.ldlt().solve(-g);
            std::array<double, NP> qn = q;
            for (int c = 0; c < NP; ++c) qn[c] += step(c);
            const double cn = residuals(qn, rt);
            if (std::isfinite(cn) && cn < cost) {
                const double drop = cost - cn;
                q = qn;
                r = rt;
                cost = cn;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (drop < 1e-15 * (1.0 + cost) ||
                    step.norm() < 1e-13 * (1.0 + Eigen::Map<Vec>(q.data()).norm()))
                    converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!stepped || converged) {
            converged = converged || stepped;
            break;
        }
    }
    LmFit<NP, Model> out{q, std::sqrt(cost / static_cast<double>(n)), converged, {}};
    out.jtj = (J.transpose() * J).eval();
    return out;
}

struct PeakSeed {
    double x = 0.0;       // resonance phase 2*pi*dw/Omega
    double im = 0.0;      // Im E seed from the half width
    double height = 0.0;
};

/// Peak picking + half-width linewidth seed on the phase-wrapped trace.
inline std::vector<PeakSeed> pick_peaks(const std::vector<double>& x,
                                        const std::vector<double>& I, double t) {
    const std::size_t n = I.size();
    std::vector<std::pair<double, std::size_t>> maxima;
    for (std::size_t i = 0; i < n; ++i) {
        const double l = I[(i + n - 1) % n], r = I[(i + 1) % n];
        if (I[i] >= l && I[i] > r) maxima.push_back({I[i], i});
    }
    std::sort(maxima.rbegin(), maxima.rend());
    std::vector<PeakSeed> seeds;
    for (const auto& [h, idx] : maxima) {
        if (seeds.size() >= 2) break;
        bool keep = true;
        for (const auto& s : seeds) {
            const double d = std::abs(wrap_pi(x[idx] - s.x));
            if (d < 0.05) keep = false;  // same resonance picked twice
        }
        if (!keep) continue;
        // circular half-width walk
        std::size_t j = 1;
        while (j < n / 2 && I[(idx + j) % n] > 0.5 * h) ++j;
        std::size_t jl = 1;
        while (jl < n / 2 && I[(idx + n - jl) % n] > 0.5 * h) ++jl;
        const double dx = std::abs(wrap_pi(x[1] - x[0]));
        const double hw = 0.5 * (j + jl) * dx;
        // (1 - t')/sqrt(t') = hw  =>  sqrt(t') = (sqrt(hw^2+4) - hw)/2
        const double st = 0.5 * (std::sqrt(hw * hw + 4.0) - hw);
        const double tp = std::clamp(st * st, 1e-6, 1.0 - 1e-9);
        seeds.push_back({x[idx], std::log(tp / t), h});
    }
    return seeds;
}

}  // namespace detail

/// Nonlinear least-squares fit of s*|G|^2 with unknowns (Re E+, Im E+,
/// Re E-, Im E-, scale).  Residuals are weighted by the local intensity
/// (multiplicative noise model).  Unresolvable overlapping peaks fall back to
/// a merged single-resonance fit instead of fabricating two energies;
/// non-convergence is an explicit error.
inline FitResult extract_eigenenergies(const TransmissionTrace& trace,
                                       const CavityParams& c,
                                       const std::optional<FitInit>& init = std::nullopt) {
    c.validate();
    const std::size_t n = trace.detunings.size();
    if (n < 16 || trace.intensities.size() != n)
        throw std::invalid_argument("extract_eigenenergies: bad trace");
    const double span = trace.detunings.back() - trace.detunings.front();
    if (span < c.omega_fsr * (1.0 - 2.0 / static_cast<double>(n)) * 0.999)
        throw std::invalid_argument("extract_eigenenergies: trace covers less than one FSR");

    std::vector<double> x(n), y(trace.intensities), w(n);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = two_pi * trace.detunings[i] / c.omega_fsr;
        peak = std::max(peak, y[i]);
    }
    for (std::size_t i = 0; i < n; ++i) w[i] = std::max(1e-3 * peak, y[i]);

    const double t = c.t;
    const auto model2 = [t](double xx, const double* q) {
        return detail::two_band_intensity(xx, q, t);
    };

    std::array<double, 5> q0{};
    bool merged = false;
    if (init) {
        q0 = init->params;
    } else {
        auto seeds = detail::pick_peaks(x, y, t);
        if (seeds.empty())
            throw std::runtime_error("extract_eigenenergies: no peaks found");
        if (seeds.size() == 1) {
            merged = true;
            q0 = {seeds[0].x, seeds[0].im, 0.0, 0.0, 0.0};
        } else {
            const double sep = std::abs(wrap_pi(seeds[0].x - seeds[1].x));
            const auto width = [t](const detail::PeakSeed& s) {
                const double tp = t * std::exp(s.im);
                return (1.0 - tp) / std::sqrt(tp);
            };
            if (sep < 0.5 * std::max(width(seeds[0]), width(seeds[1])))
                merged = true;
            const double s_est = seeds[0].height *
                                 std::pow(1.0 - t * std::exp(seeds[0].im), 2);
            q0 = {seeds[0].x, seeds[0].im, seeds[1].x, seeds[1].im, std::max(s_est, 1e-12)};
        }
    }

    if (merged) {
        const auto model1 = [t](double xx, const double* q) {
            return detail::merged_intensity(xx, q, t);
        };
        std::array<double, 3> m0{q0[0], q0[1],
                                 std::max(q0[4] > 0 ? q0[4] : peak / 4.0, 1e-12)};
        auto fit = detail::levenberg_marquardt<3>(x, y, w, m0, model1);
        if (!fit.converged)
            throw std::runtime_error("extract_eigenenergies: merged fit did not converge");
        FitResult r;
        r.outcome = FitOutcome::MergedPeakFallback;
        PeakEstimate e;
        e.re_E = wrap_pi(fit.params[0]);
        e.im_E = fit.params[1];
        e.fit_residual = fit.rms;
        r.plus = r.minus = e;
        r.plus.band = +1;
        r.minus.band = -1;
        return r;
    }

    auto best = detail::levenberg_marquardt<5>(x, y, w, q0, model2);
    // The linewidth seed fixes |Im E| only up to the walk resolution; retry
    // sign flips when the residual is clearly not at the noise floor.
    if (!init) {
        for (int mask = 1; mask < 4 && best.rms > 1e-8 * peak; ++mask) {
            std::array<double, 5> qs = q0;
            if (mask & 1) qs[1] = -qs[1];
            if (mask & 2) qs[3] = -qs[3];
            auto alt = detail::levenberg_marquardt<5>(x, y, w, qs, model2);
            if (alt.converged && alt.rms < best.rms) best = alt;
        }
    }
    if (!best.converged)
        throw std::runtime_error("extract_eigenenergies: fit did not converge");

    // Covariance diagonal of the four energy parameters from (J^T J)^{-1},
    // scaled by the residual variance.
    std::array<double, 4> cov{0, 0, 0, 0};
    {
        const auto pinv = best.jtj.fullPivLu();
        if (pinv.isInvertible()) {
            const Eigen::Matrix<double, 5, 5> ci = pinv.inverse();
            const double sigma2 =
                best.rms * best.rms * static_cast<double>(n) / std::max<double>(1.0, n - 5);
            for (int i = 0; i < 4; ++i) cov[static_cast<std::size_t>(i)] = ci(i, i) * sigma2;
        }
    }

    PeakEstimate a, b;
    a.re_E = wrap_pi(best.params[0]);
    a.im_E = best.params[1];
    b.re_E = wrap_pi(best.params[2]);
    b.im_E = best.params[3];
    a.fit_residual = b.fit_residual = best.rms;
    a.covariance_diag = {cov[0], cov[1], cov[0], cov[1]};
    b.covariance_diag = {cov[2], cov[3], cov[2], cov[3]};

    FitResult r;
    if (a.re_E >= b.re_E) {
        r.plus = a;
        r.minus = b;
    } else {
        r.plus = b;
        r.minus = a;
    }
    r.plus.band = +1;
    r.minus.band = -1;
    return r;
}

// ---------------------------------------------------------------------------
// Scan pipeline.
// ---------------------------------------------------------------------------

struct ScanPoint {
    double k = 0.0;
    Complex beta;
    bool ok = false;
    FitResult fit;
    std::string error;
    TransmissionTrace trace;
};

struct ScanRow {
    double mu = 0.0;
    std::vector<ScanPoint> points;
    BandLoop fitted_plus;
    BandLoop fitted_minus;
};

/// For each (mu, k): synthesize, fit, and assemble band loops from the fitted
/// energies.  Per-point failures are recorded as gaps and the scan continues.
/// RNG streams are keyed by (mu index, k index).
inline std::vector<ScanRow> scan_experiment(const ModelParams& p, const CavityParams& c,
                                            const std::vector<double>& mu_list, int n_k,
                                            const std::vector<double>& dw_grid,
                                            const NoiseSpec& noise, unsigned jobs = 1) {
    std::vector<ScanRow> rows(mu_list.size());
    std::vector<std::size_t> flat;  // (mu, k) pairs flattened for the pool
    for (std::size_t i = 0; i < mu_list.size(); ++i) {
        rows[i].mu = mu_list[i];
        rows[i].points.resize(static_cast<std::size_t>(n_k));
    }
    flat.resize(mu_list.size() * static_cast<std::size_t>(n_k));
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = i;

    parallel_for(flat.size(), jobs, [&](std::size_t idx) {
        const std::size_t i_mu = idx / static_cast<std::size_t>(n_k);
        const std::size_t i_k = idx % static_cast<std::size_t>(n_k);
        const double k = two_pi * static_cast<double>(i_k) / n_k;
        ScanPoint& pt = rows[i_mu].points[i_k];
        pt.k = k;
        pt.beta = momentum_to_beta(k, mu_list[i_mu]);
        try {
            pt.trace = synth_transmission(p, c, pt.beta, dw_grid, noise, i_mu, i_k);
            pt.fit = extract_eigenenergies(pt.trace, c);
            pt.ok = true;
        } catch (const std::exception& ex) {
            pt.ok = false;
            pt.error = ex.what();
        }
    });

    // Assemble fitted loops with nearest continuation across k.
    for (auto& row : rows) {
        BandLoop& lp = row.fitted_plus;
        BandLoop& lm = row.fitted_minus;
        lp.mu = lm.mu = row.mu;
        lp.band_index = +1;
        lm.band_index = -1;
        Complex prev;
        bool have_prev = false;
        for (const auto& pt : row.points) {
            if (!pt.ok || pt.fit.outcome != FitOutcome::Ok) continue;
            Complex e1(pt.fit.plus.re_E, pt.fit.plus.im_E);
            Complex e2(pt.fit.minus.re_E, pt.fit.minus.im_E);
            if (have_prev && std::abs(e2 - prev) < std::abs(e1 - prev)) std::swap(e1, e2);
            lp.samples.push_back({pt.k, pt.beta, e1});
            lm.samples.push_back({pt.k, pt.beta, e2});
            prev = e1;
            have_prev = true;
        }
        if (!lp.samples.empty()) {
            // closure flag by continuing to the first sample
            const Complex first = lp.samples.front().energy;
            const Complex last = lp.samples.back().energy;
            const Complex firstm = lm.samples.front().energy;
            lp.closed_after = lm.closed_after =
                (std::abs(last - firstm) < std::abs(last - first))
                    ? LoopClosure::FourPi
                    : LoopClosure::TwoPi;
        }
    }
    return rows;
}

/// Wasserstein metric from sampled (possibly non-uniform) fitted loops:
/// forward-difference |dE/dk|^2 accumulated over each band's closed path.
inline double wasserstein_from_loops(const BandLoop& a, const BandLoop& b) {
    const auto accumulate = [](const std::vector<Complex>& e, const std::vector<double>& k,
                               double period) {
        double acc = 0.0;
        const std::size_t n = e.size();
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jn = (j + 1) % n;
            double dk = (jn == 0) ? (period - k[j] + k[0]) : (k[jn] - k[j]);
            if (dk <= 0) continue;
            acc += std::norm(e[jn] - e[j]) / dk;
        }
        return acc / two_pi;
    };
    std::vector<Complex> ea, eb;
    std::vector<double> ka, kb;
    for (const auto& s : a.samples) { ea.push_back(s.energy); ka.push_back(s.k); }
    for (const auto& s : b.samples) { eb.push_back(s.energy); kb.push_back(s.k); }
    if (a.closed_after == LoopClosure::FourPi) {
        std::vector<Complex> e = ea;
        std::vector<double> k = ka;
        for (std::size_t j = 0; j < eb.size(); ++j) {
            e.push_back(eb[j]);
            k.push_back(kb[j] + two_pi);
        }
        return accumulate(e, k, 2.0 * two_pi);
    }
    return accumulate(ea, ka, two_pi) + accumulate(eb, kb, two_pi);
}

}  // namespace nhsd
