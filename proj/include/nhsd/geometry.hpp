#pragma once

#include <optional>
#include <span>

#include "nhsd/model.hpp"

// Spectral geometry of band loops: algebraic loop area, the Wasserstein
// metric by two independent routes, spectral winding numbers, closed-form
// exceptional points, and self-intersection detection with the open-boundary
// qualification test.

namespace nhsd {

// ---------------------------------------------------------------------------
// Algebraic (winding-weighted) loop area.
// ---------------------------------------------------------------------------

/// (1/2) Im of the closed contour sum of conj(E) dE over a polygon.  For a
/// self-intersecting polyline this is the winding-weighted area by Green's
/// theorem; a CCW unit circle gives +pi.
inline double polyline_area(std::span<const Complex> e) {
    double acc = 0.0;
    const std::size_t n = e.size();
    for (std::size_t j = 0; j < n; ++j) {
        const Complex d = e[(j + 1) % n] - e[j];
        acc += std::imag(std::conj(e[j]) * d);
    }
    return 0.5 * acc;
}

/// Area of a single 2*pi-closed band loop. A 4*pi loop is open over one
/// period and is rejected; use spectral_area on the pair instead.
inline double algebraic_area(const BandLoop& loop) {
    if (loop.closed_after != LoopClosure::TwoPi)
        throw std::invalid_argument(
            "algebraic_area: loop closes only after 4*pi; pass the pair");
    std::vector<Complex> e;
    e.reserve(loop.size());
    for (const auto& s : loop.samples) e.push_back(s.energy);
    return polyline_area(e);
}

struct SpectralAreaReport {
    double mu = 0.0;
    double algebraic_area = 0.0;
    std::pair<double, double> per_band_areas{0.0, 0.0};
};

/// Total algebraic area enclosed by the eigenspectrum at fixed mu.  For a
/// 4*pi-closed pair the bands form one curve; per-band entries are then the
/// line-integral contributions of each band's 2*pi segment (they still sum to
/// the total).
inline SpectralAreaReport spectral_area(const BandLoop& a, const BandLoop& b) {
    SpectralAreaReport r;
    r.mu = a.mu;
    if (a.closed_after == LoopClosure::FourPi) {
        const std::vector<Complex> e = loop_polyline(a, b);
        const std::size_t n = a.size();
        double acc_a = 0.0, acc_b = 0.0;
        for (std::size_t j = 0; j < e.size(); ++j) {
            const Complex d = e[(j + 1) % e.size()] - e[j];
            (j < n ? acc_a : acc_b) += 0.5 * std::imag(std::conj(e[j]) * d);
        }
        r.per_band_areas = {acc_a, acc_b};
        r.algebraic_area = acc_a + acc_b;
    } else {
        r.per_band_areas = {algebraic_area(a), algebraic_area(b)};
        r.algebraic_area = r.per_band_areas.first + r.per_band_areas.second;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Exceptional points.
// ---------------------------------------------------------------------------

enum class EpFactor { E1, E2 };

struct ExceptionalPointReport {
    EpFactor which_factor = EpFactor::E1;
    Complex beta;
    double mu = 0.0;
    double k = 0.0;
};

namespace detail {

/// Roots of a*z^2 + b*z + c = 0 with complex coefficients, cancellation-safe.
inline std::vector<Complex> quadratic_roots(Complex a, Complex b, Complex c) {
    if (a == Complex(0, 0)) {
        if (b == Complex(0, 0)) return {};
        return {-c / b};
    }
    const Complex disc = std::sqrt(b * b - 4.0 * a * c);
    const Complex q = (std::real(std::conj(b) * disc) >= 0) ? -0.5 * (b + disc)
                                                            : -0.5 * (b - disc);
    std::vector<Complex> roots;
    if (q != Complex(0, 0)) {
        roots.push_back(q / a);
        roots.push_back(c / q);
    } else {
        roots.push_back(Complex(0, 0));
        roots.push_back(-b / a);
    }
    return roots;
}

}  // namespace detail

/// Solve e1(beta) = 0 and e2(beta) = 0 as polynomial root problems.  After
/// clearing beta^{-1}:
///   e1 = 0:  delta2*b^2 - i(eta-gamma)*b + delta1 = 0
///   e2 = 0:  delta1*b^2 + i(eta+gamma)*b + delta2 = 0
/// Each root reports mu = -ln|beta| and k = -arg(beta) mod 2*pi.
inline std::vector<ExceptionalPointReport> find_exceptional_mu(const ModelParams& p) {
    const bool e1_degenerate =
        p.delta1 == 0 && p.delta2 == 0 && p.eta == p.gamma;
    const bool e2_degenerate =
        p.delta1 == 0 && p.delta2 == 0 && p.eta == -p.gamma;
    if (e1_degenerate || e2_degenerate)
        throw std::domain_error("find_exceptional_mu: identically zero band factor");

    std::vector<ExceptionalPointReport> out;
    const auto add = [&](EpFactor f, const std::vector<Complex>& roots) {
        for (const Complex& b : roots) {
            if (std::abs(b) < 1e-14) continue;  // beta = 0 is not a momentum
            ExceptionalPointReport r;
            r.which_factor = f;
            r.beta = b;
            r.mu = -std::log(std::abs(b));
            r.k = wrap_2pi(-std::arg(b));
            out.push_back(r);
        }
    };
    add(EpFactor::E1, detail::quadratic_roots(p.delta2, Complex(0, -(p.eta - p.gamma)),
                                              Complex(p.delta1, 0)));
    add(EpFactor::E2, detail::quadratic_roots(p.delta1, Complex(0, p.eta + p.gamma),
                                              Complex(p.delta2, 0)));
    return out;
}

inline std::vector<double> exceptional_mu_values(const ModelParams& p) {
    std::vector<double> mus;
    try {
        for (const auto& r : find_exceptional_mu(p)) mus.push_back(r.mu);
    } catch (const std::domain_error&) {
    }
    return mus;
}

// ---------------------------------------------------------------------------
// Spectral winding number.
// ---------------------------------------------------------------------------

/// Accumulated phase of det[H(beta(k)) - E] = (E+ - e)(E- - e) over one k
/// period, divided by 2*pi and rounded to the nearest integer.  The loop pair
/// provides the samples; the determinant product is single-valued in k even
/// when the branches exchange.
inline int winding_number(const BandLoop& a, const BandLoop& b, Complex e_ref,
                          double distance_tol = 1e-6, double residue_tol = 0.05) {
    const std::size_t n = a.size();
    if (n == 0 || b.size() != n)
        throw std::invalid_argument("winding_number: inconsistent loop pair");
    for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(a.samples[j].energy - e_ref) < distance_tol ||
            std::abs(b.samples[j].energy - e_ref) < distance_tol)
            throw std::domain_error("winding_number: reference too close to spectrum");
    }
    double total = 0.0;
    double prev = std::arg((a.samples[0].energy - e_ref) * (b.samples[0].energy - e_ref));
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t i = j % n;
        const double cur =
            std::arg((a.samples[i].energy - e_ref) * (b.samples[i].energy - e_ref));
        total += wrap_pi(cur - prev);
        prev = cur;
    }
    const double w = total / two_pi;
    const double rounded = std::round(w);
    if (std::abs(w - rounded) > residue_tol)
        throw std::runtime_error("winding_number: non-integer phase residue");
    return static_cast<int>(rounded);
}

// ---------------------------------------------------------------------------
// Wasserstein metric.
// ---------------------------------------------------------------------------

enum class WassersteinMethod { Integral, AreaDerivative };

namespace detail {

inline double gw_from_samples(const std::vector<Complex>& e, double h) {
    const std::size_t n = e.size();
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Complex d = e[(j + 1) % n] - e[(j + n - 1) % n];
        acc += std::norm(d / (2.0 * h));
    }
    return acc * h / two_pi;
}

}  // namespace detail

/// Sum over bands of the k average of |dE/dk|^2 (method Integral, central
/// differences over the sampled loops), or the symmetric mu derivative of the
/// algebraic spectral area divided by 2*pi (method AreaDerivative).  Both
/// routes agree away from exceptional-point radii, where the metric diverges
/// and evaluation is refused.
inline double wasserstein_metric(const ModelParams& p, double mu, int n_k,
                                 WassersteinMethod method,
                                 double fd_step = 1e-4) {
    const std::vector<double> eps = exceptional_mu_values(p);
    for (double m : eps) {
        if (std::abs(mu - m) < 1e-10)
            throw SingularityError("wasserstein_metric: mu at an EP radius", m);
    }
    if (method == WassersteinMethod::Integral) {
        const auto [a, b] = sample_band_loop(p, mu, n_k, eps);
        const double h = two_pi / n_k;
        if (a.closed_after == LoopClosure::FourPi) {
            return detail::gw_from_samples(loop_polyline(a, b), h);
        }
        std::vector<Complex> ea, eb;
        for (const auto& s : a.samples) ea.push_back(s.energy);
        for (const auto& s : b.samples) eb.push_back(s.energy);
        return detail::gw_from_samples(ea, h) + detail::gw_from_samples(eb, h);
    }
    const auto area_at = [&](double m) {
        const auto [a, b] = sample_band_loop(p, m, n_k, eps);
        return spectral_area(a, b).algebraic_area;
    };
    return (area_at(mu + fd_step) - area_at(mu - fd_step)) / (2.0 * fd_step * two_pi);
}

// ---------------------------------------------------------------------------
// Self-intersections of band loops.
// ---------------------------------------------------------------------------

struct IntersectionPoint {
    Complex energy;
    std::pair<double, double> k_pair{0.0, 0.0};  // on the continued path (may exceed 2*pi)
    std::pair<Complex, Complex> beta_pair;
    bool qualifies_as_obc = false;
    bool ambiguous = false;  // near-tangential contact or unresolvable sectors
    double mu = 0.0;
    double contact_angle_deg = 0.0;
    std::pair<int, int> side_windings{0, 0};
};

namespace detail {

/// Band energy on the branch continued along the sampled polyline.  The
/// parameter k lives on the concatenated path: for a 4*pi pair, k in
/// [2*pi, 4*pi) addresses the partner band's copy.
class ContinuedBand {
public:
    ContinuedBand(const ModelParams& p, const BandLoop& a, const BandLoop& b)
        : p_(p), mu_(a.mu), energies_(loop_polyline(a, b)) {
        period_ = (a.closed_after == LoopClosure::FourPi) ? 2.0 * two_pi : two_pi;
    }

    double period() const { return period_; }
    const std::vector<Complex>& samples() const { return energies_; }

    Complex operator()(double k) const {
        const double kw = wrap_2pi(k);
        const Complex beta = momentum_to_beta(kw, mu_);
        const Complex root = std::sqrt(bloch_e1(p_, beta) * bloch_e2(p_, beta));
        const double kp = k - period_ * std::floor(k / period_);
        const std::size_t n = energies_.size();
        std::size_t idx = static_cast<std::size_t>(kp / period_ * n);
        if (idx >= n) idx = n - 1;
        const Complex ref = energies_[idx];
        return (std::abs(root - ref) <= std::abs(-root - ref)) ? root : -root;
    }

    Complex tangent(double k, double h = 1e-6) const {
        return ((*this)(k + h) - (*this)(k - h)) / (2.0 * h);
    }

private:
    const ModelParams& p_;
    double mu_;
    double period_;
    std::vector<Complex> energies_;
};

struct SegmentHit {
    std::size_t i, j;
    double s, t;
};

/// Parameters (s, t) of the crossing of segments p1->p2, p3->p4, if any.
inline std::optional<std::pair<double, double>> segment_intersection(
    Complex p1, Complex p2, Complex p3, Complex p4) {
    const Complex d1 = p2 - p1, d2 = p4 - p3;
    const double den = d1.real() * d2.imag() - d1.imag() * d2.real();
    if (den == 0.0) return std::nullopt;
    const Complex r = p3 - p1;
    const double s = (r.real() * d2.imag() - r.imag() * d2.real()) / den;
    const double t = (r.real() * d1.imag() - r.imag() * d1.real()) / den;
    if (s < 0.0 || s >= 1.0 || t < 0.0 || t >= 1.0) return std::nullopt;
    return std::make_pair(s, t);
}

/// All transversal segment-pair hits of the closed polyline, adjacent pairs
/// excluded, with a bounding-box prefilter.
inline std::vector<SegmentHit> polyline_self_hits(const std::vector<Complex>& e) {
    const std::size_t n = e.size();
    std::vector<SegmentHit> hits;
    if (n < 4) return hits;
    for (std::size_t i = 0; i + 2 < n; ++i) {
        const Complex a1 = e[i], a2 = e[(i + 1) % n];
        const double alox = std::min(a1.real(), a2.real()), ahix = std::max(a1.real(), a2.real());
        const double aloy = std::min(a1.imag(), a2.imag()), ahiy = std::max(a1.imag(), a2.imag());
        const std::size_t jmax = (i == 0) ? n - 1 : n;  // skip the wrap-adjacent pair
        for (std::size_t j = i + 2; j < jmax; ++j) {
            const Complex b1 = e[j], b2 = e[(j + 1) % n];
            if (std::max(b1.real(), b2.real()) < alox || std::min(b1.real(), b2.real()) > ahix ||
                std::max(b1.imag(), b2.imag()) < aloy || std::min(b1.imag(), b2.imag()) > ahiy)
                continue;
            if (auto st = segment_intersection(a1, a2, b1, b2))
                hits.push_back({i, j, st->first, st->second});
        }
    }
    return hits;
}

/// Winding of a closed polygon around z (point-in-region test).
inline int polygon_winding(std::span<const Complex> poly, Complex z) {
    double total = 0.0;
    const std::size_t n = poly.size();
    if (n < 3) return 0;
    double prev = std::arg(poly[0] - z);
    for (std::size_t j = 1; j <= n; ++j) {
        const double cur = std::arg(poly[j % n] - z);
        total += wrap_pi(cur - prev);
        prev = cur;
    }
    return static_cast<int>(std::lround(total / two_pi));
}

}  // namespace detail

/// Detect all transversal self-crossings of the band loop (for a 4*pi pair,
/// of the single concatenated curve), refine each by shrinking-bracket
/// re-intersection until |E(k_a) - E(k_b)| < energy_tol, and classify the
/// open-boundary qualification: the two sub-loops adjoined at the crossing
/// must both enclose a region of nonzero spectral winding.  Interior points
/// are sampled in the local tangent sectors at the crossing; near-tangential
/// contacts (angle < 1 degree) are flagged ambiguous, never silently dropped.
inline std::vector<IntersectionPoint> self_intersections(
    const ModelParams& p, const BandLoop& a, const BandLoop& b,
    double energy_tol = 1e-9) {
    const detail::ContinuedBand band(p, a, b);
    const std::vector<Complex>& e = band.samples();
    const std::size_t n = e.size();
    const double dk = band.period() / static_cast<double>(n);

    std::vector<IntersectionPoint> out;
    for (const auto& hit : detail::polyline_self_hits(e)) {
        // --- refine on the two k brackets
        double ka0 = hit.i * dk, ka1 = (hit.i + 1) * dk;
        double kb0 = hit.j * dk, kb1 = (hit.j + 1) * dk;
        double ka = ka0 + hit.s * dk, kb = kb0 + hit.t * dk;
        for (int it = 0; it < 60; ++it) {
            const Complex ea0 = band(ka0), ea1 = band(ka1);
            const Complex eb0 = band(kb0), eb1 = band(kb1);
            const auto st = detail::segment_intersection(ea0, ea1, eb0, eb1);
            double s = 0.5, t = 0.5;
            if (st) {
                s = std::clamp(st->first, 0.0, 1.0);
                t = std::clamp(st->second, 0.0, 1.0);
            }
            ka = ka0 + s * (ka1 - ka0);
            kb = kb0 + t * (kb1 - kb0);
            const double wa = 0.25 * (ka1 - ka0), wb = 0.25 * (kb1 - kb0);
            ka0 = ka - wa; ka1 = ka + wa;
            kb0 = kb - wb; kb1 = kb + wb;
            if (std::abs(band(ka) - band(kb)) < energy_tol) break;
        }
        IntersectionPoint ip;
        ip.mu = a.mu;
        ip.k_pair = {ka, kb};
        ip.energy = 0.5 * (band(ka) + band(kb));
        ip.beta_pair = {momentum_to_beta(wrap_2pi(ka), a.mu),
                        momentum_to_beta(wrap_2pi(kb), a.mu)};

        // --- contact angle between the two branches
        const Complex t1 = band.tangent(ka), t2 = band.tangent(kb);
        const Complex u1 = t1 / std::abs(t1), u2 = t2 / std::abs(t2);
        const double c = std::min(1.0, std::abs(std::real(u1 * std::conj(u2))));
        ip.contact_angle_deg = std::acos(c) * 180.0 / pi;
        if (ip.contact_angle_deg < 1.0) {
            ip.ambiguous = true;
            out.push_back(ip);
            continue;
        }

        // --- sector bisector probes around the crossing
        std::array<Complex, 4> bis;
        {
            const std::array<std::pair<Complex, Complex>, 4> pairs{
                std::pair{u1, u2}, std::pair{u2, -u1},
                std::pair{-u1, -u2}, std::pair{-u2, u1}};
            for (int q = 0; q < 4; ++q) {
                Complex v = pairs[q].first + pairs[q].second;
                if (std::abs(v) < 1e-9) v = Complex(0, 1) * pairs[q].first;
                bis[q] = v / std::abs(v);
            }
        }

        // --- the two sub-loops adjoined at the crossing
        const auto idx_of = [&](double k) {
            return static_cast<std::size_t>(
                std::clamp(k / dk, 0.0, static_cast<double>(n - 1)));
        };
        const std::size_t ia = idx_of(ka), ib = idx_of(kb);
        std::vector<Complex> sub_a{ip.energy};
        for (std::size_t j = ia + 1; j <= ib; ++j) sub_a.push_back(e[j]);
        sub_a.push_back(ip.energy);
        std::vector<Complex> sub_b{ip.energy};
        for (std::size_t j = (ib + 1) % n; j != (ia + 1) % n; j = (j + 1) % n)
            sub_b.push_back(e[j]);
        sub_b.push_back(ip.energy);

        // Identify the locally interior sector of whichever sub-loop is clean
        // (exactly one probe inside); its opposite sector belongs to the other
        // sub-loop at a transversal double point.
        bool decided = false;
        for (double eps : {1e-3, 3e-3, 3e-4}) {
            const double scale = eps * std::max(1.0, std::abs(ip.energy));
            std::array<Complex, 4> probes;
            for (int q = 0; q < 4; ++q) probes[q] = ip.energy + scale * bis[q];
            int in_a = 0, in_b = 0, first_a = -1, first_b = -1;
            for (int q = 0; q < 4; ++q) {
                if (detail::polygon_winding(sub_a, probes[q]) != 0) {
                    ++in_a;
                    if (first_a < 0) first_a = q;
                }
                if (detail::polygon_winding(sub_b, probes[q]) != 0) {
                    ++in_b;
                    if (first_b < 0) first_b = q;
                }
            }
            int sector = -1;
            if (in_a == 1) sector = first_a;
            else if (in_b == 1) sector = first_b;
            if (sector < 0) continue;
            try {
                const int w1 = winding_number(a, b, probes[sector]);
                const int w2 = winding_number(a, b, probes[(sector + 2) % 4]);
                ip.side_windings = {w1, w2};
                ip.qualifies_as_obc = (w1 != 0) && (w2 != 0);
                decided = true;
            } catch (const std::exception&) {
                continue;  // probe fell on the curve; retry with another scale
            }
            break;
        }
        if (!decided) ip.ambiguous = true;
        out.push_back(ip);
    }
    return out;
}

}  // namespace nhsd
