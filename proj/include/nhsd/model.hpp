#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "nhsd/common.hpp"

// Lattice model: a non-Hermitian two-band chain with reciprocal couplings
// delta1 (intercell), eta (intracell), a non-reciprocal intracell part gamma,
// and an optional long-range coupling delta2.  The Bloch matrix is
// off-diagonal, H(beta) = [[0, e1(beta)], [e2(beta), 0]], with
//   e1(beta) = -delta1/beta - delta2*beta + i(eta - gamma)
//   e2(beta) = -delta1*beta - delta2/beta - i(eta + gamma)
// and the non-Bloch factor beta = exp(-i k - mu) extends the Bloch phase to a
// circle of radius exp(-mu) in the complex plane.

namespace nhsd {

struct ModelParams {
    double delta1 = 0.0;  // radians
    double delta2 = 0.0;
    double eta = 0.0;
    double gamma = 0.0;

    /// Construct from values expressed in units of pi (the convention used by
    /// configuration files).
    static ModelParams from_pi_units(double d1, double d2, double et, double ga) {
        return {d1 * pi, d2 * pi, et * pi, ga * pi};
    }

    bool finite() const {
        return std::isfinite(delta1) && std::isfinite(delta2) &&
               std::isfinite(eta) && std::isfinite(gamma);
    }
};

/// Complex momentum K = k - i*mu, stored as its two real components.
struct ComplexMomentum {
    double k = 0.0;   // radians in [0, 2*pi)
    double mu = 0.0;  // dimensionless imaginary part
};

/// beta = exp(-i K) = exp(-i k - mu); |beta| = exp(-mu) exactly.
template <typename Scalar = double>
std::complex<Scalar> momentum_to_beta(Scalar k, Scalar mu) {
    return std::polar(std::exp(-mu), -k);
}

inline Complex momentum_to_beta(const ComplexMomentum& K) {
    return momentum_to_beta(K.k, K.mu);
}

/// Off-diagonal entries of the Bloch matrix.
struct BlochMatrix {
    Complex e1;  // upper off-diagonal
    Complex e2;  // lower off-diagonal

    Eigen::Matrix2cd matrix() const {
        Eigen::Matrix2cd h;
        h << Complex(0, 0), e1, e2, Complex(0, 0);
        return h;
    }
};

template <typename Scalar = double>
std::complex<Scalar> bloch_e1(const ModelParams& p, std::complex<Scalar> beta) {
    return -p.delta1 / beta - p.delta2 * beta +
           std::complex<Scalar>(0, p.eta - p.gamma);
}

template <typename Scalar = double>
std::complex<Scalar> bloch_e2(const ModelParams& p, std::complex<Scalar> beta) {
    return -p.delta1 * beta - p.delta2 / beta -
           std::complex<Scalar>(0, p.eta + p.gamma);
}

inline BlochMatrix bloch_matrix(const ModelParams& p, Complex beta) {
    if (beta == Complex(0, 0))
        throw std::domain_error("bloch_matrix: beta = 0 (beta^{-1} singular)");
    return {bloch_e1(p, beta), bloch_e2(p, beta)};
}

/// The two eigenvalues +-sqrt(e1*e2) of the off-diagonal Bloch matrix.
/// The principal square root is returned first.
inline std::pair<Complex, Complex> band_energies(const ModelParams& p, Complex beta) {
    const BlochMatrix h = bloch_matrix(p, beta);
    const Complex root = std::sqrt(h.e1 * h.e2);
    return {root, -root};
}

// ---------------------------------------------------------------------------
// Band loops: branch-continuous samplings of one band over a full k period.
// ---------------------------------------------------------------------------

enum class LoopClosure { TwoPi, FourPi };

struct BandSample {
    double k;
    Complex beta;
    Complex energy;
};

struct BandLoop {
    double mu = 0.0;
    std::vector<BandSample> samples;  // strictly increasing k
    int band_index = +1;              // +1 or -1
    LoopClosure closed_after = LoopClosure::TwoPi;

    std::size_t size() const { return samples.size(); }
    double dk() const { return two_pi / static_cast<double>(samples.size()); }
};

/// Concatenate a 4*pi-closed loop pair into the single closed polyline it
/// represents; for 2*pi closure returns just the requested band.
inline std::vector<Complex> loop_polyline(const BandLoop& a, const BandLoop& b) {
    std::vector<Complex> e;
    if (a.closed_after == LoopClosure::FourPi) {
        e.reserve(a.size() + b.size());
        for (const auto& s : a.samples) e.push_back(s.energy);
        for (const auto& s : b.samples) e.push_back(s.energy);
    } else {
        e.reserve(a.size());
        for (const auto& s : a.samples) e.push_back(s.energy);
    }
    return e;
}

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace detail

/// Sample both bands over k in [0, 2*pi) at fixed mu with branch continuity
/// enforced by nearest continuation.  If the two sqrt branches exchange after
/// one period the pair is flagged as closing only after 4*pi.
///
/// ep_radii: list of mu values of known exceptional points; continuity-bound
/// violations are tolerated only when mu lies within `ep_window` of one of
/// them, otherwise a ContinuityError carrying the offending k is thrown.
inline std::pair<BandLoop, BandLoop> sample_band_loop(
    const ModelParams& p, double mu, int n_k,
    const std::vector<double>& ep_radii = {}, double ep_window = 0.02) {
    if (n_k < 16) throw std::invalid_argument("sample_band_loop: n_k < 16");

    BandLoop plus, minus;
    plus.mu = minus.mu = mu;
    plus.band_index = +1;
    minus.band_index = -1;
    plus.samples.resize(n_k);
    minus.samples.resize(n_k);

    Complex prev;
    for (int j = 0; j < n_k; ++j) {
        const double k = two_pi * j / n_k;
        const Complex beta = momentum_to_beta(k, mu);
        const Complex root = std::sqrt(bloch_e1(p, beta) * bloch_e2(p, beta));
        Complex e = root;
        if (j > 0 && std::abs(-root - prev) < std::abs(root - prev)) e = -root;
        plus.samples[j] = {k, beta, e};
        minus.samples[j] = {k, beta, -e};
        prev = e;
    }

    // Closure: continue one more step to k = 2*pi and see which branch of the
    // starting point it lands on.
    {
        const Complex beta0 = momentum_to_beta(0.0, mu);
        const Complex root0 = std::sqrt(bloch_e1(p, beta0) * bloch_e2(p, beta0));
        Complex next = root0;
        if (std::abs(-root0 - prev) < std::abs(root0 - prev)) next = -root0;
        const bool swapped = std::abs(next - plus.samples.front().energy) >
                             std::abs(next - minus.samples.front().energy);
        plus.closed_after = minus.closed_after =
            swapped ? LoopClosure::FourPi : LoopClosure::TwoPi;
    }

    // Continuity check: adjacent gaps below 10x the median adjacent gap,
    // except near declared EP radii where the bands may pinch.
    std::vector<double> gaps(n_k);
    for (int j = 0; j < n_k; ++j) {
        const Complex a = plus.samples[j].energy;
        const Complex b = (j + 1 < n_k)
                              ? plus.samples[j + 1].energy
                              : (plus.closed_after == LoopClosure::FourPi
                                     ? minus.samples[0].energy
                                     : plus.samples[0].energy);
        gaps[j] = std::abs(b - a);
    }
    const double bound = 10.0 * detail::median_of(gaps);
    bool near_ep = false;
    for (double m : ep_radii)
        if (std::abs(mu - m) <= ep_window) near_ep = true;
    if (!near_ep && bound > 0) {
        for (int j = 0; j < n_k; ++j) {
            if (gaps[j] > bound)
                throw ContinuityError("sample_band_loop: branch continuity violated",
                                      plus.samples[j].k);
        }
    }
    return {plus, minus};
}

// ---------------------------------------------------------------------------
// Real-space open-boundary Hamiltonian.
// ---------------------------------------------------------------------------

/// Build the open-boundary Hamiltonian of n_cells unit cells in the site
/// ordering (R,1),(L,1),(R,2),(L,2),...  Nonzeros follow the second-quantized
/// form directly: intracell entries -i(eta+gamma) (row L, col R) and
/// +i(eta-gamma) (row R, col L); bond amplitudes -delta1 between (R,m-1) and
/// (L,m) and -delta2 between (L,m-1) and (R,m), each with its Hermitian
/// partner.
inline Eigen::MatrixXcd build_obc_hamiltonian(const ModelParams& p, int n_cells) {
    if (n_cells < 2) throw std::invalid_argument("build_obc_hamiltonian: n_cells < 2");
    const int n = 2 * n_cells;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    const auto R = [](int m) { return 2 * (m - 1); };
    const auto L = [](int m) { return 2 * (m - 1) + 1; };
    for (int m = 1; m <= n_cells; ++m) {
        h(L(m), R(m)) += Complex(0, -(p.eta + p.gamma));
        h(R(m), L(m)) += Complex(0, p.eta - p.gamma);
    }
    for (int m = 2; m <= n_cells; ++m) {
        h(R(m - 1), L(m)) += -p.delta1;
        h(L(m), R(m - 1)) += -p.delta1;
        h(L(m - 1), R(m)) += -p.delta2;
        h(R(m), L(m - 1)) += -p.delta2;
    }
    return h;
}

/// Same lattice with periodic closure added (ring variant used by the
/// Fourier-consistency tests).
inline Eigen::MatrixXcd build_ring_hamiltonian(const ModelParams& p, int n_cells) {
    Eigen::MatrixXcd h = build_obc_hamiltonian(p, n_cells);
    const auto R = [](int m) { return 2 * (m - 1); };
    const auto L = [](int m) { return 2 * (m - 1) + 1; };
    h(R(n_cells), L(1)) += -p.delta1;
    h(L(1), R(n_cells)) += -p.delta1;
    h(L(n_cells), R(1)) += -p.delta2;
    h(R(1), L(n_cells)) += -p.delta2;
    return h;
}

// ---------------------------------------------------------------------------
// Non-Bloch basis vectors.
// ---------------------------------------------------------------------------

enum class Side { Left, Right };

struct NonBlochVector {
    Complex beta;
    int n_sites = 0;
    Side side = Side::Left;
    Eigen::VectorXcd amplitudes;  // beta^{-m}/sqrt(N) (left) or beta^{m}/sqrt(N)
};

/// Left vectors carry beta^{-m}/sqrt(N), right vectors beta^{m}/sqrt(N),
/// m = 1..N.  The left/right pairing <beta_L|beta'_R> is the plain bilinear
/// sum (the left amplitudes enter unconjugated).
inline NonBlochVector nonbloch_basis(Complex beta, int n_sites, Side side) {
    if (beta == Complex(0, 0)) throw std::domain_error("nonbloch_basis: beta = 0");
    if (n_sites < 1) throw std::invalid_argument("nonbloch_basis: n_sites < 1");
    NonBlochVector v;
    v.beta = beta;
    v.n_sites = n_sites;
    v.side = side;
    v.amplitudes.resize(n_sites);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_sites));
    const Complex step = (side == Side::Left) ? Complex(1.0, 0.0) / beta : beta;
    Complex pw = step;
    for (int m = 0; m < n_sites; ++m, pw *= step) v.amplitudes[m] = pw * norm;
    return v;
}

/// Biorthogonal pairing <a_L | b_R> = sum_m a_m b_m (bilinear, no conjugation).
inline Complex nonbloch_pairing(const NonBlochVector& left, const NonBlochVector& right) {
    if (left.n_sites != right.n_sites)
        throw std::invalid_argument("nonbloch_pairing: size mismatch");
    Complex acc(0, 0);
    for (int m = 0; m < left.n_sites; ++m)
        acc += left.amplitudes[m] * right.amplitudes[m];
    return acc;
}

}  // namespace nhsd
