#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <limits>
#include <unsupported/Eigen/FFT>

#include "nhsd/common.hpp"

// Phase-only hologram encoding of a left non-Bloch projector and its
// scalar-diffraction validation.  The target field
//   E_o(x,y) = (1/sqrt(N)) sum_{m=1..N} beta^{-m} e^{-i m phi(x,y)}
// is encoded into T = exp(i M mod[F + 2 pi x / Lambda, 2 pi]) with
//   M = 1 + (1/pi) sinc^{-1}(C/|E_o|),  F = -Arg E_o - pi M,
// so that the first diffraction order of E_o * T is a uniform plane wave of
// amplitude C.  The oracle measures exactly that conversion through an FFT.

namespace nhsd {

struct FieldRaster {
    int width = 0, height = 0;
    double center_x = 0.0, center_y = 0.0;
    Eigen::MatrixXcd values;  // (height, width)
};

struct HologramRaster {
    int width = 0, height = 0;
    Eigen::MatrixXd phase;  // in [0, 2*pi)
    double grating_period = 8.0;
    double clip_constant = 0.0;
};

/// Pixelwise evaluation of the target sum via the closed geometric form
/// q (1 - q^N) / (1 - q), q = (beta e^{i phi})^{-1}.  Pixels within one pixel
/// of the vortex center are set to zero.
inline FieldRaster target_field(Complex beta, int n_modes, int width, int height,
                                double center_x = -1.0, double center_y = -1.0) {
    if (n_modes < 1) throw std::invalid_argument("target_field: n_modes < 1");
    if (beta == Complex(0, 0)) throw std::domain_error("target_field: beta = 0");
    FieldRaster f;
    f.width = width;
    f.height = height;
    f.center_x = center_x >= 0 ? center_x : width / 2.0;
    f.center_y = center_y >= 0 ? center_y : height / 2.0;
    f.values.resize(height, width);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_modes));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x - f.center_x, dy = y - f.center_y;
            if (dx * dx + dy * dy < 1.0) {
                f.values(y, x) = Complex(0, 0);
                continue;
            }
            const double phi = std::atan2(dy, dx);
            const Complex q = 1.0 / (beta * std::polar(1.0, phi));
            const Complex qn = std::pow(q, n_modes);
            f.values(y, x) = (std::abs(q - 1.0) < 1e-13)
                                 ? Complex(n_modes, 0) * norm
                                 : q * (1.0 - qn) / (1.0 - q) * norm;
        }
    }
    return f;
}

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

/// Inverse of sin(z)/z on the branch z in [-pi, 0]; bisection to 1e-12.
inline double inverse_sinc(double a) {
    if (a < 0.0 || a > 1.0) throw std::domain_error("inverse_sinc: argument outside [0,1]");
    double lo = -pi, hi = 0.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (sinc(mid) < a ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct ModulationMaps {
    Eigen::MatrixXd M;  // in [0, 1]
    Eigen::MatrixXd F;  // wrapped to [0, 2*pi)
};

/// Clip-constant default: 0.9 x the minimum nonzero field modulus, keeping
/// the inverse-sinc argument within its branch everywhere.
inline double default_clip(const FieldRaster& field) {
    double lo = std::numeric_limits<double>::infinity();
    for (int y = 0; y < field.height; ++y)
        for (int x = 0; x < field.width; ++x) {
            const double a = std::abs(field.values(y, x));
            if (a > 0.0) lo = std::min(lo, a);
        }
    if (!std::isfinite(lo)) throw std::domain_error("default_clip: field is identically zero");
    return 0.9 * lo;
}

inline ModulationMaps modulation_maps(const FieldRaster& field, double clip) {
    if (!(clip > 0.0)) throw std::invalid_argument("modulation_maps: clip must be positive");
    long violations = 0;
    for (int y = 0; y < field.height; ++y)
        for (int x = 0; x < field.width; ++x) {
            const double a = std::abs(field.values(y, x));
            if (a > 0.0 && clip > a * (1.0 + 1e-12)) ++violations;
        }
    if (violations > 0)
        throw std::invalid_argument("modulation_maps: clip exceeds |field| at " +
                                    std::to_string(violations) + " pixels");
    ModulationMaps mm;
    mm.M.resize(field.height, field.width);
    mm.F.resize(field.height, field.width);
    for (int y = 0; y < field.height; ++y)
        for (int x = 0; x < field.width; ++x) {
            const Complex e = field.values(y, x);
            const double a = std::abs(e);
            if (a == 0.0) {
                mm.M(y, x) = 0.0;  // full suppression
                mm.F(y, x) = 0.0;
                continue;
            }
            const double m = 1.0 + inverse_sinc(std::min(clip / a, 1.0)) / pi;
            mm.M(y, x) = m;
            mm.F(y, x) = wrap_2pi(-std::arg(e) - pi * m);
        }
    return mm;
}

/// phase(x, y) = M mod(F + 2 pi x / Lambda, 2 pi); the grating index is the
/// horizontal pixel coordinate.
inline HologramRaster hologram_phase(const FieldRaster& field, double clip, double grating) {
    if (grating < 4.0) throw std::invalid_argument("hologram_phase: grating period < 4 px");
    const ModulationMaps mm = modulation_maps(field, clip);
    HologramRaster h;
    h.width = field.width;
    h.height = field.height;
    h.grating_period = grating;
    h.clip_constant = clip;
    h.phase.resize(field.height, field.width);
    for (int y = 0; y < field.height; ++y)
        for (int x = 0; x < field.width; ++x) {
            const double saw = wrap_2pi(mm.F(y, x) + two_pi * x / grating);
            h.phase(y, x) = wrap_2pi(mm.M(y, x) * saw);
        }
    return h;
}

// ---------------------------------------------------------------------------
// Scalar-diffraction oracle.
// ---------------------------------------------------------------------------

struct DiffractionOptions {
    double window_frac = 0.5;   // lobe half-width as a fraction of 1/Lambda
    double aperture_rmin = 0.22;
    double aperture_rmax = 0.47;
    double aperture_soft = 0.09;
    double aliasing_energy_tol = 0.02;
};

namespace detail {

inline void fft2d(Eigen::MatrixXcd& a, bool inverse) {
    Eigen::FFT<double> fft;
    const Eigen::Index rows = a.rows(), cols = a.cols();
    std::vector<Complex> buf_in, buf_out;
    buf_in.resize(static_cast<std::size_t>(cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) buf_in[static_cast<std::size_t>(c)] = a(r, c);
        if (inverse) fft.inv(buf_out, buf_in); else fft.fwd(buf_out, buf_in);
        for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = buf_out[static_cast<std::size_t>(c)];
    }
    buf_in.resize(static_cast<std::size_t>(rows));
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) buf_in[static_cast<std::size_t>(r)] = a(r, c);
        if (inverse) fft.inv(buf_out, buf_in); else fft.fwd(buf_out, buf_in);
        for (Eigen::Index r = 0; r < rows; ++r) a(r, c) = buf_out[static_cast<std::size_t>(r)];
    }
}

inline double fft_freq(Eigen::Index i, Eigen::Index n) {
    const auto s = static_cast<double>(i <= n / 2 ? i : i - n);
    return s / static_cast<double>(n);
}

}  // namespace detail

/// Smooth annular analysis aperture (raised-cosine edges).  Its own spectrum
/// must fit inside the lobe window, hence the gentle soft width.
inline Eigen::MatrixXd analysis_aperture(int size, const DiffractionOptions& o = {}) {
    Eigen::MatrixXd A(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double r = std::hypot(x - size / 2.0, y - size / 2.0) / size;
            if (r < o.aperture_rmin || r > o.aperture_rmax) {
                A(y, x) = 0.0;
                continue;
            }
            const double rise = std::clamp((r - o.aperture_rmin) / o.aperture_soft, 0.0, 1.0);
            const double fall = std::clamp((o.aperture_rmax - r) / o.aperture_soft, 0.0, 1.0);
            A(y, x) = 0.25 * (1.0 - std::cos(pi * rise)) * (1.0 - std::cos(pi * fall));
        }
    return A;
}

/// Demodulated first-order field of `illum * exp(i phase)`: FFT, box window of
/// half-width window_frac/Lambda around the carrier (1/Lambda, 0), inverse
/// FFT, carrier removed.
inline Eigen::MatrixXcd first_order_field(const HologramRaster& holo,
                                          const Eigen::MatrixXcd& illum,
                                          const DiffractionOptions& o = {}) {
    if (illum.rows() != holo.height || illum.cols() != holo.width)
        throw std::invalid_argument("first_order_field: raster size mismatch");
    Eigen::MatrixXcd u(holo.height, holo.width);
    for (int y = 0; y < holo.height; ++y)
        for (int x = 0; x < holo.width; ++x)
            u(y, x) = illum(y, x) * std::polar(1.0, holo.phase(y, x));
    detail::fft2d(u, false);
    const double f0 = 1.0 / holo.grating_period;
    const double half = o.window_frac * f0;
    for (Eigen::Index r = 0; r < u.rows(); ++r)
        for (Eigen::Index c = 0; c < u.cols(); ++c) {
            const double fy = detail::fft_freq(r, u.rows());
            const double fx = detail::fft_freq(c, u.cols());
            if (std::abs(fx - f0) > half || std::abs(fy) > half) u(r, c) = Complex(0, 0);
        }
    detail::fft2d(u, true);
    for (int y = 0; y < holo.height; ++y)
        for (int x = 0; x < holo.width; ++x)
            u(y, x) *= std::polar(1.0, -two_pi * x / holo.grating_period);
    return u;
}

/// Validation of the first-order design goal: illuminate the hologram with
/// the target field through the analysis aperture, isolate the first-order
/// lobe, and return the normalized overlap of the converted field with the
/// plane-wave (aperture) mode.  Global phase and scale drop out.  A perfectly
/// encoded hologram converts its own target into a uniform wave, so the
/// fidelity is 1 up to windowing error; corrupting the phase map destroys it.
inline double diffraction_oracle(const HologramRaster& holo, const FieldRaster& field,
                                 const DiffractionOptions& o = {}) {
    if (field.width != holo.width || field.height != holo.height)
        throw std::invalid_argument("diffraction_oracle: raster size mismatch");
    if (field.width != field.height)
        throw std::invalid_argument("diffraction_oracle: square rasters required");
    const int size = field.width;
    const Eigen::MatrixXd A = analysis_aperture(size, o);

    // Aliasing guard: the apertured field itself must fit in the lobe window,
    // otherwise the first order overlaps the neighboring orders.
    {
        Eigen::MatrixXcd s(size, size);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) s(y, x) = A(y, x) * field.values(y, x);
        detail::fft2d(s, false);
        const double half = o.window_frac / holo.grating_period;
        double inside = 0.0, total = 0.0;
        for (Eigen::Index r = 0; r < s.rows(); ++r)
            for (Eigen::Index c = 0; c < s.cols(); ++c) {
                const double e = std::norm(s(r, c));
                total += e;
                if (std::abs(detail::fft_freq(r, s.rows())) <= half &&
                    std::abs(detail::fft_freq(c, s.cols())) <= half)
                    inside += e;
            }
        if (total > 0.0 && 1.0 - inside / total > o.aliasing_energy_tol)
            throw std::runtime_error(
                "diffraction_oracle: grating period too small for the field bandwidth");
    }

    Eigen::MatrixXcd illum(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) illum(y, x) = A(y, x) * field.values(y, x);
    const Eigen::MatrixXcd psi1 = first_order_field(holo, illum, o);

    Complex overlap(0, 0);
    double na = 0.0, np = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            overlap += A(y, x) * psi1(y, x);
            na += A(y, x) * A(y, x);
            np += std::norm(psi1(y, x));
        }
    if (na == 0.0 || np == 0.0) return 0.0;
    return std::norm(overlap) / (na * np);
}

// ---------------------------------------------------------------------------
// Graymap export.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_pgm(const std::string& path, const Eigen::MatrixXd& gray01, int maxval) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
    os << "P5\n" << gray01.cols() << " " << gray01.rows() << "\n" << maxval << "\n";
    for (Eigen::Index y = 0; y < gray01.rows(); ++y)
        for (Eigen::Index x = 0; x < gray01.cols(); ++x) {
            const double v = std::clamp(gray01(y, x), 0.0, 1.0);
            const long g = std::lround(v * maxval);
            if (maxval > 255) {
                const auto u = static_cast<unsigned>(g);
                os.put(static_cast<char>((u >> 8) & 0xff));
                os.put(static_cast<char>(u & 0xff));
            } else {
                os.put(static_cast<char>(g & 0xff));
            }
        }
    if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

}  // namespace detail

/// Phase linearly mapped [0, 2*pi) onto the full gray range.
inline void export_hologram_pgm(const HologramRaster& h, const std::string& path,
                                int bits = 8) {
    if (bits != 8 && bits != 16)
        throw std::invalid_argument("export_hologram_pgm: bits must be 8 or 16");
    detail::write_pgm(path, (h.phase / two_pi).matrix(), bits == 8 ? 255 : 65535);
}

/// Paired graymaps: modulus (normalized to its maximum) and wrapped phase.
inline void export_field_pgm(const FieldRaster& f, const std::string& modulus_path,
                             const std::string& phase_path, int bits = 8) {
    Eigen::MatrixXd mod(f.height, f.width), ph(f.height, f.width);
    double mx = 0.0;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) mx = std::max(mx, std::abs(f.values(y, x)));
    if (mx == 0.0) mx = 1.0;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            mod(y, x) = std::abs(f.values(y, x)) / mx;
            ph(y, x) = wrap_2pi(std::arg(f.values(y, x))) / two_pi;
        }
    const int maxval = bits == 8 ? 255 : 65535;
    detail::write_pgm(modulus_path, mod, maxval);
    detail::write_pgm(phase_path, ph, maxval);
}

}  // namespace nhsd
