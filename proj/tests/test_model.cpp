#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "nhsd/model.hpp"

using namespace nhsd;
using doctest::Approx;

namespace {

ModelParams fig3_params() { return ModelParams::from_pi_units(0.31, 0.0, 0.25, 0.057); }
ModelParams fig5_params() { return ModelParams::from_pi_units(0.13, 0.5, -0.125, 0.036); }

std::uint64_t rng_state = 0x5eed;
double urand(double lo, double hi) {
    const double u = (static_cast<double>(splitmix64(rng_state) >> 11) + 0.5) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

}  // namespace

TEST_CASE("momentum_to_beta basics") {
    CHECK(std::abs(momentum_to_beta(0.0, 0.0) - Complex(1, 0)) < 1e-15);
    CHECK(std::abs(momentum_to_beta(pi / 2, 0.0) - Complex(0, -1)) < 1e-15);
    // mu = -0.23 puts beta outside the unit circle at radius e^{0.23}
    const Complex b = momentum_to_beta(0.0, -0.23);
    CHECK(b.real() == Approx(1.2586000099294778).epsilon(1e-14));
    CHECK(b.imag() == Approx(0.0));
}

TEST_CASE("beta modulus is exactly e^{-mu}") {
    for (int i = 0; i < 10000; ++i) {
        const double k = urand(0, two_pi), mu = urand(-1.0, 1.0);
        CHECK(std::abs(std::abs(momentum_to_beta(k, mu)) - std::exp(-mu)) < 1e-14);
    }
}

TEST_CASE("bloch_matrix frozen values") {
    SUBCASE("hermitian reduction") {
        const auto h = bloch_matrix({1, 0, 0, 0}, Complex(1, 0));
        CHECK(std::abs(h.e1 - Complex(-1, 0)) < 1e-15);
        CHECK(std::abs(h.e2 - Complex(-1, 0)) < 1e-15);
    }
    SUBCASE("short-range parameter set at beta = 1") {
        const auto h = bloch_matrix(fig3_params(), Complex(1, 0));
        CHECK(h.e1.real() == Approx(-0.97389372261283591).epsilon(1e-13));
        CHECK(h.e1.imag() == Approx(0.60632738214283011).epsilon(1e-13));
        CHECK(h.e2.real() == Approx(-0.97389372261283591).epsilon(1e-13));
        CHECK(h.e2.imag() == Approx(-0.96446894465206645).epsilon(1e-13));
    }
    SUBCASE("long-range parameter set at beta = 1") {
        const auto h = bloch_matrix(fig5_params(), Complex(1, 0));
        CHECK(h.e1.real() == Approx(-0.63 * pi).epsilon(1e-13));
        CHECK(h.e1.imag() == Approx(-0.161 * pi).epsilon(1e-13));
        CHECK(h.e2.real() == Approx(-0.63 * pi).epsilon(1e-13));
        CHECK(h.e2.imag() == Approx(0.089 * pi).epsilon(1e-13));
    }
    SUBCASE("zero beta rejected") {
        CHECK_THROWS_AS(bloch_matrix(fig3_params(), Complex(0, 0)), std::domain_error);
    }
}

TEST_CASE("band_energies against a dense eigensolve") {
    SUBCASE("flat unit-circle bands for a pure delta1 chain") {
        for (double k : {0.0, 0.3, 1.7, 4.4}) {
            const auto [ep, em] = band_energies({1, 0, 0, 0}, momentum_to_beta(k, 0.0));
            CHECK(std::abs(std::abs(ep) - 1.0) < 1e-13);
            CHECK(std::abs(ep + em) < 1e-13);
        }
    }
    SUBCASE("oracle: 2x2 eigensolve matches +-sqrt(e1 e2)") {
        const ModelParams p = fig3_params();
        for (double k : {0.0, 0.9, 2.2, 5.1}) {
            for (double mu : {0.0, -0.23, 0.1}) {
                const Complex beta = momentum_to_beta(k, mu);
                const auto [ep, em] = band_energies(p, beta);
                Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(bloch_matrix(p, beta).matrix());
                std::array<Complex, 2> ev{es.eigenvalues()(0), es.eigenvalues()(1)};
                const double d1 = std::abs(ev[0] - ep) + std::abs(ev[1] - em);
                const double d2 = std::abs(ev[0] - em) + std::abs(ev[1] - ep);
                CHECK(std::min(d1, d2) < 1e-12);
                CHECK(std::abs(ep * ep - bloch_e1(p, beta) * bloch_e2(p, beta)) <
                      1e-12 * std::max(1.0, std::norm(ep)));
            }
        }
        const auto [ep, em] = band_energies(p, Complex(1, 0));
        CHECK(ep.real() == Approx(1.2461295809982231).epsilon(1e-12));
        CHECK(ep.imag() == Approx(0.13995006011136299).epsilon(1e-12));
    }
    SUBCASE("doubly degenerate zero at the E1 root") {
        const ModelParams p = fig3_params();
        const Complex beta = Complex(0, -1) * p.delta1 / (p.eta - p.gamma);
        const auto [ep, em] = band_energies(p, beta);
        CHECK(std::abs(ep) < 1e-10);
        CHECK(std::abs(em) < 1e-10);
    }
}

TEST_CASE("band loops") {
    const ModelParams p = fig3_params();
    SUBCASE("hermitian spectrum is real") {
        const auto [a, b] = sample_band_loop(ModelParams::from_pi_units(0.31, 0, 0.25, 0), 0.0, 256);
        double worst = 0;
        for (const auto& s : a.samples) worst = std::max(worst, std::abs(s.energy.imag()));
        CHECK(worst < 1e-10);
        CHECK(a.closed_after == LoopClosure::TwoPi);
    }
    SUBCASE("PBC loops enclose area; GBZ circle collapses onto the real axis") {
        const auto [a0, b0] = sample_band_loop(p, 0.0, 512);
        double area = 0;
        for (std::size_t j = 0; j < a0.size(); ++j) {
            const auto& s0 = a0.samples[j];
            const auto& s1 = a0.samples[(j + 1) % a0.size()];
            area += 0.5 * std::imag(std::conj(s0.energy) * (s1.energy - s0.energy));
        }
        CHECK(std::abs(area) > 0.05);

        // The paper rounds mu_GBZ to -0.23; the exact circle radius is the
        // geometric mean of the EP radii and only there is the loop truly real.
        const double mu_gbz = -0.5 * std::log((p.eta + p.gamma) / (p.eta - p.gamma));
        const auto [ag, bg] = sample_band_loop(p, mu_gbz, 512);
        double worst = 0;
        for (const auto& s : ag.samples) worst = std::max(worst, std::abs(s.energy.imag()));
        CHECK(worst < 1e-6);
        const auto [ar, br] = sample_band_loop(p, -0.23, 512);
        double worst_rounded = 0;
        for (const auto& s : ar.samples)
            worst_rounded = std::max(worst_rounded, std::abs(s.energy.imag()));
        CHECK(worst_rounded < 5e-3);  // rounded radius: nearly collapsed
    }
    SUBCASE("branch exchange past the EP radius closes after 4*pi") {
        const auto [a, b] = sample_band_loop(p, -0.48, 512, {-0.47388210857430635});
        CHECK(a.closed_after == LoopClosure::FourPi);
    }
    SUBCASE("chiral symmetry: bands sum to zero") {
        const auto [a, b] = sample_band_loop(p, -0.1, 256);
        for (std::size_t j = 0; j < a.size(); ++j)
            CHECK(std::abs(a.samples[j].energy + b.samples[j].energy) < 1e-12);
    }
    SUBCASE("n_k too small rejected") {
        CHECK_THROWS_AS(sample_band_loop(p, 0.0, 8), std::invalid_argument);
    }
}

TEST_CASE("obc hamiltonian structure") {
    SUBCASE("single delta1 bond: exactly one nonzero pair") {
        const auto h = build_obc_hamiltonian({1, 0, 0, 0}, 2);
        int nonzeros = 0;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if (std::abs(h(r, c)) > 0) ++nonzeros;
        CHECK(nonzeros == 2);
        CHECK(std::abs(h(0, 3) - Complex(-1, 0)) < 1e-15);  // (R,1) <- (L,2)
        CHECK(std::abs(h(3, 0) - Complex(-1, 0)) < 1e-15);
    }
    SUBCASE("real spectrum for delta2 = 0 and |gamma| < eta") {
        const auto h = build_obc_hamiltonian(fig3_params(), 12);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h, false);
        for (int i = 0; i < es.eigenvalues().size(); ++i)
            CHECK(std::abs(es.eigenvalues()(i).imag()) < 1e-8);
    }
    SUBCASE("ring closure reproduces the analytic Bloch bands") {
        const ModelParams p = fig3_params();
        for (int n : {4, 8, 16}) {
            const auto hr = build_ring_hamiltonian(p, n);
            Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(hr, false);
            std::vector<Complex> analytic;
            for (int j = 0; j < n; ++j) {
                const auto [ep, em] = band_energies(p, momentum_to_beta(two_pi * j / n, 0.0));
                analytic.push_back(ep);
                analytic.push_back(em);
            }
            for (int i = 0; i < es.eigenvalues().size(); ++i) {
                double best = 1e300;
                for (const Complex& z : analytic)
                    best = std::min(best, std::abs(z - es.eigenvalues()(i)));
                CHECK(best < 1e-8);
            }
        }
    }
    SUBCASE("small chains rejected") {
        CHECK_THROWS_AS(build_obc_hamiltonian(fig3_params(), 1), std::invalid_argument);
    }
    SUBCASE("fully one-way intracell hopping (gamma = eta) is allowed") {
        const auto h = build_obc_hamiltonian(ModelParams::from_pi_units(0.3, 0, 0.2, 0.2), 4);
        CHECK(std::abs(h(0, 1)) == 0.0);        // R <- L vanishes
        CHECK(std::abs(h(1, 0)) > 0.0);         // L <- R survives
    }
}

TEST_CASE("non-Bloch vectors") {
    SUBCASE("flat left vector at beta = 1") {
        const auto v = nonbloch_basis(Complex(1, 0), 4, Side::Left);
        for (int m = 0; m < 4; ++m)
            CHECK(std::abs(v.amplitudes[m] - Complex(0.5, 0)) < 1e-15);
    }
    SUBCASE("left-right pairing is exactly one") {
        for (const Complex beta : {Complex(1.3, 0.2), Complex(0.4, -0.9), Complex(0.01, 0)}) {
            const auto l = nonbloch_basis(beta, 16, Side::Left);
            const auto r = nonbloch_basis(beta, 16, Side::Right);
            CHECK(std::abs(nonbloch_pairing(l, r) - Complex(1, 0)) < 1e-12);
        }
    }
    SUBCASE("same-circle cross-talk vanishes") {
        const int n = 12;
        const Complex beta = std::polar(std::exp(0.23), -0.7);
        const auto l = nonbloch_basis(beta, n, Side::Left);
        for (int j = 1; j < n; ++j) {
            const Complex betap = beta * std::polar(1.0, two_pi * j / n);
            const auto r = nonbloch_basis(betap, n, Side::Right);
            CHECK(std::abs(nonbloch_pairing(l, r)) < 1e-12);
        }
    }
    SUBCASE("gram matrix on a common circle is the identity") {
        const int n = 10;
        std::vector<NonBlochVector> lefts, rights;
        for (int j = 0; j < n; ++j) {
            const Complex beta = std::polar(std::exp(0.15), -two_pi * j / n);
            lefts.push_back(nonbloch_basis(beta, n, Side::Left));
            rights.push_back(nonbloch_basis(beta, n, Side::Right));
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Complex g = nonbloch_pairing(lefts[i], rights[j]);
                CHECK(std::abs(g - (i == j ? Complex(1, 0) : Complex(0, 0))) < 1e-10);
            }
    }
}
