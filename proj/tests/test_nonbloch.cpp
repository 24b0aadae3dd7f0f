#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nhsd/nonbloch.hpp"

using namespace nhsd;
using doctest::Approx;

namespace {

ModelParams fig3_params() { return ModelParams::from_pi_units(0.31, 0.0, 0.25, 0.057); }
ModelParams fig5_params() { return ModelParams::from_pi_units(0.13, 0.5, -0.125, 0.036); }

}  // namespace

TEST_CASE("ronkin function") {
    const ModelParams p = fig3_params();
    SUBCASE("asymptotic value for a far reference energy") {
        CHECK(ronkin(p, Complex(100, 0), 0.0, 512) == Approx(9.2103403719761836).epsilon(2e-4));
    }
    SUBCASE("flat plateau at E = 0, sharp minimum at an in-spectrum reference") {
        const auto width = [&](Complex e) {
            std::vector<double> vs;
            double vmin = 1e300;
            for (int j = 0; j <= 200; ++j) {
                const double mu = -0.5 + 0.5 * j / 200.0;
                vs.push_back(ronkin(p, e, mu, 512));
                vmin = std::min(vmin, vs.back());
            }
            int cnt = 0;
            for (double v : vs) cnt += (v < vmin + 1e-3) ? 1 : 0;
            return cnt * (0.5 / 200.0);
        };
        CHECK(width(Complex(0, 0)) > 0.05);
        CHECK(width(Complex(1.0, 0)) < 0.02);
    }
    SUBCASE("sharp minimum sits at mu_GBZ") {
        double best_mu = 0, best_v = 1e300;
        for (int j = 0; j <= 400; ++j) {
            const double mu = -0.5 + 0.5 * j / 400.0;
            const double v = ronkin(p, Complex(1.0, 0), mu, 512);
            if (v < best_v) {
                best_v = v;
                best_mu = mu;
            }
        }
        CHECK(best_mu == Approx(-0.23207877934115576).epsilon(0.09));  // +-0.02 absolute
        CHECK(std::abs(best_mu + 0.23207877934115576) < 0.02);
    }
    SUBCASE("landscape reduces to pointwise calls and is chiral-symmetric") {
        const auto g = ronkin_landscape(p, {Complex(0.7, 0.2)}, {-0.2}, 256);
        CHECK(g.values(0, 0) == ronkin(p, Complex(0.7, 0.2), -0.2, 256));
        const auto g2 = ronkin_landscape(p, {Complex(0.7, 0.2), Complex(-0.7, -0.2)},
                                         {-0.3, -0.1}, 256);
        CHECK(g2.values(0, 0) == Approx(g2.values(1, 0)).epsilon(1e-12));
        CHECK(g2.values(0, 1) == Approx(g2.values(1, 1)).epsilon(1e-12));
    }
    SUBCASE("reference on the sampled spectrum is refused") {
        const auto [a, b] = sample_band_loop(p, -0.1, 512);
        CHECK_THROWS_AS(ronkin(p, a.samples[17].energy, -0.1, 512), SingularityError);
    }
    SUBCASE("ronkin-winding identity: dV/dmu equals the integer winding") {
        const double h = 1e-3;
        const struct { Complex e; double mu; } probes[] = {
            {Complex(2.5, 0.3), -0.1},   // outside everything: w = 0
            {Complex(1.0, 0.0), -0.40},  // inside the reopened structure: w = -1
            {Complex(1.1, 0.05), -0.05},
        };
        for (const auto& pr : probes) {
            const auto [a, b] = sample_band_loop(p, pr.mu, 4096, exceptional_mu_values(p));
            const int w = winding_number(a, b, pr.e);
            const double dv =
                (ronkin(p, pr.e, pr.mu + h, 4096) - ronkin(p, pr.e, pr.mu - h, 4096)) / (2 * h);
            CHECK(std::abs(dv - w) < 0.02);
        }
    }
    SUBCASE("convexity in mu") {
        const double h = 0.01;
        for (Complex e : {Complex(0.9, 0.1), Complex(0.2, 0.4), Complex(1.4, -0.2)}) {
            for (int j = 1; j < 20; ++j) {
                const double mu = -0.5 + 0.5 * j / 20.0;
                const double second = ronkin(p, e, mu + h, 512) - 2 * ronkin(p, e, mu, 512) +
                                      ronkin(p, e, mu - h, 512);
                CHECK(second >= -1e-3 * h * h - 1e-12);
            }
        }
    }
}

TEST_CASE("mu_GBZ extraction") {
    const ModelParams p = fig3_params();
    SUBCASE("golden-section minimizer matches the closed form") {
        const auto r = extract_mu_gbz(p, -0.40, -0.05, 15, 1024);
        CHECK(std::abs(r.mu_gbz - (-0.23207877934115576)) < 1e-3);
        CHECK(std::abs(r.mu_gbz - (-0.232)) < 0.005);
        CHECK_FALSE(r.ep_nearby);
    }
    SUBCASE("hermitian lattice has trivial GBZ") {
        const auto r = extract_mu_gbz(ModelParams::from_pi_units(0.31, 0, 0.25, 0),
                                      -0.15, 0.15, 15, 1024);
        CHECK(std::abs(r.mu_gbz) < 1e-3);
    }
    SUBCASE("long-range regime is rejected") {
        CHECK_THROWS_AS(extract_mu_gbz(fig5_params(), -0.3, 0.0, 9, 256), std::domain_error);
    }
    SUBCASE("range without an interior minimum is an error") {
        CHECK_THROWS_AS(extract_mu_gbz(p, -0.20, -0.05, 9, 256), std::runtime_error);
    }
    SUBCASE("GBZ circle consistency: bands on the extracted circle are real") {
        const auto r = extract_mu_gbz(p, -0.40, -0.05, 15, 2048);
        const auto circle = gbz_circle(p, r.mu_gbz, 256);
        double worst = 0;
        for (const Complex& beta : circle.betas) {
            const auto [ep, em] = band_energies(p, beta);
            worst = std::max(worst, std::abs(ep.imag()));
        }
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("obc spectrum") {
    const ModelParams p = fig3_params();
    SUBCASE("hand-diagonalized 2-cell chain") {
        const auto s = obc_spectrum({1, 0, 0, 0}, 2);
        REQUIRE(s.eigenvalues.size() == 4);
        CHECK(std::abs(s.eigenvalues[0] - Complex(-1, 0)) < 1e-12);
        CHECK(std::abs(s.eigenvalues[1]) < 1e-12);
        CHECK(std::abs(s.eigenvalues[2]) < 1e-12);
        CHECK(std::abs(s.eigenvalues[3] - Complex(1, 0)) < 1e-12);
    }
    SUBCASE("reality and bulk interval at n_cells = 40") {
        const auto s = obc_spectrum(p, 40);
        REQUIRE(s.eigenvalues.size() == 80);
        double worst_im = 0;
        for (const Complex& z : s.eigenvalues)
            worst_im = std::max(worst_im, std::abs(z.imag()));
        CHECK(worst_im < 1e-6);
        // Bulk eigenvalues fill the derived interval; the chain is in its
        // topological phase, so one exponentially split near-zero edge pair
        // sits below it.
        int inside = 0, near_zero = 0;
        for (const Complex& z : s.eigenvalues) {
            const double a = std::abs(z);
            if (a > 0.209 - 0.05 && a < 1.7386053874702156 + 0.05) ++inside;
            if (a < 1e-3) ++near_zero;
        }
        CHECK(inside == 78);
        CHECK(near_zero == 2);
    }
    SUBCASE("edge pair splitting shrinks exponentially with n") {
        const auto smallest = [&](int n) {
            const auto s = obc_spectrum(p, n);
            double lo = 1e300;
            for (const Complex& z : s.eigenvalues) lo = std::min(lo, std::abs(z));
            return lo;
        };
        const double a10 = smallest(10), a20 = smallest(20), a40 = smallest(40);
        CHECK(a20 < 0.2 * a10);
        CHECK(a40 < 0.2 * a20);
    }
    SUBCASE("finite-size Hausdorff shrinks monotonically") {
        const auto sA = obc_spectrum(p, 20);
        const auto sB = obc_spectrum(p, 40);
        const auto sC = obc_spectrum(p, 80);
        const double d1 = directed_hausdorff(sA.eigenvalues, sB.eigenvalues);
        const double d2 = directed_hausdorff(sB.eigenvalues, sC.eigenvalues);
        CHECK(d2 < d1);
    }
    SUBCASE("hard cap") {
        CHECK_THROWS_AS(obc_spectrum(p, 201), std::invalid_argument);
    }
}

TEST_CASE("intersection-traced OBC cloud and GBZ") {
    SUBCASE("short-range model yields an empty cloud") {
        const auto [cloud, gbz] =
            trace_obc_via_intersections(fig3_params(), {-0.05, -0.1, -0.15}, 1024);
        CHECK(cloud.eigenvalues.empty());
        CHECK(gbz.betas.empty());
    }
    SUBCASE("long-range cloud hugs the dense OBC spectrum") {
        const ModelParams p = fig5_params();
        std::vector<double> mus;
        for (double mu = -0.120; mu < -0.0099; mu += 0.005) mus.push_back(mu);
        const auto [cloud, gbz] = trace_obc_via_intersections(p, mus, 1024, 4);
        REQUIRE(!cloud.eigenvalues.empty());
        const auto obc = obc_spectrum(p, 60);
        CHECK(directed_hausdorff(cloud.eigenvalues, obc.eigenvalues) < 0.05);
        // beta pairs produce equal energies by construction
        for (std::size_t i = 0; i < gbz.betas.size(); i += 2) {
            const auto [e1p, e1m] = band_energies(p, gbz.betas[i]);
            const auto [e2p, e2m] = band_energies(p, gbz.betas[i + 1]);
            const double match =
                std::min(std::abs(e1p - e2p), std::abs(e1p - e2m));
            CHECK(match < 1e-6);
        }
        // traced GBZ radii interleave between the bounding EP radii
        std::vector<double> ep_mus = exceptional_mu_values(p);
        std::sort(ep_mus.begin(), ep_mus.end());
        const double mu_inner = ep_mus[ep_mus.size() / 2];      // smallest positive side
        const double mu_outer = ep_mus[ep_mus.size() / 2 - 1];  // largest negative side
        for (const Complex& beta : gbz.betas) {
            const double r = std::abs(beta);
            CHECK(r <= std::exp(-mu_outer) * (1 + 1e-9));
            CHECK(r >= std::exp(-mu_inner) * (1 - 1e-9));
        }
    }
}
