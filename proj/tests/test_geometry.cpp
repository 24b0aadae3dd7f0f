#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "nhsd/geometry.hpp"

using namespace nhsd;
using doctest::Approx;

namespace {

ModelParams fig3_params() { return ModelParams::from_pi_units(0.31, 0.0, 0.25, 0.057); }
ModelParams fig5_params() { return ModelParams::from_pi_units(0.13, 0.5, -0.125, 0.036); }

BandLoop synthetic_circle(int n, bool ccw, Complex center = {0, 0}, double radius = 1.0) {
    BandLoop l;
    l.closed_after = LoopClosure::TwoPi;
    for (int j = 0; j < n; ++j) {
        const double k = two_pi * j / n;
        const double ang = ccw ? k : -k;
        l.samples.push_back({k, Complex(0, 0), center + std::polar(radius, ang)});
    }
    return l;
}

std::uint64_t rng_state = 0xfeed;
double urand(double lo, double hi) {
    const double u = (static_cast<double>(splitmix64(rng_state) >> 11) + 0.5) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

}  // namespace

TEST_CASE("algebraic area of synthetic loops") {
    CHECK(algebraic_area(synthetic_circle(2048, true)) == Approx(pi).epsilon(1e-4));
    CHECK(algebraic_area(synthetic_circle(2048, false)) == Approx(-pi).epsilon(1e-4));

    // figure-eight with equal lobes of opposite orientation cancels
    BandLoop eight;
    eight.closed_after = LoopClosure::TwoPi;
    const int n = 4096;
    for (int j = 0; j < n; ++j) {
        const double t = two_pi * j / n;
        eight.samples.push_back({t, Complex(0, 0),
                                 Complex(std::sin(2 * t) / 2.0, std::sin(t))});
    }
    CHECK(std::abs(algebraic_area(eight)) < 1e-4);
}

TEST_CASE("exceptional points") {
    SUBCASE("short-range closed forms") {
        const auto eps = find_exceptional_mu(fig3_params());
        REQUIRE(eps.size() == 2);
        double mu_e1 = 0, mu_e2 = 0;
        for (const auto& r : eps)
            (r.which_factor == EpFactor::E1 ? mu_e1 : mu_e2) = r.mu;
        CHECK(mu_e1 == Approx(-0.47388210857430635).epsilon(1e-12));
        CHECK(mu_e2 == Approx(0.0097245498919948572).epsilon(1e-9));
        CHECK(0.5 * (mu_e1 + mu_e2) == Approx(-0.23207877934115576).epsilon(1e-9));
        for (const auto& r : eps) {
            const Complex v = r.which_factor == EpFactor::E1
                                  ? bloch_e1(fig3_params(), r.beta)
                                  : bloch_e2(fig3_params(), r.beta);
            CHECK(std::abs(v) < 1e-10);
            const auto [ep, em] = band_energies(fig3_params(), r.beta);
            CHECK(std::abs(ep - em) < 1e-8);
        }
    }
    SUBCASE("long-range set has four roots") {
        const auto eps = find_exceptional_mu(fig5_params());
        CHECK(eps.size() == 4);
        for (const auto& r : eps) {
            const Complex v = r.which_factor == EpFactor::E1
                                  ? bloch_e1(fig5_params(), r.beta)
                                  : bloch_e2(fig5_params(), r.beta);
            CHECK(std::abs(v) < 1e-10);
        }
    }
    SUBCASE("degenerate model rejected") {
        CHECK_THROWS_AS(find_exceptional_mu({0, 0, 0.3, 0.3}), std::domain_error);
    }
}

TEST_CASE("winding numbers") {
    const ModelParams p = fig3_params();
    SUBCASE("synthetic CCW circle winds +1 around its center") {
        const BandLoop c = synthetic_circle(512, true, {0.3, 0.1});
        const BandLoop far = synthetic_circle(512, true, {100, 100}, 0.1);
        CHECK(winding_number(c, far, Complex(0.3, 0.1)) == 1);
        CHECK(winding_number(synthetic_circle(512, false, {0.3, 0.1}), far,
                             Complex(0.3, 0.1)) == -1);
    }
    SUBCASE("far reference winds zero") {
        const auto [a, b] = sample_band_loop(p, 0.0, 512);
        CHECK(winding_number(a, b, Complex(100, 0)) == 0);
    }
    SUBCASE("PBC loops wind +1 at their interior centroids") {
        const auto [a, b] = sample_band_loop(p, 0.0, 1024);
        for (const BandLoop* l : {&a, &b}) {
            Complex c(0, 0);
            for (const auto& s : l->samples) c += s.energy;
            c /= static_cast<double>(l->size());
            CHECK(winding_number(a, b, c) == 1);
        }
    }
    SUBCASE("reopened lobes past the EP wind -1") {
        const auto [a, b] = sample_band_loop(p, -0.48, 2048, exceptional_mu_values(p));
        REQUIRE(a.closed_after == LoopClosure::FourPi);
        Complex lobe(0, 0);
        int cnt = 0;
        for (const auto& s : a.samples)
            if (s.energy.real() > 0.4) {
                lobe += s.energy;
                ++cnt;
            }
        REQUIRE(cnt > 0);
        lobe /= static_cast<double>(cnt);
        CHECK(winding_number(a, b, lobe) == -1);
        CHECK(winding_number(a, b, -lobe) == -1);
    }
    SUBCASE("reference too close to the spectrum is rejected") {
        const auto [a, b] = sample_band_loop(p, 0.0, 256);
        CHECK_THROWS_AS(winding_number(a, b, a.samples[3].energy), std::domain_error);
    }
}

TEST_CASE("wasserstein metric") {
    const ModelParams p = fig3_params();
    SUBCASE("two methods agree away from EPs") {
        for (double mu : {-0.35, -0.15, -0.05}) {
            const double gi = wasserstein_metric(p, mu, 2048, WassersteinMethod::Integral);
            const double ga = wasserstein_metric(p, mu, 2048, WassersteinMethod::AreaDerivative);
            CHECK(std::abs(gi - ga) / std::max(gi, 1e-6) < 0.01);
        }
    }
    SUBCASE("hermitian case: zero area, finite matching metric") {
        const ModelParams ph = ModelParams::from_pi_units(0.31, 0, 0.25, 0);
        const auto [a, b] = sample_band_loop(ph, 0.0, 1024);
        CHECK(std::abs(spectral_area(a, b).algebraic_area) < 1e-9);
        const double gi = wasserstein_metric(ph, 0.0, 1024, WassersteinMethod::Integral);
        const double ga = wasserstein_metric(ph, 0.0, 1024, WassersteinMethod::AreaDerivative);
        CHECK(gi > 0.0);
        CHECK(std::abs(gi - ga) / gi < 0.01);
    }
    SUBCASE("property: agreement on random parameter draws away from EP radii") {
        int tested = 0;
        while (tested < 50) {
            ModelParams q = ModelParams::from_pi_units(urand(0.1, 0.4), 0.0,
                                                       urand(0.15, 0.3), urand(0.0, 0.08));
            if (q.eta <= std::abs(q.gamma)) continue;
            const double mu = urand(-0.45, 0.0);
            bool near_ep = false;
            for (double m : exceptional_mu_values(q))
                if (std::abs(mu - m) < 0.05) near_ep = true;
            if (near_ep) continue;
            const double gi = wasserstein_metric(q, mu, 1024, WassersteinMethod::Integral);
            const double ga = wasserstein_metric(q, mu, 1024, WassersteinMethod::AreaDerivative);
            CHECK(std::abs(gi - ga) / std::max(gi, 1e-6) < 0.01);
            ++tested;
        }
    }
    SUBCASE("evaluation exactly on an EP radius is refused") {
        const double mu_ep = -0.47388210857430635;
        CHECK_THROWS_AS(wasserstein_metric(p, mu_ep, 256, WassersteinMethod::Integral),
                        SingularityError);
    }
    SUBCASE("per-band areas sum to the total") {
        const auto [a, b] = sample_band_loop(p, -0.1, 1024);
        const auto rep = spectral_area(a, b);
        CHECK(std::abs(rep.per_band_areas.first + rep.per_band_areas.second -
                       rep.algebraic_area) < 1e-10);
    }
}

TEST_CASE("self-intersections of the long-range bands") {
    const ModelParams p = fig5_params();
    const std::vector<double> eps = exceptional_mu_values(p);

    const auto collect = [&](double mu) {
        const auto [a, b] = sample_band_loop(p, mu, 2048, eps);
        auto pts = self_intersections(p, a, b);
        if (a.closed_after == LoopClosure::TwoPi) {
            auto more = self_intersections(p, b, a);
            pts.insert(pts.end(), more.begin(), more.end());
        }
        return pts;
    };
    const auto qualifying = [](const std::vector<IntersectionPoint>& pts) {
        int q = 0;
        for (const auto& ip : pts) q += (ip.qualifies_as_obc && !ip.ambiguous) ? 1 : 0;
        return q;
    };

    SUBCASE("no crossings at mu = 0") { CHECK(collect(0.0).empty()); }
    SUBCASE("two qualifying per band at mu = -0.06") {
        const auto pts = collect(-0.06);
        CHECK(qualifying(pts) == 4);
        for (const auto& ip : pts) {
            CHECK(std::abs(std::abs(ip.beta_pair.first) - std::abs(ip.beta_pair.second)) < 1e-9);
            // both k's reproduce the crossing energy after refinement
            CHECK(std::abs(std::abs(ip.beta_pair.first) - std::exp(0.06)) < 1e-9);
        }
    }
    SUBCASE("three qualifying per band at mu = -0.09") {
        CHECK(qualifying(collect(-0.09)) == 6);
    }
    SUBCASE("chiral symmetry maps crossings of one band onto the other") {
        const auto [a, b] = sample_band_loop(p, -0.06, 2048, eps);
        const auto pa = self_intersections(p, a, b);
        const auto pb = self_intersections(p, b, a);
        REQUIRE(pa.size() == pb.size());
        REQUIRE(!pa.empty());
        for (const auto& ia : pa) {
            double best = 1e300;
            for (const auto& ib : pb) best = std::min(best, std::abs(ib.energy + ia.energy));
            CHECK(best < 1e-8);
        }
    }
    SUBCASE("root-modulus oracle agrees with the winding qualification") {
        // det[H(beta) - E] = 0 clears to a quartic in beta; E lies on the OBC
        // spectrum iff the two roots on the sampling circle are the middle
        // pair by modulus.  Independent route to qualifies_as_obc.
        const auto middle_pair = [&](const IntersectionPoint& ip) {
            const double d1 = p.delta1, d2 = p.delta2;
            const Complex ig_m(0, p.eta - p.gamma);   // i(eta - gamma)
            const Complex ig_p(0, p.eta + p.gamma);   // i(eta + gamma)
            const Complex E2 = ip.energy * ip.energy;
            // b^2 (E^2 - e1 e2) = c4 b^4 + c3 b^3 + c2 b^2 + c1 b + c0 with
            // b^2 e1 e2 = d1 d2 b^4 + (d2 ig_p - d1 ig_m) b^3
            //           + (d1^2 + d2^2 - ig_m ig_p) b^2
            //           + (d1 ig_p - d2 ig_m) b + d1 d2
            const Complex c4 = -d1 * d2;
            const Complex c3 = -(d2 * ig_p - d1 * ig_m);
            const Complex c2 = E2 - (d1 * d1 + d2 * d2 - ig_m * ig_p);
            const Complex c1 = -(d1 * ig_p - d2 * ig_m);
            const Complex c0 = -d1 * d2;
            Eigen::Matrix4cd comp = Eigen::Matrix4cd::Zero();
            comp(0, 3) = -c0 / c4;
            comp(1, 3) = -c1 / c4;
            comp(2, 3) = -c2 / c4;
            comp(3, 3) = -c3 / c4;
            comp(1, 0) = comp(2, 1) = comp(3, 2) = Complex(1, 0);
            Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(comp, false);
            std::array<double, 4> mods;
            for (int i = 0; i < 4; ++i)
                mods[static_cast<std::size_t>(i)] = std::abs(es.eigenvalues()(i));
            std::sort(mods.begin(), mods.end());
            const double r = std::exp(-ip.mu);
            return std::abs(mods[1] - r) < 1e-5 && std::abs(mods[2] - r) < 1e-5;
        };
        for (double mu : {-0.06, -0.09, -0.11}) {
            const auto [a, b] = sample_band_loop(p, mu, 2048, eps);
            int checked = 0;
            for (const auto& ip : self_intersections(p, a, b)) {
                if (ip.ambiguous) continue;
                CHECK(ip.qualifies_as_obc == middle_pair(ip));
                ++checked;
            }
            CHECK(checked > 0);
        }
    }
}
