#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nhsd {

using Complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Thrown when an evaluation is requested exactly on (or too close to) a
/// singular locus, e.g. the Wasserstein metric at an exceptional-point radius.
class SingularityError : public std::runtime_error {
public:
    SingularityError(const std::string& what, double nearest_mu)
        : std::runtime_error(what), nearest_mu_(nearest_mu) {}
    double nearest_mu() const { return nearest_mu_; }

private:
    double nearest_mu_;
};

/// Thrown when branch continuity of a sampled band loop is violated away
/// from any detected exceptional point. Carries the offending momentum.
class ContinuityError : public std::runtime_error {
public:
    ContinuityError(const std::string& what, double k)
        : std::runtime_error(what), k_(k) {}
    double offending_k() const { return k_; }

private:
    double k_;
};

/// Thrown when the cavity round-trip sum diverges (t e^{Im E} >= 1).
class DivergenceError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Wrap an angle to [0, 2*pi).
inline double wrap_2pi(double a) {
    double r = std::fmod(a, two_pi);
    return r < 0 ? r + two_pi : r;
}

/// Wrap an angle to (-pi, pi].
inline double wrap_pi(double a) {
    double r = std::fmod(a + pi, two_pi);
    if (r <= 0) r += two_pi;
    return r - pi;
}

// ---------------------------------------------------------------------------
// Deterministic RNG streams.  Streams are derived from (seed, stream indices)
// with splitmix64 so that parallel execution order never changes results.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Counter-based Gaussian stream; fully portable (Box-Muller on splitmix64).
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed, std::uint64_t stream_a = 0,
                            std::uint64_t stream_b = 0) {
        state_ = seed;
        (void)splitmix64(state_);
        state_ ^= 0x6a09e667f3bcc909ull + stream_a;
        (void)splitmix64(state_);
        state_ ^= 0xbb67ae8584caa73bull + stream_b;
        (void)splitmix64(state_);
    }

    double uniform() {  // (0, 1)
        const std::uint64_t u = splitmix64(state_);
        return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(two_pi * u2);
        have_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

private:
    std::uint64_t state_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Plain blocked parallel-for. Jobs <= 1 runs inline.
inline void parallel_for(std::size_t n, unsigned jobs,
                         const std::function<void(std::size_t)>& body) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const unsigned nt = std::min<unsigned>(jobs, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nt) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace nhsd
