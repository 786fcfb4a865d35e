#ifndef VREID_RNG_HPP
#define VREID_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace vreid {

// Seeded random stream built on mt19937_64. Draws are derived from the raw
// engine output only, so the same seed yields the same sequence on every
// platform (the std distribution classes do not guarantee that).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // uniform integer in [0, n)
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(gen_() % n);
    }

    // standard normal via Box-Muller; no cached second value
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    double log_normal(double mu, double sigma) {
        return std::exp(normal(mu, sigma));
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

} // namespace vreid

#endif // VREID_RNG_HPP
