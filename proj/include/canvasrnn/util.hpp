#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace canvasrnn {

// Deterministic PRNG. Only the bit-specified mt19937_64 stream is consumed;
// uniform and normal variates are derived with fixed arithmetic so that
// identical seeds give bit-identical values on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // Uniform in [0, 1).
    double uniform() {
        return std::ldexp(static_cast<double>(eng_() >> 11), -53);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] via rejection-free modulo of a 53-bit draw;
    // bias is negligible for the small ranges used here, and the mapping is
    // fixed so results are reproducible.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform() * (hi - lo + 1));
    }

    // Standard normal via Box-Muller (fixed algorithm; std::normal_distribution
    // is implementation-defined and would break cross-platform determinism).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Derives an independent deterministic stream for item `index`.
    static std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Fixed-format double for CSV output: round-trippable and byte-stable.
std::string format_double(double v);

}  // namespace canvasrnn
