#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace microseg {

// Seed mixer for deriving independent child streams from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG with portable distributions. std::mt19937_64 output is
// specified bit-exactly by the standard; the library distributions are not,
// so uniform/normal/int draws are implemented here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller (no cached pair, fixed draw order)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // rejection-sampled normal restricted to [lo, hi]
    double truncated_normal(double lo, double hi) {
        for (;;) {
            double v = normal();
            if (v >= lo && v <= hi) return v;
        }
    }

    // unbiased integer in [0, bound)
    std::uint64_t uniform_int(std::uint64_t bound) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        for (;;) {
            std::uint64_t v = eng_();
            if (v < limit) return v % bound;
        }
    }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Fisher-Yates; std::shuffle is implementation-defined, this is not.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace microseg
