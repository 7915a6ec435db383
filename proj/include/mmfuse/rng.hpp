#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace mmfuse {

// Counter-based generator: output k is a hash of (seed, stream, k), so streams
// are reproducible, seekable and independent of call-site interleaving.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed, uint64_t stream = 0)
        : key_(mix(mix(seed, 0x9e3779b97f4a7c15ULL), stream)) {}

    uint64_t next_u64() { return mix(key_, counter_++); }

    // uniform in [0, 1)
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_uniform();
    }

    // standard normal via Box-Muller; the second deviate is cached
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - next_uniform();  // (0, 1]
        double u2 = next_uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // integer in [0, n)
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    std::vector<double> gaussian_vec(size_t n, double mean = 0.0, double stddev = 1.0) {
        std::vector<double> out(n);
        for (auto& v : out) v = mean + stddev * next_gaussian();
        return out;
    }

    std::vector<double> uniform_vec(size_t n, double lo, double hi) {
        std::vector<double> out(n);
        for (auto& v : out) v = next_uniform(lo, hi);
        return out;
    }

private:
    static uint64_t mix(uint64_t key, uint64_t ctr) {
        uint64_t x = key ^ (ctr + 0x9e3779b97f4a7c15ULL + (key << 6) + (key >> 2));
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    uint64_t key_;
    uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream ids used by the training harness so that independent concerns never
// share a counter sequence.
namespace rng_stream {
constexpr uint64_t data = 1;
constexpr uint64_t init = 2;
constexpr uint64_t shuffle = 3;
constexpr uint64_t noise = 4;
constexpr uint64_t probe = 5;
}  // namespace rng_stream

}  // namespace mmfuse
