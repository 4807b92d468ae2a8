#pragma once

#include <cstdint>

namespace patchsim {

// Deterministic PRNG (splitmix64 core). Byte-identical sequences across
// platforms and builds, which the training/checkpoint reproducibility
// guarantees depend on; std distributions are implementation-defined, so
// the float/int draws are spelled out here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    float uniform_float(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    // Uniform integer in [0, n), n > 0.
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection sampling keeps the draw unbiased.
        std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int uniform_int(int lo, int hi) {  // inclusive range [lo, hi]
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Independent child stream; used to give every (epoch, pair) its own
    // sequence without coupling draw counts across consumers.
    Rng fork(std::uint64_t a, std::uint64_t b = 0) const {
        std::uint64_t s = state_;
        s ^= a * 0xd6e8feb86659fd93ULL + 0x2545f4914f6cdd1dULL;
        s ^= (b + 0x632be59bd9b4e019ULL) * 0x9e3779b97f4a7c15ULL;
        Rng child(s);
        child.next_u64();
        return child;
    }

private:
    std::uint64_t state_;
};

}  // namespace patchsim
