#pragma once

#include <cmath>
#include <cstdint>

namespace stratarank {

// Counter-based splittable generator. Each stream is keyed by hashing
// (master seed, replicate index, salt); draws are a stateless mix of
// (key, counter), so replicate r sees the same sequence no matter which
// thread runs it.
class CounterRng {
public:
    CounterRng() = default;
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static CounterRng stream(std::uint64_t master_seed, std::uint64_t replicate,
                             std::uint64_t salt = 0) {
        return CounterRng(mix(master_seed ^ mix(replicate ^ mix(salt))));
    }

    std::uint64_t next_u64() { return mix(key_ ^ counter_++); }

    double uniform() {  // in (0, 1)
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Marsaglia polar method; deterministic per stream.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace stratarank
