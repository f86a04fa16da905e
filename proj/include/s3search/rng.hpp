#pragma once

#include <cstdint>
#include <initializer_list>

namespace s3s {

// Counter-based generator (splitmix64 finalizer over a keyed counter).
// Streams are derived by hashing, never by sharing mutable state, so
// resampling decisions cannot perturb the downstream draws of a
// surviving particle.
class Rng {
  public:
    explicit Rng(uint64_t key) : key_(key) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t hash_combine(uint64_t a, uint64_t b) {
        return mix(a ^ (mix(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
    }

    static uint64_t derive(std::initializer_list<uint64_t> parts) {
        uint64_t k = 0x2545f4914f6cdd1dULL;
        for (uint64_t p : parts) {
            k = hash_combine(k, p);
        }
        return k;
    }

    uint64_t key() const { return key_; }

    uint64_t next_u64() { return mix(key_ + 0x632be59bd9b4e019ULL * ++counter_); }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    uint64_t next_below(uint64_t n) {
        return next_u64() % n;  // bias negligible for the small n used here
    }

  private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace s3s
