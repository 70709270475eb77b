#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ads {

// Deterministic 64-bit stream generator (splitmix64). Used instead of the
// std:: distributions so that draws are identical across platforms and
// standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Unbiased integer in [0, bound). bound must be >= 1.
    uint64_t bounded(uint64_t bound) {
        // rejection sampling: discard the non-multiple tail of 2^64
        uint64_t threshold = (~bound + 1) % bound;
        uint64_t r;
        do {
            r = next_u64();
        } while (r < threshold);
        return r % bound;
    }

    // Double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller, fully deterministic.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {

inline uint64_t fnv1a_accumulate(uint64_t h, const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_part(uint64_t h, std::string_view s) {
    return fnv1a_accumulate(h, s.data(), s.size());
}

inline uint64_t hash_part(uint64_t h, uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    return fnv1a_accumulate(h, bytes, 8);
}

inline uint64_t splitmix_finalize(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

// Derives an independent seed from a base seed and a tuple of tags. Used to
// fan one global seed out to per-component / per-item streams so results do
// not depend on scheduling order.
template <class... Parts>
uint64_t derive_seed(uint64_t base, Parts&&... parts) {
    uint64_t h = 0xcbf29ce484222325ull;
    h = detail::hash_part(h, base);
    ((h = detail::hash_part(h, std::forward<Parts>(parts))), ...);
    return detail::splitmix_finalize(h);
}

// Fisher-Yates with our own bounded draws; std::shuffle is
// implementation-defined and would break cross-platform determinism.
template <class T>
void deterministic_shuffle(std::vector<T>& items, Rng& rng) {
    for (size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[rng.bounded(i)]);
    }
}

}  // namespace ads
