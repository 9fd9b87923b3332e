#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace densitometer {

// Deterministic random stream: xoshiro256** seeded from a SplitMix64 chain.
// A stream is identified by (purpose, init_seed, data_seed); the same key
// always yields the same sequence, on every platform. Distinct purpose tags
// give unrelated streams even for equal seeds.
class RngStream {
public:
    RngStream(std::string_view purpose, std::uint64_t init_seed, std::uint64_t data_seed) {
        std::uint64_t h = fnv1a64(purpose);
        h = mix64(h ^ (init_seed + 0x9e3779b97f4a7c15ull));
        h = mix64(h ^ (data_seed + 0xbf58476d1ce4e5b9ull));
        // canonical xoshiro seeding: four successive SplitMix64 outputs
        for (auto& si : s_) {
            h += 0x9e3779b97f4a7c15ull;
            si = mix64(h);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform double in [0,1), 53-bit resolution
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double low, double high) {
        if (!(low < high)) {
            throw std::invalid_argument("RngStream::uniform: low must be < high (got low=" +
                                        std::to_string(low) + ", high=" + std::to_string(high) + ")");
        }
        return low + next_double() * (high - low);
    }

    // standard normal via Box-Muller, spare value cached
    double next_gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // unbiased integer in [0, n) via rejection (Lemire)
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) {
            throw std::invalid_argument("RngStream::next_below: n must be positive");
        }
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            #if defined(__SIZEOF_INT128__)
            const unsigned __int128 m = static_cast<unsigned __int128>(r) * n;
            const std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo >= threshold) {
                return static_cast<std::uint64_t>(m >> 64);
            }
            #else
            if (r >= threshold) {
                return r % n;
            }
            #endif
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    // SplitMix64 finalizer
    static constexpr std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t fnv1a64(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        return h;
    }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace densitometer
