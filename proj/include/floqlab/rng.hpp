#pragma once

#include <cmath>
#include <complex>
#include <initializer_list>

#include "floqlab/common.hpp"

namespace floqlab {

inline constexpr u64 kGolden64 = 0x9E3779B97F4A7C15ull;

inline u64 splitmix64(u64 x) {
    x += kGolden64;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Collapses (seed, path...) into one 64-bit stream key. Streams with
// different paths are statistically independent for MC purposes.
inline u64 derive_stream_key(u64 seed, std::initializer_list<u64> path) {
    u64 h = splitmix64(seed);
    for (u64 f : path) h = splitmix64(h ^ (f + kGolden64 + (h << 6) + (h >> 2)));
    return h;
}

// Counter-based generator (Philox-2x64, 10 rounds). Every draw is a pure
// function of (key, counter), so sample k of an ensemble reproduces
// bit-identically no matter which worker evaluates it or in what order.
class RngStream {
  public:
    explicit RngStream(u64 key) : key_(key) {}

    static RngStream derived(u64 seed, std::initializer_list<u64> path) {
        return RngStream(derive_stream_key(seed, path));
    }

    u64 next_u64() {
        if (avail_ == 0) refill();
        return block_[--avail_];
    }

    // [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1]; never zero, safe under log()
    double uniform_oc() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // N(0,1) via Box-Muller; pairs are generated together and one is cached
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_oc();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(kTwoPi * u2);
        have_spare_ = true;
        return r * std::cos(kTwoPi * u2);
    }

    // complex standard normal: E|z|^2 = 1
    cplx complex_gaussian() {
        const double s = 0.70710678118654752440;  // 1/sqrt(2)
        const double re = gaussian();
        const double im = gaussian();
        return cplx(re * s, im * s);
    }

  private:
    static void philox_round(u64& c0, u64& c1, u64& key) {
        constexpr u64 kMul = 0xD2B74407B1CE6E93ull;
        const unsigned __int128 prod = static_cast<unsigned __int128>(kMul) * c0;
        const u64 lo = static_cast<u64>(prod);
        const u64 hi = static_cast<u64>(prod >> 64);
        c0 = hi ^ key ^ c1;
        c1 = lo;
        key += kGolden64;
    }

    void refill() {
        u64 c0 = ctr_hi_, c1 = ctr_lo_, k = key_;
        for (int r = 0; r < 10; ++r) philox_round(c0, c1, k);
        block_[1] = c0;
        block_[0] = c1;
        avail_ = 2;
        if (++ctr_lo_ == 0) ++ctr_hi_;
    }

    u64 key_;
    u64 ctr_lo_ = 0, ctr_hi_ = 0;
    u64 block_[2] = {0, 0};
    int avail_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace floqlab
