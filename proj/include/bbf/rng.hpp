#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace bbf {

// Philox 4x32-10 counter-based generator (Salmon et al., SC 2011).
// Every variate in the toolkit is a pure function of (seed, stream, index),
// so extending a sampling horizon or replaying an event reproduces the exact
// same values regardless of call order or worker count.
namespace philox {

constexpr uint32_t kWeylA = 0x9E3779B9u;
constexpr uint32_t kWeylB = 0xBB67AE85u;
constexpr uint32_t kMulA = 0xD2511F53u;
constexpr uint32_t kMulB = 0xCD9E8D57u;

inline void mul_hi_lo(uint32_t a, uint32_t b, uint32_t& lo, uint32_t& hi) {
    uint64_t prod = static_cast<uint64_t>(a) * b;
    lo = static_cast<uint32_t>(prod);
    hi = static_cast<uint32_t>(prod >> 32);
}

inline std::array<uint32_t, 4> block(uint64_t key, uint64_t ctr_lo, uint64_t ctr_hi) {
    uint32_t c0 = static_cast<uint32_t>(ctr_lo);
    uint32_t c1 = static_cast<uint32_t>(ctr_lo >> 32);
    uint32_t c2 = static_cast<uint32_t>(ctr_hi);
    uint32_t c3 = static_cast<uint32_t>(ctr_hi >> 32);
    uint32_t k0 = static_cast<uint32_t>(key);
    uint32_t k1 = static_cast<uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        uint32_t lo0, hi0, lo1, hi1;
        mul_hi_lo(kMulA, c0, lo0, hi0);
        mul_hi_lo(kMulB, c2, lo1, hi1);
        uint32_t n0 = hi1 ^ c1 ^ k0;
        uint32_t n1 = lo1;
        uint32_t n2 = hi0 ^ c3 ^ k1;
        uint32_t n3 = lo0;
        c0 = n0; c1 = n1; c2 = n2; c3 = n3;
        k0 += kWeylA;
        k1 += kWeylB;
    }
    return {c0, c1, c2, c3};
}

}  // namespace philox

inline double u64_to_open_unit(uint64_t bits) {
    // 53-bit mantissa shifted into (0,1); never returns 0 or 1 exactly
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// One logical random stream, addressed by a 64-bit draw index. Each Philox
// block yields two doubles; draw i reads block i/2, word pair i%2.
struct CounterStream {
    uint64_t seed = 0;
    uint64_t stream = 0;

    std::array<double, 2> uniform_pair(uint64_t pair_index) const {
        auto w = philox::block(seed, pair_index, stream);
        uint64_t a = (static_cast<uint64_t>(w[1]) << 32) | w[0];
        uint64_t b = (static_cast<uint64_t>(w[3]) << 32) | w[2];
        return {u64_to_open_unit(a), u64_to_open_unit(b)};
    }

    double uniform_open(uint64_t index) const {
        return uniform_pair(index >> 1)[index & 1];
    }

    double exponential(uint64_t index, double rate) const {
        return -std::log(uniform_open(index)) / rate;
    }
};

// Stream-id layout: one replicate owns a few fixed-purpose streams.
enum StreamTag : uint64_t {
    kTagClockBin1 = 0,
    kTagClockBin2 = 1,
    kTagDiscrete = 2,
    kTagReserved = 3,
};
constexpr uint64_t kStreamsPerReplicate = 4;

inline CounterStream replicate_stream(uint64_t seed, uint64_t replicate, StreamTag tag) {
    return CounterStream{seed, replicate * kStreamsPerReplicate + tag};
}

}  // namespace bbf
