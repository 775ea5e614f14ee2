#pragma once

#include <cmath>
#include <cstdint>

namespace cble {

// Counter-based RNG (Philox4x32-10, Salmon et al. 2011). A stream is addressed
// by (seed, tag, index); draws within a stream are sequential. Streams never
// overlap, so per-path streams can be generated in any order and on any
// thread with identical results.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint32_t tag, std::uint64_t index)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          stream_lo_(static_cast<std::uint32_t>(index)),
          stream_hi_(static_cast<std::uint32_t>(index >> 32) ^ (tag * 0x9E3779B9u)) {}

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // uniform on (0,1]; safe under log()
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // uniform on [0,1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // standard normal, Marsaglia polar method with cached spare
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform_pos() - 1.0;
            v = 2.0 * uniform_pos() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

private:
    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        lo = static_cast<std::uint32_t>(p);
        hi = static_cast<std::uint32_t>(p >> 32);
    }

    void refill() {
        std::uint32_t c0 = static_cast<std::uint32_t>(block_);
        std::uint32_t c1 = static_cast<std::uint32_t>(block_ >> 32);
        std::uint32_t c2 = stream_lo_;
        std::uint32_t c3 = stream_hi_;
        std::uint32_t k0 = key0_;
        std::uint32_t k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            std::uint32_t lo0, hi0, lo1, hi1;
            mulhilo(0xD2511F53u, c0, lo0, hi0);
            mulhilo(0xCD9E8D57u, c2, lo1, hi1);
            const std::uint32_t n0 = hi1 ^ c1 ^ k0;
            const std::uint32_t n2 = hi0 ^ c3 ^ k1;
            c1 = lo1;
            c3 = lo0;
            c0 = n0;
            c2 = n2;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        buf_[0] = c0;
        buf_[1] = c1;
        buf_[2] = c2;
        buf_[3] = c3;
        ++block_;
        pos_ = 0;
    }

    std::uint32_t key0_, key1_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stream tags; nested estimators get disjoint namespaces.
namespace stream_tag {
inline constexpr std::uint32_t env_path = 1;
inline constexpr std::uint32_t env_jump = 2;
inline constexpr std::uint32_t branching = 3;
inline constexpr std::uint32_t renewal_desc = 4;
inline constexpr std::uint32_t renewal_asc = 5;
inline constexpr std::uint32_t cond_up = 6;
inline constexpr std::uint32_t cond_down = 7;
inline constexpr std::uint32_t mu_sample = 8;
inline constexpr std::uint32_t survival_direct = 9;
inline constexpr std::uint32_t survival_is = 10;
inline constexpr std::uint32_t b_const = 11;
inline constexpr std::uint32_t b_const_half = 12;
inline constexpr std::uint32_t inf_asymp = 13;
inline constexpr std::uint32_t stable_g_up = 14;
inline constexpr std::uint32_t stable_g_down = 15;
inline constexpr std::uint32_t martingale = 16;
inline constexpr std::uint32_t laplace_check = 17;
}  // namespace stream_tag

// Inverse standard normal CDF (Acklam's rational approximation polished with
// one Halley step against erfc); |error| stays at a few ulp over (0,1).
double norm_quantile(double p);

}  // namespace cble
