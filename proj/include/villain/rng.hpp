#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace villain {

// Philox4x32-10 counter-based generator. A (key, counter) pair maps to four
// independent 32-bit words, so any cell can draw its randoms for any sweep
// without touching shared state.
struct Philox {
    using Ctr = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Ctr block(Ctr c, Key k)
    {
        for (int r = 0; r < 10; ++r) {
            const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * c[0];
            const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * c[2];
            c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1), std::uint32_t(p0 >> 32) ^ c[3] ^ k[1],
                 std::uint32_t(p0)};
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
        return c;
    }
};

// Sequential stream over consecutive counter blocks. The first three counter
// words identify the stream; the fourth is the block index.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, std::uint32_t c0, std::uint32_t c1, std::uint32_t c2)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, ctr_{c0, c1, c2, 0u}
    {
    }

    std::uint32_t next_u32()
    {
        if (pos_ == 4) {
            buf_ = Philox::block(ctr_, key_);
            ++ctr_[3];
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    std::uint64_t next_u64()
    {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in the open interval (0, 1).
    double uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u = uniform(), v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double t = 6.283185307179586476925 * v;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    // Counter position, for checkpoints.
    std::uint32_t block_index() const { return ctr_[3]; }

private:
    Philox::Key key_;
    Philox::Ctr ctr_;
    Philox::Ctr buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace villain
